"""Myopic-greedy communication planning over fixed action policies.

Given the two agents' communication-free policies, this layer scores when a
single exchange is worth its cost: theta_nc is the expected cost to the
global goal with no exchange at all, theta_c the expected cost when the
agents exchange once at a given time and then continue silently.  The
meeting-on-a-grid case collapses to Manhattan distances, where theta_nc has
a closed form and the exchange-time table for each starting distance follows
from an exact evolution of the remaining distances.

Units in this module are system time steps: every step while the goal is
unmet costs 1, so a joint utility that charges each of the two agents per
step is twice these values, and an exchange cost C is C/2 here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .model import DecMdpCom, FactoredState


@dataclass(eq=False)
class FixedLocalPolicies:
    """The pair of given communication-free action policies.

    Each policy may be a LocalGoalPolicy, a callable (state, time) -> action,
    or an integer array (stationary if 1-D, time-major if 2-D).
    """

    policy1: object
    policy2: object

    def action(self, agent: int, s: int, t: int) -> int:
        pol = self.policy1 if agent == 1 else self.policy2
        if hasattr(pol, "action_at"):
            return pol.action_at(s, t)
        if callable(pol):
            return int(pol(s, t))
        arr = np.asarray(pol)
        if arr.ndim == 1:
            return int(arr[s])
        return int(arr[min(t, arr.shape[0] - 1), s])


@dataclass
class CommPolicy:
    """Exchange times per synchronized summary (meeting: starting distance).

    A distance with no entry means communication never pays within the time
    cap.  Time restarts at zero after every exchange, so the table re-applies
    after each one.
    """

    times: Dict[int, int]
    grid_size: int = 0
    p_u: float = 0.0
    comm_cost: float = 0.0

    def time_for(self, d: int) -> Optional[int]:
        return self.times.get(d)

    def __post_init__(self):
        for d, t in self.times.items():
            if t < 1:
                raise ValueError(f"exchange time for distance {d} must be >= 1, got {t}")


def _require_time(s: FactoredState) -> int:
    if s.t is None:
        raise ValueError("state must carry a time stamp")
    return s.t


def theta_nc(
    m: DecMdpCom,
    s0: FactoredState,
    policies: FixedLocalPolicies,
    _memo: Optional[dict] = None,
) -> float:
    """Expected accumulated reward to the global goal with no exchanges,
    following the fixed policies; truncated at the horizon."""
    memo = _memo if _memo is not None else {}
    t0 = s0.t if s0.t is not None else 0

    def rec(s1: int, s2: int, t: int) -> float:
        if m.is_goal(s1, s2):
            return 0.0
        if t >= m.horizon:
            return 0.0
        key = (s1, s2, t)
        if key in memo:
            return memo[key]
        a1 = policies.action(1, s1, t)
        a2 = policies.action(2, s2, t)
        row1 = m.agent1.transition[s1, a1]
        row2 = m.agent2.transition[s2, a2]
        total = 0.0
        for q1 in np.nonzero(row1 > 0.0)[0]:
            for q2 in np.nonzero(row2 > 0.0)[0]:
                p = row1[q1] * row2[q2]
                r = m.step_reward(s1, s2, a1, a2, int(q1), int(q2))
                total += p * (r + rec(int(q1), int(q2), t + 1))
        memo[key] = total
        return total

    return rec(s0.s1, s0.s2, t0)


def pbar(
    m: DecMdpCom,
    s: FactoredState,
    s_next: FactoredState,
    policies: FixedLocalPolicies,
    _memo: Optional[dict] = None,
) -> float:
    """Probability of reaching the time-stamped state s_next from s under
    the fixed policies: 1 on identity, a single joint transition one step
    ahead, 0 for earlier times, and a one-step chaining sum beyond."""
    t = _require_time(s)
    t_next = _require_time(s_next)
    if s == s_next:
        return 1.0
    a1 = policies.action(1, s.s1, t)
    a2 = policies.action(2, s.s2, t)
    row1 = m.agent1.transition[s.s1, a1]
    row2 = m.agent2.transition[s.s2, a2]
    if t_next == t + 1:
        return float(row1[s_next.s1] * row2[s_next.s2])
    if t_next < t + 1:
        return 0.0
    memo = _memo if _memo is not None else {}
    key = (s.s1, s.s2, t)
    if key in memo:
        return memo[key]
    total = 0.0
    for q1 in np.nonzero(row1 > 0.0)[0]:
        for q2 in np.nonzero(row2 > 0.0)[0]:
            p = row1[q1] * row2[q2]
            mid = FactoredState(int(q1), int(q2), t + 1)
            total += p * pbar(m, mid, s_next, policies, memo)
    memo[key] = total
    return total


def rbar(
    m: DecMdpCom,
    s0: FactoredState,
    s: FactoredState,
    policies: FixedLocalPolicies,
) -> float:
    """Expected reward accumulated moving from s0 to s under the policies,
    conditioned on actually arriving at s; 0 when s is unreachable."""
    t0 = _require_time(s0)
    t = _require_time(s)
    if t <= t0:
        raise ValueError(f"target time {t} must exceed start time {t0}")
    cur: Dict[Tuple[int, int], list] = {(s0.s1, s0.s2): [1.0, 0.0]}
    for tau in range(t0, t):
        nxt: Dict[Tuple[int, int], list] = {}
        for (s1, s2), (mu, rho) in cur.items():
            a1 = policies.action(1, s1, tau)
            a2 = policies.action(2, s2, tau)
            row1 = m.agent1.transition[s1, a1]
            row2 = m.agent2.transition[s2, a2]
            for q1 in np.nonzero(row1 > 0.0)[0]:
                for q2 in np.nonzero(row2 > 0.0)[0]:
                    p = row1[q1] * row2[q2]
                    r = m.step_reward(s1, s2, a1, a2, int(q1), int(q2))
                    cell = nxt.setdefault((int(q1), int(q2)), [0.0, 0.0])
                    cell[0] += mu * p
                    cell[1] += rho * p + mu * p * r
        cur = nxt
    cell = cur.get((s.s1, s.s2))
    if cell is None or cell[0] <= 0.0:
        return 0.0
    return cell[1] / cell[0]


def theta_c(
    m: DecMdpCom,
    s0: FactoredState,
    s: FactoredState,
    policies: FixedLocalPolicies,
) -> float:
    """Expected cost when the agents exchange exactly once at the revealed
    state s (one local component of s given, the other summed out), then
    continue without communicating.  The exchange cost is waived for
    branches whose endpoint already is the global goal."""
    t = _require_time(s)
    t0 = s0.t if s0.t is not None else 0
    if t < 1:
        raise ValueError(f"exchange time must be at least 1, got {t}")
    if (s.s1 is None) == (s.s2 is None):
        raise ValueError("exactly one local component of s must be given")
    elapsed = t - t0
    # marginal occupancy of the hidden agent after the elapsed steps
    if s.s1 is None:
        hidden_agent, hidden_idx, start = m.agent1, 1, s0.s1
    else:
        hidden_agent, hidden_idx, start = m.agent2, 2, s0.s2
    row = np.zeros(hidden_agent.n_states)
    row[start] = 1.0
    for j in range(elapsed):
        acts = [
            policies.action(hidden_idx, q, t0 + j)
            for q in range(hidden_agent.n_states)
        ]
        step = hidden_agent.transition[np.arange(hidden_agent.n_states), acts]
        row = row @ step
    memo: dict = {}
    total = 0.0
    for q in np.nonzero(row > 0.0)[0]:
        if s.s1 is None:
            joint = FactoredState(int(q), s.s2, t)
        else:
            joint = FactoredState(s.s1, int(q), t)
        flag = 0.0 if m.is_goal(joint.s1, joint.s2) else 1.0
        r = rbar(m, s0, joint, policies)
        cont = theta_nc(m, joint, policies, _memo=memo)
        total += row[q] * (r + cont + m.comm_cost * flag)
    return total


@lru_cache(maxsize=None)
def theta_nc_meeting(d1: int, d2: int, p1: float, p2: float = None) -> float:
    """Expected negative time until two walkers cover distances d1 and d2,
    each advancing one unit per step with its own success probability.

    Solved cell by cell: the self-referential stay-stay term is eliminated
    algebraically, so each value is exact.
    """
    if p2 is None:
        p2 = p1
    if d1 < 0 or d2 < 0:
        raise ValueError("distances must be nonnegative")
    if (d1 > 0 and p1 <= 0.0) or (d2 > 0 and p2 <= 0.0):
        raise ValueError(
            "success probability 0 with positive distance: expected time diverges"
        )
    if d1 == 0 and d2 == 0:
        return 0.0
    if d2 == 0:
        return -d1 / p1
    if d1 == 0:
        return -d2 / p2
    q1, q2 = 1.0 - p1, 1.0 - p2
    num = (
        p1 * p2 * theta_nc_meeting(d1 - 1, d2 - 1, p1, p2)
        + p1 * q2 * theta_nc_meeting(d1 - 1, d2, p1, p2)
        + q1 * p2 * theta_nc_meeting(d1, d2 - 1, p1, p2)
        - 1.0
    )
    return num / (1.0 - q1 * q2)


def split_distance(d: int) -> Tuple[int, int]:
    """Midpoint split of a separation d: agent 1 takes the shorter half."""
    return d // 2, d - d // 2


def _decrement(r: int, p: float):
    if r == 0:
        return ((0, 1.0),)
    if p >= 1.0:
        return ((r - 1, 1.0),)
    return ((r - 1, p), (r, 1.0 - p))


def distance_evolution(d1: int, d2: int, p: float, steps: int):
    """Evolve the pair of remaining distances for a number of steps.

    Both agents walk toward a shared target; each step each remaining
    distance drops by one with probability p, independently; (0, 0) absorbs
    (the agents have met).  Yields (t, met_mass_at_t, alive_dict) per step.
    """
    alive = {(d1, d2): 1.0}
    for t in range(1, steps + 1):
        nxt: Dict[Tuple[int, int], float] = {}
        for (r1, r2), mass in alive.items():
            for n1, pr1 in _decrement(r1, p):
                for n2, pr2 in _decrement(r2, p):
                    key = (n1, n2)
                    nxt[key] = nxt.get(key, 0.0) + mass * pr1 * pr2
        met = nxt.pop((0, 0), 0.0)
        alive = nxt
        yield t, met, alive


def comm_policy_table(
    grid_size: int = 10,
    p_u: float = 0.8,
    comm_cost: float = -0.1,
    action_cost: float = -1.0,
    time_cap: int = 200,
) -> CommPolicy:
    """Exchange-time table for every starting separation on the grid.

    For separation d the agents head to the midpoint (split_distance).  For
    each candidate exchange time t the one-exchange cost is scored exactly
    over the remaining-distance distribution: branches that met during the
    first t steps pay only their meeting time; live branches pay t steps,
    the exchange (converted to time units), and the no-exchange cost of the
    rebalanced midpoint split of their remaining separation.  The table
    entry is one past the earliest t that strictly beats never exchanging;
    no such t under the cap means no entry.
    """
    if not (0.0 < p_u <= 1.0):
        raise ValueError(f"success probability must be in (0, 1], got {p_u}")
    if action_cost >= 0.0:
        raise ValueError("action cost must be negative: it sets the time unit")
    cost_per_step = 2.0 * -action_cost
    comm_in_steps = comm_cost / cost_per_step
    d_max = 2 * (grid_size - 1)
    times: Dict[int, int] = {}
    for d in range(1, d_max + 1):
        d1, d2 = split_distance(d)
        base = theta_nc_meeting(d1, d2, p_u, p_u)
        met_cost = 0.0
        for t, met, alive in distance_evolution(d1, d2, p_u, time_cap - 1):
            met_cost += met * (-t)
            alive_mass = sum(alive.values())
            cont = sum(
                mass * theta_nc_meeting(*split_distance(r1 + r2), p_u, p_u)
                for (r1, r2), mass in alive.items()
            )
            value = met_cost - t * alive_mass + cont + comm_in_steps * alive_mass
            if value > base + 1e-12:
                times[d] = t + 1
                break
    return CommPolicy(times=times, grid_size=grid_size, p_u=p_u, comm_cost=comm_cost)


def comm_table_csv(
    grid_size: int = 10,
    comm_cost: float = -0.1,
    p_values=(0.2, 0.4, 0.6, 0.8),
    action_cost: float = -1.0,
) -> str:
    """Rows per success probability, columns per starting distance."""
    d_max = 2 * (grid_size - 1)
    header = "p_u," + ",".join(str(d) for d in range(1, d_max + 1))
    lines = [header]
    for p in p_values:
        pol = comm_policy_table(grid_size, p, comm_cost, action_cost)
        cells = [
            str(pol.times[d]) if d in pol.times else "never"
            for d in range(1, d_max + 1)
        ]
        lines.append(f"{p}," + ",".join(cells))
    return "\n".join(lines) + "\n"
