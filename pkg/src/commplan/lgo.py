"""Goal-oriented mechanism planning in polynomial time.

Instead of searching arbitrary policy trees, the mechanism assigns each agent
a local goal-directed policy and a window length k: both agents act alone for
k steps, then exchange states (the exchange is charged with every window,
including one that ends exactly at the horizon) and receive a fresh
assignment.  Policy iteration over assignments converges because the
assignment space is finite and updates are strict improvements.

Windows propagate each agent independently (transition independence), so the
k-step window reduces to per-agent propagator matrices plus accumulated
action-cost vectors, and the candidate scores for a whole state layer come
out of a few dense matrix products.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model import AgentModel, DecMdpCom, FactoredState


@dataclass(eq=False)
class LocalGoalPolicy:
    """A per-agent policy the mechanism can assign, identified by its label.

    actions[t, s] is the action taken in local state s at absolute time t;
    stationary policies store one row and behave identically at all times.
    goal is the target local state for goal-directed policies, None for
    policies defined some other way (e.g. fixed production quotas).
    """

    label: str
    actions: np.ndarray
    stationary: bool = False
    goal: Optional[int] = None
    value: Optional[np.ndarray] = None

    def action_at(self, s: int, t: int) -> int:
        row = 0 if self.stationary else min(t, self.actions.shape[0] - 1)
        return int(self.actions[row, s])


@dataclass(eq=False)
class GoalAssignment:
    """One mechanism decision: a policy per agent and an exchange window k."""

    g1: LocalGoalPolicy
    g2: LocalGoalPolicy
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"window length must be at least 1, got {self.k}")

    @property
    def key(self) -> Tuple[str, str, int]:
        return (self.g1.label, self.g2.label, self.k)

    def __eq__(self, other):
        return isinstance(other, GoalAssignment) and self.key == other.key

    def __hash__(self):
        return hash(self.key)


@dataclass
class LgoMechanism:
    """Assignment table (s1, s2, t) -> GoalAssignment plus its value table."""

    assignment: Dict[Tuple[int, int, int], GoalAssignment]
    value: np.ndarray
    sweeps: int = 0
    candidates_considered: int = 0
    sweep_candidate_counts: List[int] = field(default_factory=list)

    def assignment_at(self, s1: int, s2: int, t: int) -> GoalAssignment:
        return self.assignment[(s1, s2, t)]


def solve_local_mdp(
    agent: AgentModel, goal: int, T: int, action_cost=None
) -> LocalGoalPolicy:
    """Finite-horizon backward induction toward one local goal.

    Being at the goal costs nothing: the agent holds its no-op there until
    the next exchange.  If some states cannot reach the goal at all, the
    policy is still defined (it maximizes reward best-effort) and a warning
    is emitted.
    """
    if agent.noop is None:
        raise ValueError(
            f"agent {agent.name or ''} has no designated no-op action; "
            "goal-directed behavior needs one to hold the goal at zero cost"
        )
    n = agent.n_states
    costs = np.zeros(agent.n_actions)
    if action_cost is not None:
        costs = np.asarray(
            [action_cost[a] for a in range(agent.n_actions)], dtype=float
        )
    V = np.zeros((T + 1, n))
    acts = np.zeros((T, n), dtype=int)
    for t in range(T - 1, -1, -1):
        q = costs[None, :] + np.einsum("saq,q->sa", agent.transition, V[t + 1])
        acts[t] = np.argmax(q, axis=1)
        V[t] = q[np.arange(n), acts[t]]
        V[t, goal] = 0.0
        acts[t, goal] = agent.noop
    stationary = bool(np.all(acts == acts[0]))

    reachable = {goal}
    frontier = {goal}
    support = [
        {s for s in range(n) if (agent.transition[s, :, q] > 0.0).any()}
        for q in range(n)
    ]
    while frontier:
        nxt = set()
        for q in frontier:
            nxt |= support[q] - reachable
        reachable |= nxt
        frontier = nxt
    stranded = n - len(reachable)
    if stranded:
        warnings.warn(
            f"goal state {goal}: {stranded} states cannot reach it; "
            "policy is best-effort there",
            stacklevel=2,
        )
    return LocalGoalPolicy(
        label=f"goal_{agent.state_label(goal)}",
        actions=acts[:1] if stationary else acts,
        stationary=stationary,
        goal=goal,
        value=V,
    )


def _step_matrix(agent: AgentModel, pol: LocalGoalPolicy, t: int) -> np.ndarray:
    acts = pol.actions[0 if pol.stationary else min(t, pol.actions.shape[0] - 1)]
    return agent.transition[np.arange(agent.n_states), acts]


def _step_cost_vector(agent: AgentModel, pol: LocalGoalPolicy, t: int) -> np.ndarray:
    if agent.action_cost is None:
        return np.zeros(agent.n_states)
    acts = pol.actions[0 if pol.stationary else min(t, pol.actions.shape[0] - 1)]
    return np.asarray(agent.action_cost, dtype=float)[acts]


class _WindowCache:
    """Per-agent k-step propagators M and accumulated action-cost vectors c.

    For a window [t, t+k): M[s, s'] is the chance of ending at s' having
    started at s, and c[s] the expected total action cost on the way.
    Stationary policies share entries across t.
    """

    def __init__(self, m: DecMdpCom):
        self.m = m
        self.cache: Dict[tuple, Tuple[np.ndarray, np.ndarray]] = {}

    def pieces(self, agent_idx: int, pol: LocalGoalPolicy, t: int, k: int):
        agent = self.m.agent1 if agent_idx == 1 else self.m.agent2
        t_key = 0 if pol.stationary else t
        key = (agent_idx, pol.label, t_key, k)
        if key in self.cache:
            return self.cache[key]
        prev_key = (agent_idx, pol.label, t_key, k - 1)
        if k > 1 and prev_key in self.cache:
            M, c = self.cache[prev_key]
            step_t = t + k - 1
        else:
            M = np.eye(agent.n_states)
            c = np.zeros(agent.n_states)
            for j in range(k - 1):
                c = c + M @ _step_cost_vector(agent, pol, t + j)
                M = M @ _step_matrix(agent, pol, t + j)
            step_t = t + k - 1
        c = c + M @ _step_cost_vector(agent, pol, step_t)
        M = M @ _step_matrix(agent, pol, step_t)
        self.cache[key] = (M, c)
        return M, c


def png(
    assignment: GoalAssignment,
    m: DecMdpCom,
    s: FactoredState,
    t: int,
    k: int,
) -> np.ndarray:
    """Distribution over global states after k steps under the assigned
    policies; the exchange happens after the window regardless, so there is
    no early termination inside it."""
    if k <= 0:
        raise ValueError(f"window length must be positive, got {k}")
    if t + k > m.horizon:
        raise ValueError(f"window [{t}, {t + k}) runs past the horizon {m.horizon}")
    row1 = np.zeros(m.agent1.n_states)
    row1[s.s1] = 1.0
    row2 = np.zeros(m.agent2.n_states)
    row2[s.s2] = 1.0
    for j in range(k):
        row1 = row1 @ _step_matrix(m.agent1, assignment.g1, t + j)
        row2 = row2 @ _step_matrix(m.agent2, assignment.g2, t + j)
    return np.outer(row1, row2)


def _window_forward(
    m: DecMdpCom,
    pol1: LocalGoalPolicy,
    pol2: LocalGoalPolicy,
    s: FactoredState,
    t: int,
    k: int,
) -> Dict[Tuple[int, int], list]:
    """Joint mass and accumulated reward over a k-step no-exchange window."""
    cur: Dict[Tuple[int, int], list] = {(s.s1, s.s2): [1.0, 0.0]}
    for j in range(k):
        tau = t + j
        nxt: Dict[Tuple[int, int], list] = {}
        for (s1, s2), (mu, rho) in cur.items():
            a1 = pol1.action_at(s1, tau)
            a2 = pol2.action_at(s2, tau)
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
    return cur


def rng(
    assignment: GoalAssignment,
    m: DecMdpCom,
    s: FactoredState,
    t: int,
    s_next: FactoredState,
    k: int,
) -> float:
    """Expected window reward conditioned on ending at s_next, plus the
    exchange cost (always charged; the exchange follows every window)."""
    if k <= 0:
        raise ValueError(f"window length must be positive, got {k}")
    if t + k > m.horizon:
        raise ValueError(f"window [{t}, {t + k}) runs past the horizon {m.horizon}")
    cells = _window_forward(m, assignment.g1, assignment.g2, s, t, k)
    cell = cells.get((s_next.s1, s_next.s2))
    if cell is None or cell[0] <= 0.0:
        return 0.0
    return cell[1] / cell[0] + m.comm_cost


def _phi_matrix(m: DecMdpCom) -> np.ndarray:
    phi = m.potential_matrix()
    if phi is None:
        return np.zeros((m.agent1.n_states, m.agent2.n_states))
    return phi


def _f_matrix(
    m: DecMdpCom,
    cache: _WindowCache,
    g1: LocalGoalPolicy,
    g2: LocalGoalPolicy,
    t: int,
    k: int,
    V_next: np.ndarray,
    phi: np.ndarray,
) -> np.ndarray:
    """Candidate value of assigning (g1, g2, k) at time t, for every state.

    Expected action costs accumulate per agent; the state-based reward
    telescopes through the potential, leaving end-of-window potential minus
    the starting one; the exchange cost lands once; the future value enters
    through the joint k-step propagator."""
    M1, c1 = cache.pieces(1, g1, t, k)
    M2, c2 = cache.pieces(2, g2, t, k)
    W = phi + V_next
    return c1[:, None] + c2[None, :] - phi + m.comm_cost + M1 @ W @ M2.T


def _evaluate_assignment_table(
    table: Dict[Tuple[int, int, int], GoalAssignment],
    m: DecMdpCom,
    cache: Optional[_WindowCache] = None,
) -> np.ndarray:
    T = m.horizon
    n1, n2 = m.agent1.n_states, m.agent2.n_states
    V = np.zeros((T + 1, n1, n2))
    fast = m.extra_reward is None
    phi = _phi_matrix(m) if fast else None
    cache = cache or _WindowCache(m)
    for t in range(T - 1, -1, -1):
        groups: Dict[tuple, list] = {}
        for s1 in range(n1):
            for s2 in range(n2):
                asg = table[(s1, s2, t)]
                if t + asg.k > m.horizon:
                    raise ValueError(
                        f"assignment at ({s1}, {s2}, {t}) has window {asg.k} "
                        f"running past the horizon {m.horizon}"
                    )
                groups.setdefault(asg.key, [asg, [], []])
                groups[asg.key][1].append(s1)
                groups[asg.key][2].append(s2)
        for asg, idx1, idx2 in groups.values():
            if fast:
                F = _f_matrix(m, cache, asg.g1, asg.g2, t, asg.k, V[t + asg.k], phi)
                V[t, idx1, idx2] = F[idx1, idx2]
            else:
                for s1, s2 in zip(idx1, idx2):
                    cells = _window_forward(
                        m, asg.g1, asg.g2, FactoredState(s1, s2), t, asg.k
                    )
                    total = 0.0
                    for (q1, q2), (mu, rho) in cells.items():
                        total += rho + mu * (m.comm_cost + V[t + asg.k, q1, q2])
                    V[t, s1, s2] = total
    return V


def evaluate_lgo(delta, m: DecMdpCom) -> np.ndarray:
    """Value table of a goal-assignment mechanism; V[horizon] = 0."""
    table = delta.assignment if isinstance(delta, LgoMechanism) else delta
    return _evaluate_assignment_table(table, m)


def default_candidates(agent: AgentModel, T: int) -> List[LocalGoalPolicy]:
    return [
        solve_local_mdp(agent, g, T, agent.action_cost)
        for g in agent.goal_candidates
    ]


def lgo_msbpi(
    m: DecMdpCom,
    candidates1: Optional[Sequence[LocalGoalPolicy]] = None,
    candidates2: Optional[Sequence[LocalGoalPolicy]] = None,
    max_sweeps: int = 200,
) -> LgoMechanism:
    """Policy iteration over goal assignments.

    Each round evaluates the current assignment table, then for every window
    length k (ascending), time, state, and candidate pair, re-scores the
    assignment and installs it wherever it strictly beats the current value
    (in place, so later candidates must beat the freshest value).  Stops when
    a full round changes nothing.
    """
    T = m.horizon
    n1, n2 = m.agent1.n_states, m.agent2.n_states
    cand1 = list(candidates1) if candidates1 is not None else default_candidates(m.agent1, T)
    cand2 = list(candidates2) if candidates2 is not None else default_candidates(m.agent2, T)
    if not cand1 or not cand2:
        raise ValueError("both agents need at least one candidate policy")
    fast = m.extra_reward is None
    phi = _phi_matrix(m)
    cache = _WindowCache(m)

    table: Dict[Tuple[int, int, int], GoalAssignment] = {}
    init = GoalAssignment(cand1[0], cand2[0], 1)
    for t in range(T):
        for s1 in range(n1):
            for s2 in range(n2):
                table[(s1, s2, t)] = init

    considered = 0
    sweep_counts: List[int] = []
    sweeps = 0
    while sweeps < max_sweeps:
        V = _evaluate_assignment_table(table, m, cache)
        changed = False
        sweep_considered = 0
        for k in range(1, T):
            for t in range(T):
                sweep_considered += n1 * n2 * len(cand1) * len(cand2)
                if t + k > T:
                    continue
                for g1 in cand1:
                    for g2 in cand2:
                        if fast:
                            F = _f_matrix(m, cache, g1, g2, t, k, V[t + k], phi)
                        else:
                            F = np.empty((n1, n2))
                            for s1 in range(n1):
                                for s2 in range(n2):
                                    cells = _window_forward(
                                        m, g1, g2, FactoredState(s1, s2), t, k
                                    )
                                    total = 0.0
                                    for (q1, q2), (mu, rho) in cells.items():
                                        total += rho + mu * (
                                            m.comm_cost + V[t + k, q1, q2]
                                        )
                                    F[s1, s2] = total
                        mask = F > V[t]
                        if mask.any():
                            changed = True
                            asg = GoalAssignment(g1, g2, k)
                            for s1, s2 in zip(*np.nonzero(mask)):
                                table[(int(s1), int(s2), t)] = asg
                            V[t][mask] = F[mask]
        sweeps += 1
        considered += sweep_considered
        sweep_counts.append(sweep_considered)
        if not changed:
            break
    V = _evaluate_assignment_table(table, m, cache)
    return LgoMechanism(
        assignment=table,
        value=V,
        sweeps=sweeps,
        candidates_considered=considered,
        sweep_candidate_counts=sweep_counts,
    )


def mechanism_csv(mech: LgoMechanism) -> str:
    """Assignment table as CSV (state pair, time, labels, window, value)."""
    lines = ["s1,s2,t,g1,g2,k,V"]
    for (s1, s2, t), asg in sorted(mech.assignment.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])):
        lines.append(
            f"{s1},{s2},{t},{asg.g1.label},{asg.g2.label},{asg.k},"
            f"{float(mech.value[t, s1, s2])!r}"
        )
    return "\n".join(lines) + "\n"


def delta_independence(
    cost_oracle: Callable[[int, int, int, int], float],
    goals1: Sequence[int],
    goals2: Sequence[int],
    states: Sequence[int],
    T: int,
) -> Tuple[float, float]:
    """Worst-case cost interference between the agents' goal pursuits.

    cost_oracle(agent, s, own_goal, other_goal) gives the expected cost agent
    1 or 2 incurs reaching own_goal from global state s while its partner
    pursues other_goal.  The interference of one agent is the largest spread,
    over partner goals, of that cost; the bound on the mechanism's loss from
    treating goals independently is twice the horizon times the worst spread.
    """

    def spread(agent: int, own_goals, other_goals) -> float:
        worst = 0.0
        for s in states:
            for g in own_goals:
                vals = [cost_oracle(agent, s, g, h) for h in other_goals]
                worst = max(worst, max(vals) - min(vals))
        return worst

    d1 = spread(1, goals1, goals2)
    d2 = spread(2, goals2, goals1)
    delta = max(d1, d2)
    return delta, 2.0 * T * delta
