"""Two-agent decentralized MDP with costly communication.

The global process factors into two independent local processes: each agent
fully observes its own local state, the joint transition probability is the
product of the local ones, and the only way to learn the other agent's state
is a joint message exchange charged ``comm_cost`` once per exchange.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np


class FactoredState(NamedTuple):
    """A global state as a pair of local state indices, optionally stamped with time."""

    s1: int
    s2: int
    t: Optional[int] = None


@dataclass(eq=False)
class AgentModel:
    """One agent's local MDP component.

    transition[s, a, s'] is the probability of moving to local state s' when
    action a is taken in local state s.  goal_candidates lists the local
    states that may serve as assigned goals.  noop, when set, is the index of
    a designated stay-in-place action (zero cost once a goal is reached).
    """

    n_states: int
    actions: tuple
    transition: np.ndarray
    goal_candidates: tuple = ()
    action_cost: Optional[np.ndarray] = None
    noop: Optional[int] = None
    state_labels: Optional[tuple] = None
    name: str = "agent"

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        if self.action_cost is not None:
            self.action_cost = np.asarray(self.action_cost, dtype=float)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def state_label(self, s: int) -> str:
        if self.state_labels is not None:
            return self.state_labels[s]
        return str(s)

    def successors(self, s: int, a: int) -> np.ndarray:
        """Indices of local states reachable in one step under action a."""
        return np.nonzero(self.transition[s, a] > 0.0)[0]

    def violations(self) -> list:
        """Invariant violations of this local model, empty when well formed."""
        out = []
        if self.transition.shape != (self.n_states, self.n_actions, self.n_states):
            out.append(
                f"{self.name}: transition shape {self.transition.shape} does not "
                f"match ({self.n_states}, {self.n_actions}, {self.n_states})"
            )
            return out
        if np.any(self.transition < -1e-12) or np.any(self.transition > 1.0 + 1e-12):
            bad = np.argwhere((self.transition < -1e-12) | (self.transition > 1.0 + 1e-12))
            s, a, _ = bad[0]
            out.append(f"{self.name}: probability out of [0,1] at state {s} action {a}")
        sums = self.transition.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > 1e-9)
        for s, a in bad[:10]:
            out.append(
                f"{self.name}: transition row for state {s} action "
                f"{self.actions[a]} sums to {sums[s, a]:.12g}"
            )
        for g in self.goal_candidates:
            if not (0 <= int(g) < self.n_states):
                out.append(f"{self.name}: goal candidate {g} out of range")
        return out


@dataclass(eq=False)
class DecMdpCom:
    """The joint decision process: two independent agents plus an exchange cost.

    Per-step system reward decomposes as

        action_cost1[a1] + action_cost2[a2] + (potential(s') - potential(s)) + extra(s, s')

    where a communicating agent executes no domain action that step (its term
    drops out and its local state freezes).  ``potential`` is a state score
    whose per-step increments telescope to a terminal score, which is how
    end-of-horizon payoffs are expressed without a special boundary term.
    comm_cost is charged once per joint exchange, never per agent.
    """

    agent1: AgentModel
    agent2: AgentModel
    comm_cost: float
    horizon: int
    initial_state: FactoredState
    goal_predicate: Optional[Callable[[int, int], bool]] = None
    potential: Optional[Callable[[int, int], float]] = None
    extra_reward: Optional[Callable[[int, int, int, int], float]] = None
    name: str = "decmdp"

    def is_goal(self, s1: int, s2: int) -> bool:
        if self.goal_predicate is None:
            return False
        return bool(self.goal_predicate(s1, s2))

    def action_cost(self, agent_index: int, a: Optional[int]) -> float:
        if a is None:
            return 0.0
        agent = self.agent1 if agent_index == 1 else self.agent2
        if agent.action_cost is None:
            return 0.0
        return float(agent.action_cost[a])

    def step_reward(
        self,
        s1: int,
        s2: int,
        a1: Optional[int],
        a2: Optional[int],
        ns1: int,
        ns2: int,
    ) -> float:
        """System reward for one step; a None action means that agent communicated."""
        r = self.action_cost(1, a1) + self.action_cost(2, a2)
        if self.potential is not None:
            r += self.potential(ns1, ns2) - self.potential(s1, s2)
        if self.extra_reward is not None:
            r += self.extra_reward(s1, s2, ns1, ns2)
        return r

    def joint_reward(self, s: FactoredState, a1: int, a2: int, s_next: FactoredState) -> float:
        """Reward of one joint domain step (both agents acting)."""
        return self.step_reward(s.s1, s.s2, a1, a2, s_next.s1, s_next.s2)

    def potential_matrix(self) -> Optional[np.ndarray]:
        """potential evaluated on every global state, shape (n1, n2); None if unset."""
        if self.potential is None:
            return None
        n1, n2 = self.agent1.n_states, self.agent2.n_states
        out = np.empty((n1, n2))
        for i in range(n1):
            for j in range(n2):
                out[i, j] = self.potential(i, j)
        return out

    def goal_mask(self) -> np.ndarray:
        """Boolean matrix (n1, n2) marking global goal states."""
        n1, n2 = self.agent1.n_states, self.agent2.n_states
        mask = np.zeros((n1, n2), dtype=bool)
        if self.goal_predicate is None:
            return mask
        for i in range(n1):
            for j in range(n2):
                mask[i, j] = bool(self.goal_predicate(i, j))
        return mask


def joint_transition_prob(
    m: DecMdpCom, s: FactoredState, a1: int, a2: int, s_next: FactoredState
) -> float:
    """Probability of one joint domain step, the product of the local rows."""
    for agent, st, act in ((m.agent1, s.s1, a1), (m.agent2, s.s2, a2)):
        if not (0 <= st < agent.n_states):
            raise ValueError(f"{agent.name}: state index {st} out of range")
        if not (0 <= act < agent.n_actions):
            raise ValueError(f"{agent.name}: action index {act} out of range")
    for agent, st in ((m.agent1, s_next.s1), (m.agent2, s_next.s2)):
        if not (0 <= st < agent.n_states):
            raise ValueError(f"{agent.name}: next-state index {st} out of range")
    p1 = m.agent1.transition[s.s1, a1, s_next.s1]
    p2 = m.agent2.transition[s.s2, a2, s_next.s2]
    return float(p1 * p2)


def _goal_reachable_within(m: DecMdpCom, max_visited: int = 200_000) -> Optional[bool]:
    """Breadth-first reachability of any global goal within the horizon.

    Returns None when the joint space is too large to settle the question
    within the visit budget.
    """
    if m.goal_predicate is None:
        return None
    start = (m.initial_state.s1, m.initial_state.s2)
    if m.is_goal(*start):
        return True
    frontier = {start}
    seen = {start}
    for _ in range(m.horizon):
        nxt = set()
        for s1, s2 in frontier:
            for a1 in range(m.agent1.n_actions):
                succ1 = m.agent1.successors(s1, a1)
                for a2 in range(m.agent2.n_actions):
                    succ2 = m.agent2.successors(s2, a2)
                    for t1 in succ1:
                        for t2 in succ2:
                            q = (int(t1), int(t2))
                            if q in seen:
                                continue
                            if m.is_goal(*q):
                                return True
                            seen.add(q)
                            nxt.add(q)
                            if len(seen) > max_visited:
                                return None
        if not nxt:
            return False
        frontier = nxt
    return False


def validate(m: DecMdpCom) -> list:
    """Invariant report for a joint model; violations first, then warnings."""
    out = []
    out.extend(m.agent1.violations())
    out.extend(m.agent2.violations())
    if m.horizon < 1:
        out.append(f"horizon must be >= 1, got {m.horizon}")
    if m.comm_cost > 0:
        out.append(f"comm_cost must be <= 0, got {m.comm_cost}")
    s0 = m.initial_state
    if not (0 <= s0.s1 < m.agent1.n_states and 0 <= s0.s2 < m.agent2.n_states):
        out.append(f"initial state {s0} out of range")
    elif s0.t is not None and not (0 <= s0.t <= m.horizon):
        out.append(f"initial time stamp {s0.t} outside 0..{m.horizon}")
    else:
        try:
            r = m.step_reward(s0.s1, s0.s2, 0, 0, s0.s1, s0.s2)
            if not np.isfinite(r):
                out.append("joint reward is not finite at the initial state")
        except Exception as exc:  # noqa: BLE001 - report, do not raise
            out.append(f"joint reward undefined at the initial state: {exc}")
        reachable = _goal_reachable_within(m)
        if reachable is False:
            out.append(
                f"warning: no global goal state reachable within {m.horizon} steps"
            )
    return out
