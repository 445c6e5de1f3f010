"""Concrete problem instances and the experiment strategies that run on them.

Two scenarios are provided.  In the production scenario two machines make
parts of two types; a part sells only when matched with the other machine's
part of the same type, so the terminal payoff is min(B_a, C_a) + min(B_b,
C_b), expressed through the joint model's potential so that per-step reward
increments telescope to it.  In the meeting scenario two agents walk on a
grid toward a shared midpoint and the global goal is co-location; the joint
model charges one unit per system step while unmet, which makes its values
directly comparable to the analytic meeting-time recursions, while episode
utility (each agent paying the action cost every step) is handled by the
simulator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np

from .lgo import LocalGoalPolicy
from .model import AgentModel, DecMdpCom, FactoredState
from .myopic import CommPolicy


# ---------------------------------------------------------------------------
# strategy markers


@dataclass(frozen=True)
class NoCommunication:
    """Fixed plan from the initial state; never exchange."""


@dataclass(frozen=True)
class Ideal:
    """Exchange every step free of charge; the full-information bound."""


@dataclass(frozen=True)
class AlwaysCommunicate:
    """Same behavior as Ideal but every exchange is charged."""


@dataclass(frozen=True)
class SubGoals:
    """Exchange when an agent enters the region around the shared midpoint.

    The region radius is floor(p * d / 2) for the separation d revealed at
    the last exchange.
    """

    p: float

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"radius fraction must be in (0, 1], got {self.p}")


@dataclass(eq=False)
class MyopicGreedy:
    """Exchange at the tabulated time for the last synchronized separation."""

    policy: CommPolicy


def subgoal_strategy(cfg: "GridConfig", p: float) -> SubGoals:
    """Validated SubGoals strategy for a grid configuration."""
    del cfg  # the radius depends only on revealed separations
    return SubGoals(p)


SUBGOAL_SWEEP = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


# ---------------------------------------------------------------------------
# production scenario


@dataclass(frozen=True)
class ProductionState:
    """Counts of parts made so far: machine 1 holds (b_a, b_b), machine 2
    (c_a, c_b)."""

    b_a: int
    b_b: int
    c_a: int
    c_b: int

    def __post_init__(self):
        if min(self.b_a, self.b_b, self.c_a, self.c_b) < 0:
            raise ValueError(f"part counts must be nonnegative: {self}")

    def products(self) -> int:
        """Sellable products: parts pair up across machines by type."""
        return min(self.b_a, self.c_a) + min(self.b_b, self.c_b)


@dataclass(frozen=True)
class ProductionOption:
    """Cyclic quota: make x_a parts of type a, then x_b of type b, repeat."""

    x_a: int
    x_b: int

    def __post_init__(self):
        if self.x_a < 0 or self.x_b < 0:
            raise ValueError(f"quota counts must be nonnegative: {self}")
        if self.x_a + self.x_b < 1:
            raise ValueError("quota must demand at least one part per cycle")


DEFAULT_PRODUCTION_OPTIONS = (
    ProductionOption(0, 1),
    ProductionOption(1, 4),
    ProductionOption(2, 3),
    ProductionOption(1, 1),
    ProductionOption(3, 2),
    ProductionOption(4, 1),
    ProductionOption(1, 0),
)

MAKE_A, MAKE_B = 0, 1


def _machine_model(
    name: str,
    p: float,
    init: Tuple[int, int],
    horizon: int,
    action_cost: float,
) -> Tuple[AgentModel, Tuple[int, int]]:
    """One machine: two counters, two actions, success probability p.

    Counter caps are initial count plus horizon (one part per step at most),
    so every reachable count has a state.
    """
    if not (0.0 < p <= 1.0):
        raise ValueError(f"success probability must be in (0, 1], got {p}")
    cap_a, cap_b = init[0] + horizon, init[1] + horizon
    na, nb = cap_a + 1, cap_b + 1
    n = na * nb
    trans = np.zeros((n, 2, n))
    labels = []
    for a_cnt in range(na):
        for b_cnt in range(nb):
            s = a_cnt * nb + b_cnt
            labels.append(f"{a_cnt}-{b_cnt}")
            bumped_a = (min(a_cnt + 1, cap_a)) * nb + b_cnt
            bumped_b = a_cnt * nb + min(b_cnt + 1, cap_b)
            trans[s, MAKE_A, bumped_a] += p
            trans[s, MAKE_A, s] += 1.0 - p
            trans[s, MAKE_B, bumped_b] += p
            trans[s, MAKE_B, s] += 1.0 - p
    agent = AgentModel(
        n_states=n,
        actions=("make_a", "make_b"),
        transition=trans,
        goal_candidates=(),
        action_cost=np.array([action_cost, action_cost]),
        noop=None,
        state_labels=tuple(labels),
        name=name,
    )
    return agent, (cap_a, cap_b)


def quota_policy(
    agent: AgentModel,
    option: ProductionOption,
    init: Tuple[int, int],
) -> LocalGoalPolicy:
    """Stationary policy following a cyclic quota.

    The position inside the cycle is the number of parts produced since the
    initial state, modulo the cycle length; failures retry the same type
    because the count does not advance.
    """
    cycle = option.x_a + option.x_b
    acts = np.zeros((1, agent.n_states), dtype=int)
    for s, label in enumerate(agent.state_labels):
        a_cnt, b_cnt = (int(v) for v in label.split("-"))
        produced = (a_cnt - init[0]) + (b_cnt - init[1])
        pos = produced % cycle
        acts[0, s] = MAKE_A if pos < option.x_a else MAKE_B
    return LocalGoalPolicy(
        label=f"quota_{option.x_a}_{option.x_b}",
        actions=acts,
        stationary=True,
        goal=None,
    )


@dataclass(eq=False)
class ProductionDomain:
    """The two-machine scenario: joint model plus bookkeeping helpers."""

    model: DecMdpCom
    candidates1: List[LocalGoalPolicy]
    candidates2: List[LocalGoalPolicy]
    initial: ProductionState
    caps1: Tuple[int, int]
    caps2: Tuple[int, int]
    p_m1: float
    p_m2: float
    action_cost: float

    @property
    def horizon(self) -> int:
        return self.model.horizon

    def encode1(self, b_a: int, b_b: int) -> int:
        return b_a * (self.caps1[1] + 1) + b_b

    def decode1(self, s: int) -> Tuple[int, int]:
        return divmod(s, self.caps1[1] + 1)

    def encode2(self, c_a: int, c_b: int) -> int:
        return c_a * (self.caps2[1] + 1) + c_b

    def decode2(self, s: int) -> Tuple[int, int]:
        return divmod(s, self.caps2[1] + 1)

    def products(self, s1: int, s2: int) -> int:
        b_a, b_b = self.decode1(s1)
        c_a, c_b = self.decode2(s2)
        return ProductionState(b_a, b_b, c_a, c_b).products()

    @cached_property
    def joint_policy(self) -> "JointPolicy":
        return solve_joint_mmdp(self.model)


def build_production(
    p_m1: float,
    p_m2: float,
    T: int = 10,
    comm_cost: float = -0.1,
    action_cost: float = -1.0,
    options: Sequence[ProductionOption] = DEFAULT_PRODUCTION_OPTIONS,
    initial: Tuple[int, int, int, int] = (0, 0, 0, 8),
) -> ProductionDomain:
    """The two-machine production scenario.

    Each step each machine attempts one part of the type its policy picks,
    succeeding with its own probability; both machines pay the action cost
    every step.  The terminal payoff (matched pairs across machines) enters
    the joint model as a potential, so no boundary term is needed.
    """
    init_state = ProductionState(*initial)
    machine1, caps1 = _machine_model(
        "machine1", p_m1, (init_state.b_a, init_state.b_b), T, action_cost
    )
    machine2, caps2 = _machine_model(
        "machine2", p_m2, (init_state.c_a, init_state.c_b), T, action_cost
    )
    nb1, nb2 = caps1[1] + 1, caps2[1] + 1

    def potential(s1: int, s2: int) -> float:
        b_a, b_b = divmod(s1, nb1)
        c_a, c_b = divmod(s2, nb2)
        return float(min(b_a, c_a) + min(b_b, c_b))

    model = DecMdpCom(
        agent1=machine1,
        agent2=machine2,
        comm_cost=comm_cost,
        horizon=T,
        initial_state=FactoredState(
            init_state.b_a * nb1 + init_state.b_b,
            init_state.c_a * nb2 + init_state.c_b,
            0,
        ),
        goal_predicate=None,
        potential=potential,
        extra_reward=None,
        name="production",
    )
    opts = [ProductionOption(o.x_a, o.x_b) if not isinstance(o, ProductionOption) else o for o in options]
    candidates1 = [
        quota_policy(machine1, o, (init_state.b_a, init_state.b_b)) for o in opts
    ]
    candidates2 = [
        quota_policy(machine2, o, (init_state.c_a, init_state.c_b)) for o in opts
    ]
    return ProductionDomain(
        model=model,
        candidates1=candidates1,
        candidates2=candidates2,
        initial=init_state,
        caps1=caps1,
        caps2=caps2,
        p_m1=p_m1,
        p_m2=p_m2,
        action_cost=action_cost,
    )


@dataclass(eq=False)
class JointPolicy:
    """Optimal fully-synchronized joint policy: actions[t, s1, s2] encodes
    the action pair a1 * n_actions2 + a2; value[s1, s2] is the optimum from
    time zero."""

    actions: np.ndarray
    value: np.ndarray
    n_actions2: int

    def action_pair(self, s1: int, s2: int, t: int) -> Tuple[int, int]:
        code = int(self.actions[t, s1, s2])
        return code // self.n_actions2, code % self.n_actions2


def solve_joint_mmdp(m: DecMdpCom) -> JointPolicy:
    """Backward induction on the flat joint process (free full information).

    The terminal value is the potential (the telescoped state payoff); each
    step adds both action costs and any extra state reward.  Used for the
    full-communication baselines.
    """
    n1, n2 = m.agent1.n_states, m.agent2.n_states
    A1, A2 = m.agent1.n_actions, m.agent2.n_actions
    phi = m.potential_matrix()
    V = phi.copy() if phi is not None else np.zeros((n1, n2))
    acts = np.zeros((m.horizon, n1, n2), dtype=np.int16)
    c1 = m.agent1.action_cost if m.agent1.action_cost is not None else np.zeros(A1)
    c2 = m.agent2.action_cost if m.agent2.action_cost is not None else np.zeros(A2)
    extra = None
    if m.extra_reward is not None:
        extra = np.empty((n1, n2))
        for i in range(n1):
            for j in range(n2):
                extra[i, j] = m.extra_reward(i, j, i, j)
    for t in range(m.horizon - 1, -1, -1):
        best = np.full((n1, n2), -np.inf)
        for a1 in range(A1):
            M1 = m.agent1.transition[:, a1, :]
            for a2 in range(A2):
                M2 = m.agent2.transition[:, a2, :]
                Q = c1[a1] + c2[a2] + M1 @ V @ M2.T
                code = a1 * A2 + a2
                better = Q > best
                acts[t][better] = code
                best = np.maximum(best, Q)
        if extra is not None:
            best = best + extra
        V = best
    return JointPolicy(actions=acts, value=V, n_actions2=A2)


# ---------------------------------------------------------------------------
# meeting scenario


@dataclass(frozen=True)
class GridConfig:
    """Meeting-under-uncertainty grid setup."""

    width: int = 10
    height: int = 10
    p1: float = 0.8
    p2: float = 0.8
    start1: Tuple[int, int] = (0, 0)
    start2: Tuple[int, int] = (9, 9)
    action_cost: float = -1.0
    comm_cost: float = -0.1
    horizon_cap: int = 200

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have positive dimensions")
        for p in (self.p1, self.p2):
            if not (0.0 < p <= 1.0):
                raise ValueError(f"success probability must be in (0, 1], got {p}")
        for start in (self.start1, self.start2):
            x, y = start
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ValueError(f"start {start} outside the grid")
        if self.horizon_cap < 1:
            raise ValueError("horizon cap must be positive")


# action order: north, south, east, west, stay
GRID_DELTAS = ((0, 1), (0, -1), (1, 0), (-1, 0), (0, 0))
GRID_ACTIONS = ("north", "south", "east", "west", "stay")
STAY = 4


def manhattan(a: Tuple[int, int], b: Tuple[int, int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def midpoint(pos1: Tuple[int, int], pos2: Tuple[int, int]) -> Tuple[int, int]:
    """Middle cell of a shortest Manhattan path, x-leg first from pos1.

    The cell sits floor(d/2) from pos1 and ceil(d/2) from pos2, so agent 1
    takes the shorter half on odd separations.
    """
    steps = manhattan(pos1, pos2) // 2
    x, y = pos1
    for _ in range(steps):
        if x != pos2[0]:
            x += 1 if pos2[0] > x else -1
        else:
            y += 1 if pos2[1] > y else -1
    return (x, y)


def step_toward(pos: Tuple[int, int], goal: Tuple[int, int]) -> int:
    """Action moving one cell along a shortest path to goal, x-leg first."""
    x, y = pos
    if x != goal[0]:
        return 2 if goal[0] > x else 3
    if y != goal[1]:
        return 0 if goal[1] > y else 1
    return STAY


def _grid_agent(name: str, cfg: GridConfig, p: float) -> AgentModel:
    w, h = cfg.width, cfg.height
    n = w * h
    trans = np.zeros((n, 5, n))
    labels = []
    for x in range(w):
        for y in range(h):
            s = x * h + y
            labels.append(f"{x}-{y}")
            for a, (dx, dy) in enumerate(GRID_DELTAS):
                tx = min(max(x + dx, 0), w - 1)
                ty = min(max(y + dy, 0), h - 1)
                target = tx * h + ty
                trans[s, a, target] += p
                trans[s, a, s] += 1.0 - p
    return AgentModel(
        n_states=n,
        actions=GRID_ACTIONS,
        transition=trans,
        goal_candidates=(),
        action_cost=np.zeros(5),
        noop=STAY,
        state_labels=tuple(labels),
        name=name,
    )


@dataclass(eq=False)
class MeetingDomain:
    """The grid rendezvous scenario: joint model plus geometry helpers.

    The joint model is expressed in system-step units (one unit per step
    while the agents are apart, zero action costs) so its values line up
    with the analytic meeting-time recursions; episode utility in the
    simulator separately charges each agent the action cost per step.
    """

    model: DecMdpCom
    config: GridConfig

    def encode(self, pos: Tuple[int, int]) -> int:
        return pos[0] * self.config.height + pos[1]

    def decode(self, s: int) -> Tuple[int, int]:
        return divmod(s, self.config.height)

    @property
    def initial_distance(self) -> int:
        return manhattan(self.config.start1, self.config.start2)


def build_meeting(cfg: GridConfig) -> MeetingDomain:
    """Two walkers on a bounded grid; co-location is the global goal.

    A move succeeds with the agent's probability and otherwise leaves it in
    place; moves off the edge are clamped (attempting them wastes the step).
    """
    agent1 = _grid_agent("walker1", cfg, cfg.p1)
    agent2 = _grid_agent("walker2", cfg, cfg.p2)

    def extra(s1: int, s2: int, ns1: int, ns2: int) -> float:
        del ns1, ns2
        return 0.0 if s1 == s2 else -1.0

    model = DecMdpCom(
        agent1=agent1,
        agent2=agent2,
        comm_cost=cfg.comm_cost,
        horizon=cfg.horizon_cap,
        initial_state=FactoredState(
            cfg.start1[0] * cfg.height + cfg.start1[1],
            cfg.start2[0] * cfg.height + cfg.start2[1],
            0,
        ),
        goal_predicate=lambda s1, s2: s1 == s2,
        potential=None,
        extra_reward=extra,
        name="meeting",
    )
    return MeetingDomain(model=model, config=cfg)
