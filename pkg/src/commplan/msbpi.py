"""Multi-step backup policy iteration over pairs of policy trees.

Depth-first branch-and-bound search per global state and time: start from all
length-1 tree pairs, expand the live frontiers of promising pairs one level
at a time, and keep the best pair whose every branch ends with an exchange or
runs to the horizon.  Iterating evaluation and improvement sweeps converges
to the best mechanism over unrestricted tree pairs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .model import DecMdpCom, FactoredState, validate
from .options import (
    COMMUNICATE,
    PolicyTree,
    joint_f_value,
    live_frontier,
    live_levels,
)

DEFAULT_NODE_BUDGET = 10**6


class NodeBudgetExceeded(RuntimeError):
    """Raised when a single improvement search creates too many nodes."""

    def __init__(self, budget: int, created: int):
        self.budget = budget
        self.created = created
        super().__init__(
            f"search node budget {budget} exceeded after creating {created} nodes"
        )


@dataclass
class SearchNode:
    """A candidate pair of equal-size policy trees with its estimated value."""

    tree1: PolicyTree
    tree2: PolicyTree
    f: float
    depth: int


@dataclass
class GeneralMechanism:
    """Assignment of a tree pair to every (s1, s2, t) plus its value table."""

    pairs: Dict[Tuple[int, int, int], Tuple[PolicyTree, PolicyTree]]
    value: np.ndarray  # indexed [t, s1, s2]
    iterations: int = 0
    nodes_created: int = 0
    history: List[dict] = field(default_factory=list)

    def pair_at(self, s1: int, s2: int, t: int) -> Tuple[PolicyTree, PolicyTree]:
        return self.pairs[(s1, s2, t)]


def immediate_comm_pairs(m: DecMdpCom) -> Dict[Tuple[int, int, int], Tuple[PolicyTree, PolicyTree]]:
    """Both agents communicate at once in every state at every time."""
    trees1 = [PolicyTree(s, {(s, 0): COMMUNICATE}) for s in range(m.agent1.n_states)]
    trees2 = [PolicyTree(s, {(s, 0): COMMUNICATE}) for s in range(m.agent2.n_states)]
    return {
        (s1, s2, t): (trees1[s1], trees2[s2])
        for t in range(m.horizon)
        for s1 in range(m.agent1.n_states)
        for s2 in range(m.agent2.n_states)
    }


def _evaluate_pairs(pairs, m: DecMdpCom) -> np.ndarray:
    T = m.horizon
    n1, n2 = m.agent1.n_states, m.agent2.n_states
    V = np.zeros((T + 1, n1, n2))
    for t in range(T - 1, -1, -1):
        for s1 in range(n1):
            for s2 in range(n2):
                opt1, opt2 = pairs[(s1, s2, t)]
                V[t, s1, s2] = joint_f_value(
                    opt1, opt2, m, FactoredState(s1, s2), t, V
                )
    return V


def _evaluate_immediate_comm(m: DecMdpCom) -> np.ndarray:
    """Closed-form value of the always-communicate mechanism.

    Each step freezes both agents: the state-based reward of staying put,
    plus one exchange charge except for the exchange landing at the horizon.
    """
    T = m.horizon
    n1, n2 = m.agent1.n_states, m.agent2.n_states
    frozen = np.zeros((n1, n2))
    for s1 in range(n1):
        for s2 in range(n2):
            frozen[s1, s2] = m.step_reward(s1, s2, None, None, s1, s2)
    V = np.zeros((T + 1, n1, n2))
    for t in range(T - 1, -1, -1):
        charge = m.comm_cost if t + 1 < T else 0.0
        V[t] = frozen + charge + V[t + 1]
    return V


def evaluate_policy(delta, m: DecMdpCom) -> np.ndarray:
    """Backward-induction value table of a mechanism, V[T] = 0."""
    pairs = delta.pairs if isinstance(delta, GeneralMechanism) else delta
    return _evaluate_pairs(pairs, m)


def _cap_with_comm(tree: PolicyTree, agent) -> PolicyTree:
    """Overwrite the deepest live level with communication acts.

    Used when the partner tree's branches all communicate by this depth: the
    joint exchange interrupts anything planned deeper, so closing this tree
    at the same level yields a valid option pair.
    """
    d = tree.size - 1
    levels = live_levels(tree, agent)
    updates = {(q, d): COMMUNICATE for q in sorted(levels[d])}
    return tree.with_assignments(updates)


def _frontier_assignments(frontier, n_actions):
    """All maps from frontier states to domain actions or communication."""
    states = sorted(frontier)
    choices = list(range(n_actions)) + [COMMUNICATE]
    for combo in itertools.product(choices, repeat=len(states)):
        yield dict(zip(states, combo))


def improve_state(
    s: FactoredState,
    t: int,
    V: np.ndarray,
    m: DecMdpCom,
    node_budget: int = DEFAULT_NODE_BUDGET,
    max_option_length: Optional[int] = None,
    node_counter: Optional[list] = None,
):
    """Search for a tree pair at (s, t) worth more than V[t, s].

    Returns ((tree1, tree2), value) for the best strictly improving pair of
    valid options found, or None when no improvement exists.  Nodes whose
    estimated value does not beat the incumbent are pruned.  Raises
    NodeBudgetExceeded when the search creates more than node_budget nodes.
    """
    remaining = m.horizon - t
    if remaining <= 0:
        return None
    counter = node_counter if node_counter is not None else [0]
    best = float(V[t, s.s1, s.s2])
    best_pair = None

    def create(tree1: PolicyTree, tree2: PolicyTree) -> SearchNode:
        counter[0] += 1
        if counter[0] > node_budget:
            raise NodeBudgetExceeded(node_budget, counter[0])
        f = joint_f_value(tree1, tree2, m, s, t, V)
        return SearchNode(tree1, tree2, f, tree1.size)

    stack: List[SearchNode] = []
    for a1 in list(range(m.agent1.n_actions)) + [COMMUNICATE]:
        for a2 in list(range(m.agent2.n_actions)) + [COMMUNICATE]:
            node = create(
                PolicyTree(s.s1, {(s.s1, 0): a1}),
                PolicyTree(s.s2, {(s.s2, 0): a2}),
            )
            if node.f > best:
                stack.append(node)

    while stack:
        node = stack.pop()
        if node.f <= best:
            continue
        fr1 = live_frontier(node.tree1, m.agent1)
        fr2 = live_frontier(node.tree2, m.agent2)
        size = node.depth
        if (not fr1 and not fr2) or size == remaining:
            best = node.f
            best_pair = (node.tree1, node.tree2)
            continue
        if bool(fr1) != bool(fr2):
            # one tree communicates on every branch: the exchange interrupts
            # the other tree at this depth, so close it here and go no deeper
            if fr1:
                capped = (_cap_with_comm(node.tree1, m.agent1), node.tree2)
            else:
                capped = (node.tree1, _cap_with_comm(node.tree2, m.agent2))
            cnode = create(*capped)
            if cnode.f > best:
                best = cnode.f
                best_pair = capped
            continue
        new_size = size + 1
        if new_size > remaining:
            continue
        if max_option_length is not None and new_size > max_option_length:
            continue
        children = []
        for asg1 in _frontier_assignments(fr1, m.agent1.n_actions):
            t1 = node.tree1.with_assignments(
                {(q, size): a for q, a in asg1.items()}
            )
            for asg2 in _frontier_assignments(fr2, m.agent2.n_actions):
                t2 = node.tree2.with_assignments(
                    {(q, size): a for q, a in asg2.items()}
                )
                child = create(t1, t2)
                if child.f > best:
                    children.append(child)
        stack.extend(children)

    if best_pair is None:
        return None
    return best_pair, best


def msbpi(
    m: DecMdpCom,
    initial_delta: Optional[GeneralMechanism] = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
    max_option_length: Optional[int] = None,
) -> GeneralMechanism:
    """Policy iteration: evaluate, sweep all (s, t) for improvements against
    the frozen value table, apply the updates, and repeat until no cell
    changes.  The default initial mechanism communicates immediately
    everywhere."""
    problems = [v for v in validate(m) if not v.startswith("warning:")]
    if problems:
        raise ValueError("; ".join(problems))
    T = m.horizon
    n1, n2 = m.agent1.n_states, m.agent2.n_states
    if initial_delta is None:
        pairs = immediate_comm_pairs(m)
        V = _evaluate_immediate_comm(m)
    else:
        pairs = dict(initial_delta.pairs)
        V = evaluate_policy(initial_delta, m)
    iterations = 0
    nodes_total = 0
    history: List[dict] = []
    while True:
        updates = {}
        counter = [0]
        for t in range(T):
            for s1 in range(n1):
                for s2 in range(n2):
                    cell_counter = [0]
                    res = improve_state(
                        FactoredState(s1, s2),
                        t,
                        V,
                        m,
                        node_budget=node_budget,
                        max_option_length=max_option_length,
                        node_counter=cell_counter,
                    )
                    counter[0] += cell_counter[0]
                    if res is not None:
                        updates[(s1, s2, t)] = res[0]
        nodes_total += counter[0]
        if not updates:
            break
        pairs.update(updates)
        V = _evaluate_pairs(pairs, m)
        iterations += 1
        history.append(
            {
                "iteration": iterations,
                "cells_updated": len(updates),
                "nodes_created": counter[0],
                "v_sum": float(V[0].sum()),
                "v_min": float(V[0].min()),
                "v_max": float(V[0].max()),
            }
        )
    return GeneralMechanism(
        pairs=pairs,
        value=V,
        iterations=iterations,
        nodes_created=nodes_total,
        history=history,
    )


def iteration_csv(mech: GeneralMechanism) -> str:
    """Per-iteration convergence diagnostics as CSV text."""
    lines = ["iteration,cells_updated,nodes_created,v_sum,v_min,v_max"]
    for row in mech.history:
        lines.append(
            f"{row['iteration']},{row['cells_updated']},{row['nodes_created']},"
            f"{row['v_sum']!r},{row['v_min']!r},{row['v_max']!r}"
        )
    return "\n".join(lines) + "\n"
