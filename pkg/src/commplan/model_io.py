"""Text format for joint models.

Line oriented, whitespace separated, `#` starts a comment.  Global keys come
first, then one block per agent, then optional joint goal pairs:

    model example
    horizon 4
    comm_cost -1.0
    initial s0 s0

    agent 1 left
      states s0 s1
      actions move stay
      noop stay
      goals s1
      cost move -1
      cost stay 0
      trans s0 move : s0 0.5 s1 0.5
      trans s0 stay : s0 1.0
      trans s1 move : s1 1.0
      trans s1 stay : s1 1.0

    agent 2 right
      ...

    goal_pairs (s1,s1)

States and actions are referenced by label.  Transition rows not listed
default to staying in place with probability 1.  Serialization is canonical
(sorted, fixed formatting), so parse -> serialize -> parse is an identity.
"""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from .model import AgentModel, DecMdpCom, FactoredState


class ModelFormatError(ValueError):
    pass


def _tokenize(text: str) -> list:
    lines = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((ln, line.split()))
    return lines


def _parse_agent_block(lines, i, expected_index):
    ln, toks = lines[i]
    if toks[0] != "agent" or int(toks[1]) != expected_index:
        raise ModelFormatError(f"line {ln}: expected 'agent {expected_index}'")
    name = toks[2] if len(toks) > 2 else f"agent{expected_index}"
    i += 1
    states: list = []
    actions: list = []
    noop: Optional[str] = None
    goals: list = []
    costs: dict = {}
    trans_rows: list = []
    while i < len(lines):
        ln, toks = lines[i]
        key = toks[0]
        if key in ("agent", "goal_pairs"):
            break
        if key == "states":
            states = toks[1:]
        elif key == "actions":
            actions = toks[1:]
        elif key == "noop":
            noop = toks[1]
        elif key == "goals":
            goals = toks[1:]
        elif key == "cost":
            costs[toks[1]] = float(toks[2])
        elif key == "trans":
            if ":" not in toks:
                raise ModelFormatError(f"line {ln}: trans row missing ':'")
            sep = toks.index(":")
            if sep != 3:
                raise ModelFormatError(f"line {ln}: trans expects 'trans STATE ACTION :'")
            pairs = toks[sep + 1 :]
            if len(pairs) % 2 != 0:
                raise ModelFormatError(f"line {ln}: trans row has dangling token")
            row = [(pairs[j], float(pairs[j + 1])) for j in range(0, len(pairs), 2)]
            trans_rows.append((ln, toks[1], toks[2], row))
        else:
            raise ModelFormatError(f"line {ln}: unknown key '{key}' in agent block")
        i += 1
    if not states or not actions:
        raise ModelFormatError(f"agent {expected_index}: states and actions are required")
    sidx = {s: k for k, s in enumerate(states)}
    aidx = {a: k for k, a in enumerate(actions)}
    n, na = len(states), len(actions)
    transition = np.zeros((n, na, n))
    listed = set()
    for ln, s_lbl, a_lbl, row in trans_rows:
        if s_lbl not in sidx:
            raise ModelFormatError(f"line {ln}: unknown state '{s_lbl}'")
        if a_lbl not in aidx:
            raise ModelFormatError(f"line {ln}: unknown action '{a_lbl}'")
        for t_lbl, p in row:
            if t_lbl not in sidx:
                raise ModelFormatError(f"line {ln}: unknown successor '{t_lbl}'")
            transition[sidx[s_lbl], aidx[a_lbl], sidx[t_lbl]] += p
        listed.add((sidx[s_lbl], aidx[a_lbl]))
    for s in range(n):
        for a in range(na):
            if (s, a) not in listed:
                transition[s, a, s] = 1.0  # unlisted rows stay in place
            elif abs(transition[s, a].sum() - 1.0) > 1e-9:
                raise ModelFormatError(
                    f"agent {expected_index}: trans {states[s]} {actions[a]}"
                    f" sums to {float(transition[s, a].sum())!r}, expected 1"
                )
    action_cost = np.zeros(na)
    for a_lbl, c in costs.items():
        if a_lbl not in aidx:
            raise ModelFormatError(f"agent {expected_index}: cost for unknown action '{a_lbl}'")
        action_cost[aidx[a_lbl]] = c
    for g in goals:
        if g not in sidx:
            raise ModelFormatError(f"agent {expected_index}: goal for unknown state '{g}'")
    agent = AgentModel(
        n_states=n,
        actions=tuple(actions),
        transition=transition,
        goal_candidates=tuple(sidx[g] for g in goals),
        action_cost=action_cost,
        noop=aidx[noop] if noop is not None else None,
        state_labels=tuple(states),
        name=name,
    )
    return agent, i


def parse_model(text: str) -> DecMdpCom:
    lines = _tokenize(text)
    name = "model"
    horizon = None
    comm_cost = None
    initial = None
    i = 0
    while i < len(lines):
        ln, toks = lines[i]
        key = toks[0]
        if key == "model":
            name = toks[1]
        elif key == "horizon":
            horizon = int(toks[1])
        elif key == "comm_cost":
            comm_cost = float(toks[1])
        elif key == "initial":
            initial = (toks[1], toks[2])
        elif key == "agent":
            break
        else:
            raise ModelFormatError(f"line {ln}: unknown key '{key}' in header")
        i += 1
    if horizon is None or comm_cost is None or initial is None:
        raise ModelFormatError("header must define horizon, comm_cost and initial")
    agent1, i = _parse_agent_block(lines, i, 1)
    agent2, i = _parse_agent_block(lines, i, 2)
    goal_pairs = set()
    if i < len(lines):
        ln, toks = lines[i]
        if toks[0] != "goal_pairs":
            raise ModelFormatError(f"line {ln}: expected 'goal_pairs', got '{toks[0]}'")
        for tok in toks[1:]:
            pair = tok.strip("()")
            l1, l2 = pair.split(",")
            try:
                g1 = agent1.state_labels.index(l1)
                g2 = agent2.state_labels.index(l2)
            except ValueError as exc:
                raise ModelFormatError(f"line {ln}: unknown goal pair '{tok}'") from exc
            goal_pairs.add((g1, g2))
        i += 1
    if i < len(lines):
        ln, _ = lines[i]
        raise ModelFormatError(f"line {ln}: trailing content after goal_pairs")

    def lookup(agent: AgentModel, label: str) -> int:
        try:
            return agent.state_labels.index(label)
        except ValueError as exc:
            raise ModelFormatError(f"initial state '{label}' unknown for {agent.name}") from exc

    s0 = FactoredState(lookup(agent1, initial[0]), lookup(agent2, initial[1]))
    goal_predicate = None
    if goal_pairs:
        frozen = frozenset(goal_pairs)
        goal_predicate = lambda s1, s2: (s1, s2) in frozen  # noqa: E731
    return DecMdpCom(
        agent1=agent1,
        agent2=agent2,
        comm_cost=comm_cost,
        horizon=horizon,
        initial_state=s0,
        goal_predicate=goal_predicate,
        name=name,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_model(m: DecMdpCom) -> str:
    """Canonical text form of a joint model, stable under reparsing."""
    out = [f"model {m.name}", f"horizon {m.horizon}", f"comm_cost {_fmt(m.comm_cost)}"]
    a1, a2 = m.agent1, m.agent2
    lbl1 = a1.state_labels or tuple(str(i) for i in range(a1.n_states))
    lbl2 = a2.state_labels or tuple(str(i) for i in range(a2.n_states))
    out.append(f"initial {lbl1[m.initial_state.s1]} {lbl2[m.initial_state.s2]}")
    for idx, agent, labels in ((1, a1, lbl1), (2, a2, lbl2)):
        out.append("")
        out.append(f"agent {idx} {agent.name}")
        out.append("  states " + " ".join(labels))
        out.append("  actions " + " ".join(str(a) for a in agent.actions))
        if agent.noop is not None:
            out.append(f"  noop {agent.actions[agent.noop]}")
        if agent.goal_candidates:
            out.append("  goals " + " ".join(labels[g] for g in agent.goal_candidates))
        if agent.action_cost is not None:
            for a in range(agent.n_actions):
                out.append(f"  cost {agent.actions[a]} {_fmt(agent.action_cost[a])}")
        for s in range(agent.n_states):
            for a in range(agent.n_actions):
                row = agent.transition[s, a]
                nz = np.nonzero(row > 0.0)[0]
                if len(nz) == 1 and nz[0] == s and abs(row[s] - 1.0) <= 1e-15:
                    continue  # the implicit stay-in-place default
                cells = " ".join(f"{labels[t]} {_fmt(row[t])}" for t in nz)
                out.append(f"  trans {labels[s]} {agent.actions[a]} : {cells}")
    pairs = []
    if m.goal_predicate is not None:
        for i in range(a1.n_states):
            for j in range(a2.n_states):
                if m.is_goal(i, j):
                    pairs.append(f"({lbl1[i]},{lbl2[j]})")
    if pairs:
        out.append("")
        out.append("goal_pairs " + " ".join(pairs))
    return "\n".join(out) + "\n"


def models_equal(m1: DecMdpCom, m2: DecMdpCom) -> bool:
    """Structural equality of everything the text format represents."""
    def labels(a: AgentModel):
        return a.state_labels or tuple(str(i) for i in range(a.n_states))

    def agents_equal(x: AgentModel, y: AgentModel) -> bool:
        return (
            x.n_states == y.n_states
            and x.actions == y.actions
            and np.array_equal(x.transition, y.transition)
            and x.goal_candidates == y.goal_candidates
            and np.array_equal(
                x.action_cost if x.action_cost is not None else np.zeros(x.n_actions),
                y.action_cost if y.action_cost is not None else np.zeros(y.n_actions),
            )
            and x.noop == y.noop
            and labels(x) == labels(y)
            and x.name == y.name
        )

    if not (
        agents_equal(m1.agent1, m2.agent1)
        and agents_equal(m1.agent2, m2.agent2)
        and m1.comm_cost == m2.comm_cost
        and m1.horizon == m2.horizon
        and m1.initial_state[:2] == m2.initial_state[:2]
        and m1.name == m2.name
    ):
        return False
    for i in range(m1.agent1.n_states):
        for j in range(m1.agent2.n_states):
            if m1.is_goal(i, j) != m2.is_goal(i, j):
                return False
    return True
