"""Shared toy models for the test suite.

The chain agent is the smallest interesting local process: two states, a
risky move and a cheap wait.  Toy joint models pair two chain agents with a
per-step bonus for both sitting at state 1, which makes communication
genuinely useful at the right prices.
"""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from commplan.model import AgentModel, DecMdpCom, FactoredState

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def chain_agent(name="chain", p=0.7, cost_go=-1.0, cost_wait=-0.2):
    """Two local states: 'go' moves 0 -> 1 with probability p, 'wait' stays.

    State 1 absorbs under both actions; 'wait' is the designated no-op.
    """
    tr = np.zeros((2, 2, 2))
    tr[0, 0, 1] = p
    tr[0, 0, 0] = 1.0 - p
    tr[0, 1, 0] = 1.0
    tr[1, 0, 1] = 1.0
    tr[1, 1, 1] = 1.0
    return AgentModel(
        n_states=2,
        actions=("go", "wait"),
        transition=tr,
        goal_candidates=(1,),
        action_cost=np.array([cost_go, cost_wait]),
        noop=1,
        name=name,
    )


def blocked_agent(name="blocked"):
    """Both actions keep the agent in place; state 1 is unreachable from 0."""
    tr = np.zeros((2, 2, 2))
    tr[0, 0, 0] = 1.0
    tr[0, 1, 0] = 1.0
    tr[1, 0, 1] = 1.0
    tr[1, 1, 1] = 1.0
    return AgentModel(
        n_states=2,
        actions=("push", "wait"),
        transition=tr,
        goal_candidates=(1,),
        action_cost=np.array([-1.0, 0.0]),
        noop=1,
        name=name,
    )


def toy_model(
    p1=0.7,
    p2=0.5,
    comm_cost=-0.4,
    horizon=3,
    bonus=3.0,
    cost_go=-1.0,
    cost_wait=-0.2,
):
    """Two chain agents; landing both in state 1 pays a per-step bonus."""

    def extra(s1, s2, ns1, ns2):
        return bonus if ns1 == 1 and ns2 == 1 else 0.0

    return DecMdpCom(
        agent1=chain_agent("left", p1, cost_go, cost_wait),
        agent2=chain_agent("right", p2, cost_go, cost_wait),
        comm_cost=comm_cost,
        horizon=horizon,
        initial_state=FactoredState(0, 0),
        extra_reward=extra,
    )


TOY_GRID = [
    dict(p1=0.7, p2=0.5, comm_cost=-0.4, horizon=3, bonus=3.0),
    dict(p1=0.9, p2=0.9, comm_cost=-0.1, horizon=3, bonus=2.0),
    dict(p1=0.5, p2=0.5, comm_cost=-2.0, horizon=3, bonus=5.0),
    dict(p1=0.7, p2=0.3, comm_cost=0.0, horizon=2, bonus=3.0),
    dict(p1=1.0, p2=1.0, comm_cost=-0.4, horizon=2, bonus=1.5),
]


@pytest.fixture(scope="session")
def production_08():
    """One solved production scenario shared across test modules."""
    from commplan.domains import build_production
    from commplan.lgo import lgo_msbpi

    domain = build_production(0.8, 0.8, comm_cost=-0.1)
    mech = lgo_msbpi(domain.model, domain.candidates1, domain.candidates2)
    return domain, mech
