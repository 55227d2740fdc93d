import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minegames.core import (
    MINE,
    RELEASE,
    Action,
    ActionKind,
    GameParams,
    GameState,
    Model,
    Policy,
    StateClass,
    Winner,
    classify,
    frontier_policy,
    is_valid_state,
    iter_states,
    legal_actions,
    step,
    valid_mask,
)
from minegames.errors import IllegalActionError, InvalidStateError


def test_params_defaults_and_validation():
    s = GameParams("strategic", 0.2, 10)
    assert s.a_max == 22 and s.shape == (11, 23)
    assert GameParams("immediate", 0.2, 10).shape == (11, 12)
    with pytest.raises(ValueError, match="p out of range"):
        GameParams("immediate", 1.5, 10)
    with pytest.raises(ValueError, match="p out of range"):
        GameParams("immediate", -0.1, 10)
    with pytest.raises(ValueError):
        GameParams("immediate", 0.3, 1)
    with pytest.raises(ValueError):
        GameParams("immediate", 0.3, 10, a_max=30)
    with pytest.raises(ValueError):
        GameParams("strategic", 0.3, 10, a_max=11)
    assert GameParams("immediate", 0.6, 4).majority


def test_state_space_sizes():
    p = GameParams("immediate", 0.3, 4)
    states = list(iter_states(p))
    assert len(states) == sum(b + 2 for b in range(5))
    assert valid_mask(p).sum() == len(states)
    assert not is_valid_state((3, 1), p)
    s = GameParams("strategic", 0.3, 4)
    assert len(list(iter_states(s))) == 5 * 11


def test_classification():
    p = GameParams("immediate", 0.3, 4)
    assert classify((2, 1), p) is StateClass.WINNING
    assert classify((0, 4), p) is StateClass.FORCED_CAPITULATION
    assert classify((1, 1), p) is StateClass.CHOICE
    with pytest.raises(InvalidStateError):
        classify((3, 1), p)


def test_legal_actions():
    p = GameParams("immediate", 0.3, 4)
    assert legal_actions((0, 0), p) == [MINE]
    assert legal_actions((1, 2), p) == [Action.capitulate(0), Action.capitulate(1), MINE]
    assert legal_actions((0, 4), p) == [Action.capitulate(s) for s in range(4)]
    assert legal_actions((5, 4), p) == []
    s = GameParams("strategic", 0.3, 4, a_max=8)
    assert RELEASE in legal_actions((3, 1), s) and MINE in legal_actions((3, 1), s)
    assert RELEASE not in legal_actions((1, 1), s)
    # releasing stays possible at the truncation depth, mining does not
    assert legal_actions((6, 4), s) == [Action.capitulate(x) for x in range(4)] + [RELEASE]
    assert legal_actions((8, 0), s) == [RELEASE]
    assert legal_actions((8, 3), s) == [RELEASE]


def test_step_payments():
    p = GameParams("immediate", 0.3, 4)
    assert step((1, 1), MINE, Winner.MINER1, p) == ((0, 0), 1, 2, 0)
    assert step((0, 1), MINE, Winner.MINER2, p) == ((0, 2), 1, 0, 0)
    assert step((0, 1), MINE, Winner.MINER1, p) == ((1, 1), 0, 0, 0)
    assert step((1, 3), Action.capitulate(1), None, p) == ((0, 1), 0, 0, 2)
    s = GameParams("strategic", 0.3, 4)
    assert step((5, 2), RELEASE, None, s) == ((2, 0), 1, 3, 0)
    with pytest.raises(IllegalActionError):
        step((0, 2), Action.capitulate(2), None, p)
    with pytest.raises(IllegalActionError):
        step((2, 1), MINE, Winner.MINER1, p)
    with pytest.raises(IllegalActionError):
        step((1, 1), RELEASE, None, p)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["immediate", "strategic"]), st.integers(2, 8), st.data())
def test_step_lands_in_state_space(model, d, data):
    params = GameParams(model, 0.4, d)
    states = [s for s in iter_states(params) if legal_actions(s, params)]
    state = data.draw(st.sampled_from(states))
    action = data.draw(st.sampled_from(legal_actions(state, params)))
    winner = data.draw(st.sampled_from([Winner.MINER1, Winner.MINER2]))
    tr = step(state, action, winner, params)
    assert is_valid_state(tr.next, params)
    assert tr.levels_advanced in (0, 1)
    assert tr.miner1_paid >= 0 and tr.miner2_paid >= 0
    if model == "immediate":
        assert classify(tr.next, params) is not StateClass.WINNING


def test_frontier_policy_shape():
    p = GameParams("immediate", 0.3, 5)
    pol = frontier_policy(p)
    assert pol[(0, 0)] == MINE
    assert pol[(0, 1)] == Action.capitulate(0)
    assert pol[(2, 1)] is None
    assert pol.mining_states() == {GameState(0, 0)}
    assert pol.reachable_states(0.3) == [(0, 0), (0, 1)]
    s = GameParams("strategic", 0.3, 5)
    sp = frontier_policy(s)
    assert sp[(1, 0)] == RELEASE and sp[(0, 1)] == Action.capitulate(0)
    sp.validate(0.3)


def test_policy_immutable_and_hashable():
    p = GameParams("immediate", 0.3, 4)
    a, b = frontier_policy(p), frontier_policy(p)
    assert a == b and hash(a) == hash(b)
    with pytest.raises(ValueError):
        a.kind[0, 0] = 1
    assert a.matches(p) and not a.matches(GameParams("immediate", 0.3, 5))


def test_policy_validate_rejects_illegal_reachable_action():
    p = GameParams("immediate", 0.3, 4)
    kind = np.array(frontier_policy(p).kind)
    kind[1, 0] = ActionKind.RELEASE
    pol = Policy(Model.IMMEDIATE, 4, None, kind, frontier_policy(p).landing)
    with pytest.raises(IllegalActionError):
        pol.validate(0.3)
