import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algocollusion.codec import (MemoryState, decode, encode, joint_actions, joint_index, n_states,
                                 next_state, to_features)
from algocollusion.errors import DomainError, ParameterError, WarmupError
from algocollusion.market import build_grid
from algocollusion.matrix_games import (COOPERATE, DEFECT, MatrixGameState, PayoffMatrix, pd_payoff,
                                        pd_payoff_table, step)

PD = PayoffMatrix()


def test_pd_cells():
    assert pd_payoff(PD, COOPERATE, COOPERATE) == (-1, -1)
    assert pd_payoff(PD, DEFECT, COOPERATE) == (0, -3)
    assert pd_payoff(PD, COOPERATE, DEFECT) == (-3, 0)
    assert pd_payoff(PD, DEFECT, DEFECT) == (-2, -2)


def test_pd_step():
    state, rewards = step(PD, MatrixGameState((COOPERATE, COOPERATE)), (DEFECT, DEFECT))
    assert state.last_actions == (DEFECT, DEFECT)
    assert rewards == (-2, -2)


@pytest.mark.parametrize("joint", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_repeated_actions_are_fixed_point(joint):
    state = MatrixGameState(joint)
    for _ in range(3):
        state, _ = step(PD, state, joint)
    assert state.last_actions == joint


def test_baselines():
    assert PD.nash_reward == -2 and PD.pareto_reward == -1


def test_payoff_ordering_enforced():
    with pytest.raises(ParameterError):
        PayoffMatrix(0, -2, -1, -3)


def test_bad_action():
    with pytest.raises(DomainError):
        pd_payoff(PD, 2, 0)


def test_pd_table_uses_joint_index():
    table = pd_payoff_table(PD)
    for a0 in (0, 1):
        for a1 in (0, 1):
            assert tuple(table[joint_index((a0, a1), 2)]) == pd_payoff(PD, a0, a1)


def test_state_space_size():
    assert n_states(15, 2, 1) == 225
    assert 15 * n_states(15, 2, 1) == 3375


def test_zero_history():
    assert encode([(0, 0)], 15) == 0
    assert encode([(0, 0, 0)] * 3, 4) == 0


def test_most_recent_in_lowest_digits():
    # joint (1, 0) most recent, (0, 1) before it, n = 2
    assert encode([(1, 0), (0, 1)], 2) == 1 + 4 * 2


def test_short_history():
    with pytest.raises(WarmupError):
        encode([(0, 0)], 3, memory_len=2)


@given(st.integers(1, 3), st.integers(1, 3), st.integers(2, 4), st.data())
@settings(max_examples=200, deadline=None)
def test_encode_decode_roundtrip(k, length, n, data):
    history = [tuple(data.draw(st.integers(0, n - 1)) for _ in range(k)) for _ in range(length)]
    s = encode(history, n)
    assert 0 <= s < n_states(n, k, length)
    assert decode(s, n, k, length) == history


@pytest.mark.parametrize("n,k,length", [(2, 2, 1), (2, 2, 2), (3, 2, 2), (3, 3, 1)])
def test_bijective(n, k, length):
    size = n_states(n, k, length)
    seen = {encode(decode(s, n, k, length), n) for s in range(size)}
    assert seen == set(range(size))


@given(st.integers(2, 4), st.integers(1, 3), st.data())
@settings(max_examples=100, deadline=None)
def test_next_state_matches_encode(n, length, data):
    k = 2
    history = [tuple(data.draw(st.integers(0, n - 1)) for _ in range(k)) for _ in range(length)]
    joint = tuple(data.draw(st.integers(0, n - 1)) for _ in range(k))
    s = encode(history, n)
    expect = encode([joint] + history[:-1], n, length)
    assert next_state(s, joint_index(joint, n), n ** k, length) == expect


def test_joint_roundtrip():
    for j in range(27):
        assert joint_index(joint_actions(j, 3, 3), 3) == j


GRID = build_grid(1.472927, 1.924981)


def test_feature_endpoints():
    assert np.array_equal(to_features([(0, 0)] * 3, GRID), np.zeros(6))
    assert np.array_equal(to_features([(14, 14)] * 3, GRID), np.ones(6))


@given(st.lists(st.tuples(st.integers(0, 14), st.integers(0, 14)), min_size=1, max_size=10))
def test_features_in_unit_box(history):
    f = to_features(history, GRID)
    assert f.shape == (2 * len(history),)
    assert np.all((f >= 0) & (f <= 1))


def test_memory_state():
    mem = MemoryState(2, 3, memory_len=2)
    mem.push((1, 2))
    assert not mem.ready
    mem.push((0, 1))
    mem.push((2, 2))
    assert mem.ready
    assert mem.encode() == encode([(2, 2), (0, 1)], 3)
    with pytest.raises(DomainError):
        mem.push((1,))
