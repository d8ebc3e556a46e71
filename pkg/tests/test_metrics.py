import pytest
from hypothesis import given, strategies as st

from fedcw import metrics
from fedcw.metrics import (
    CounterError,
    StateVector,
    compute_idle,
    compute_plr,
    compute_reward,
    discretize_action,
    map_action_to_cw,
    throughput_mbps,
    window_reward,
)


def test_plr_examples():
    assert compute_plr(10, 8) == 0.2
    assert compute_plr(5, 5) == 0.0
    assert compute_plr(0, 0) == 0.0
    with pytest.raises(CounterError):
        compute_plr(3, 4)


def test_idle_examples():
    assert compute_idle(20000, 0) == 1.0
    assert compute_idle(20000, 20000) == 0.0
    assert compute_idle(20000, 5000) == 0.75
    with pytest.raises(CounterError):
        compute_idle(20000, 20001)


def test_action_to_cw():
    assert map_action_to_cw(0) == 15
    assert map_action_to_cw(6) == 1023
    assert map_action_to_cw(2) == 63
    assert [map_action_to_cw(a) for a in range(7)] == [15, 31, 63, 127, 255, 511, 1023]
    for bad in (-1, 7, 2.5):
        with pytest.raises(ValueError):
            map_action_to_cw(bad)


def test_discretize_examples():
    assert discretize_action(0.0) == 0
    assert discretize_action(1.0) == 6
    assert discretize_action(0.25) == 2


def test_discretize_rounding_boundaries():
    # (2k+1)/12 sits exactly between levels k and k+1 and rounds up
    for k in range(6):
        mid = (2 * k + 1) / 12
        assert discretize_action(mid - 1e-9) == k
        assert discretize_action(mid + 1e-9) == k + 1


def test_discretize_clamps_and_counts():
    before = metrics.counters["clamped"]
    assert discretize_action(1.3) == 6
    assert discretize_action(-0.2) == 0
    assert metrics.counters["clamped"] == before + 2


@given(st.floats(0.0, 1.0))
def test_discretize_in_range(u):
    a = discretize_action(u)
    assert 0 <= a <= 6 and abs(a / 6 - u) <= 1 / 12 + 1e-12


def test_reward_examples():
    assert compute_reward(20000, 20000) == 0.0
    assert compute_reward(0) == 1.0
    assert compute_reward(25000) == -0.25


def test_window_reward_flags_empty():
    assert window_reward([]) == (0.0, True)
    r, empty = window_reward([10000, 30000])
    assert r == 0.0 and not empty


def test_state_vector_validated():
    assert StateVector(0.2, 0.75).as_tuple() == (0.2, 0.75)
    with pytest.raises(ValueError):
        StateVector(1.2, 0.5)


def test_throughput():
    assert throughput_mbps(17, 1472, 20000) == pytest.approx(17 * 1472 * 8 / 20000, abs=1e-12)
