import numpy as np
import pytest
from hypothesis import given, strategies as st

from fedcw.ddpg import LayoutMismatch, WeightSnapshot
from fedcw.fed import (
    AVERAGE,
    EXPONENTIAL,
    NONE,
    AggregationConfig,
    ClientReport,
    SelectionConfig,
    aggregate,
    compute_betas,
    fedavg_betas,
    run_round,
    score_station,
    select_participants,
)

import oracles


def report(sid, samples=100, d=10.0, plr=0.1, vec=None):
    vec = np.full(3, float(sid)) if vec is None else vec
    return ClientReport(sid, WeightSnapshot(vec, vec * 2, "L"), samples, d, plr)


def test_score_examples():
    cfg = SelectionConfig()
    assert score_station(report(0, d=0.0, plr=0.0), cfg) == 1.0
    assert score_station(report(0, d=30.0, plr=1.0), SelectionConfig(w1=0.3, w2=0.7)) == 0.0
    assert score_station(report(0, d=15.0, plr=0.2), cfg) == pytest.approx(oracles.SCORE_D15_PLR02, abs=1e-12)


def test_score_clamps_distance_beyond_dmax(caplog):
    cfg = SelectionConfig(d_max=20.0)
    assert score_station(report(7, d=25.0, plr=0.0), cfg) == 0.5
    assert "station 7" in caplog.text


def test_selection_examples():
    cfg = SelectionConfig(top_k=2)
    assert select_participants([report(i, samples=0) for i in range(3)], cfg) == []
    # w1 = 0 so the score is 1 - PLR: 0.9, 0.5, 0.7
    cfg = SelectionConfig(w1=0.0, w2=1.0, top_k=2)
    reps = [report(0, plr=0.1), report(1, plr=0.5), report(2, plr=0.3)]
    assert select_participants(reps, cfg) == [0, 2]
    tied = [report(i) for i in (4, 1, 3)]
    assert select_participants(tied, SelectionConfig()) == [1, 3, 4]


def test_selection_filter_and_pruning_off():
    reps = [report(0, samples=10), report(1, samples=64), report(2, samples=200)]
    assert select_participants(reps, SelectionConfig()) == [1, 2]
    assert select_participants(reps, SelectionConfig(pruning=False)) == [0, 1, 2]


def test_selection_config_validation():
    with pytest.raises(ValueError):
        SelectionConfig(w1=0.7, w2=0.7)
    with pytest.raises(ValueError):
        SelectionConfig(top_k=0)


def test_beta_examples():
    assert np.allclose(compute_betas([5, 5, 5, 5], 3.0), 0.25, atol=1e-15)
    assert np.allclose(compute_betas([1, 50, 900], 0.0), 1 / 3, atol=1e-15)
    b = compute_betas([3000, 1000], 1.0)
    assert np.allclose(b, oracles.BETAS_3000_1000, atol=1e-12)
    assert np.allclose(b, oracles.BETAS_3000_1000_ROUNDED, atol=5e-5)
    raw = compute_betas([3000, 1000], 1.0, normalize=False)
    assert np.allclose(raw, np.exp([0.75, 0.25]), atol=1e-12)
    with pytest.raises(ValueError):
        compute_betas([0, 0])


@given(st.lists(st.integers(1, 10_000), min_size=1, max_size=20), st.floats(0.0, 5.0))
def test_betas_normalized_and_monotone(counts, lam):
    b = compute_betas(counts, lam)
    assert abs(b.sum() - 1.0) < 1e-12
    order = np.argsort(counts, kind="stable")
    assert np.all(np.diff(b[order]) >= -1e-15)


def test_aggregate_examples():
    v = np.array([0.3, -1.2, 7.0])
    assert np.array_equal(aggregate([v, v, v], compute_betas([1, 2, 3])), v)
    assert np.array_equal(aggregate([v, v + 1], [1.0, 0.0]), v)
    e = aggregate([np.array([1.0, 0.0]), np.array([0.0, 1.0])], oracles.BETAS_3000_1000)
    assert np.allclose(e, oracles.BETAS_3000_1000, atol=1e-15)
    with pytest.raises(LayoutMismatch):
        aggregate([np.zeros(2), np.zeros(3)], [0.5, 0.5])


def test_fedavg_betas():
    assert np.allclose(fedavg_betas([1, 3]), [0.25, 0.75])


def test_round_modes():
    reps = [report(i, samples=100) for i in range(4)]
    sel = SelectionConfig(top_k=2)
    none = run_round(reps, sel, AggregationConfig(NONE))
    assert none.skipped and none.global_weights is None
    exp0 = run_round(reps, SelectionConfig(), AggregationConfig(EXPONENTIAL, lam=0.0))
    avg = run_round(reps, SelectionConfig(), AggregationConfig(AVERAGE))
    assert np.allclose(exp0.global_weights.actor_flat, avg.global_weights.actor_flat, atol=1e-12)
    single = run_round([report(5, vec=np.array([1.0, 2.0]))], sel, AggregationConfig())
    assert np.array_equal(single.global_weights.actor_flat, [1.0, 2.0])
    pruned = run_round(reps, sel, AggregationConfig())
    assert pruned.participants == [0, 1] and len(pruned.betas) == 2


def test_round_skipped_when_nobody_qualifies():
    out = run_round([report(0, samples=3)], SelectionConfig(), AggregationConfig())
    assert out.skipped and out.participants == []


def test_average_mode_only_filters():
    reps = [report(0, samples=10), report(1, samples=100, d=29.0, plr=0.9), report(2, samples=300)]
    out = run_round(reps, SelectionConfig(top_k=1), AggregationConfig(AVERAGE))
    assert out.participants == [1, 2]
    assert np.allclose(out.betas, [0.25, 0.75])


def test_round_rejects_mixed_layouts():
    a = ClientReport(0, WeightSnapshot(np.zeros(2), np.zeros(2), "A"), 100, 1.0, 0.0)
    b = ClientReport(1, WeightSnapshot(np.zeros(2), np.zeros(2), "B"), 100, 1.0, 0.0)
    with pytest.raises(LayoutMismatch):
        run_round([a, b], SelectionConfig(), AggregationConfig())


def test_report_validation():
    with pytest.raises(ValueError):
        report(0, samples=-1)
    with pytest.raises(ValueError):
        report(0, plr=1.5)
