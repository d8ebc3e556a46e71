import pytest

from fedcw.bianchi import airtime_accounting, run_bianchi_validation, simulate_saturated, solve, tau_given_p

import oracles


@pytest.mark.parametrize("point", sorted(oracles.BIANCHI))
def test_solver_matches_closed_form(point):
    n, cw = point
    tau, p, thr = oracles.BIANCHI[point]
    b = solve(n, cw)
    assert b.tau == pytest.approx(tau, rel=1e-12)
    assert b.p == pytest.approx(p, rel=1e-12)
    assert b.throughput == pytest.approx(thr, rel=1e-12)
    assert b.ts_us == oracles.TS_BASIC and b.tc_us == oracles.TC_BASIC


def test_backoff_stages_lower_tau():
    assert tau_given_p(0.3, 32, 5) < tau_given_p(0.3, 32, 0) == 2 / 33


def test_single_station_never_collides():
    assert solve(1, 31).p == 0.0
    sim = simulate_saturated(1, 31, sim_time_s=0.5)
    assert sim.stations[0].collisions == 0 and sim.stations[0].acked > 0


def test_throughput_falls_past_optimum():
    thr = [solve(n, 15).throughput for n in range(2, 40)]
    peak = thr.index(max(thr))
    assert all(a > b for a, b in zip(thr[peak:], thr[peak + 1:]))


def test_simulation_close_to_model_n10_cw31():
    rows = run_bianchi_validation(10, 31, sim_time_s=3.0)
    assert all(r["rel_error"] <= 0.10 for r in rows)


def test_airtime_accounting_counts():
    sim = simulate_saturated(5, 31, sim_time_s=0.5, cw_policy="beb")
    acc = airtime_accounting(sim)
    assert acc["acked_frames"] == sim.successes
    assert 0.0 < acc["collision_time_fraction"] < 1.0
