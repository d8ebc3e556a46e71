"""Saturation-throughput model of 802.11 DCF (two-dimensional Markov chain).

Used as an independent oracle for the event-driven simulator: it shares only
the timing constants, never the simulation code path.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .sim import NO_ERRORS, SUCCESS, COLLISION, CellSimulator, MacTiming, Station, exchange_timing


@dataclass
class BianchiPoint:
    n: int
    tau: float
    p: float
    throughput: float
    ts_us: float
    tc_us: float


def tau_given_p(p, w, m):
    """Per-slot transmission probability for collision probability ``p``.

    ``w`` is the number of backoff values in the first stage (CW + 1) and ``m``
    the number of doubling stages. Written as a finite sum so it is smooth
    through p = 1/2.
    """
    series = sum((2.0 * p) ** k for k in range(m))
    return 2.0 / (1.0 + w + p * w * series)


def solve(n, cw, m=0, timing=None, payload_bytes=1472, rts_cts=False):
    """Solve the (tau, p) fixed point for ``n`` saturated stations and return
    the normalized throughput for the given timing."""
    timing = timing or MacTiming()
    w = cw + 1
    if n == 1:
        tau, p = tau_given_p(0.0, w, m), 0.0
    else:
        f = lambda p: p - (1.0 - (1.0 - tau_given_p(p, w, m)) ** (n - 1))
        p = brentq(f, 0.0, 1.0, xtol=1e-15, rtol=1e-14)
        tau = tau_given_p(p, w, m)
    difs = timing.difs_us
    ts = exchange_timing(timing, SUCCESS, payload_bytes, rts_cts)[1] + difs
    tc = exchange_timing(timing, COLLISION, payload_bytes, rts_cts)[1] + difs
    p_tr = 1.0 - (1.0 - tau) ** n
    p_s = n * tau * (1.0 - tau) ** (n - 1) / p_tr
    slot = (1.0 - p_tr) * timing.slot_us + p_tr * p_s * ts + p_tr * (1.0 - p_s) * tc
    thr = p_s * p_tr * timing.payload_airtime_us(payload_bytes) / slot
    return BianchiPoint(n, tau, p, thr, ts, tc)


def simulate_saturated(n, cw, sim_time_s=10.0, seed=0, timing=None, rts_cts=False,
                       cw_policy="fixed", window_us=20_000):
    """Run ``n`` always-backlogged, error-free stations and return the raw
    simulator (for callers that need its counters)."""
    rng = np.random.default_rng(seed)
    stations = [Station(i, 1.0, cw_current=cw, saturated=True) for i in range(n)]
    sim = CellSimulator(stations, timing=timing, rng=rng, error_curve=NO_ERRORS,
                        rts_cts=rts_cts, cw_policy=cw_policy, queue_limit=None)
    n_windows = int(round(sim_time_s * 1e6 / window_us))
    for _ in range(n_windows):
        sim.run_window(window_us)
    return sim


def run_bianchi_validation(n_stations, fixed_cw, sim_time_s=10.0, seed=0, timing=None):
    """Compare simulated and analytic collision probability and throughput.

    Returns a list of dicts with ``metric``, ``simulated``, ``analytic`` and
    ``rel_error`` (``abs(sim - model) / model``, or the absolute gap when the
    model value is 0).
    """
    timing = timing or MacTiming()
    sim = simulate_saturated(n_stations, fixed_cw, sim_time_s, seed, timing)
    attempts = sum(s.attempts for s in sim.stations)
    collided = sum(s.collisions for s in sim.stations)
    elapsed = sim.clock.now
    p_sim = collided / attempts if attempts else 0.0
    thr_sim = sim.successes * timing.payload_airtime_us(sim.payload_bytes) / elapsed
    model = solve(n_stations, fixed_cw, 0, timing, sim.payload_bytes)
    rows = []
    for name, s_val, m_val in (("collision_probability", p_sim, model.p),
                               ("normalized_throughput", thr_sim, model.throughput)):
        err = abs(s_val - m_val) / m_val if m_val else abs(s_val - m_val)
        rows.append({"metric": name, "n": n_stations, "cw": fixed_cw,
                     "simulated": s_val, "analytic": m_val, "rel_error": err})
    return rows


def format_table(rows):
    head = f"{'metric':<24}{'n':>4}{'cw':>6}{'simulated':>12}{'analytic':>12}{'rel_err':>10}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r['metric']:<24}{r['n']:>4}{r['cw']:>6}{r['simulated']:>12.5f}"
                     f"{r['analytic']:>12.5f}{r['rel_error']:>10.4f}")
    return "\n".join(lines)


def airtime_accounting(sim):
    """Medium-busy time per acknowledged frame and the share of elapsed time
    spent in collisions, straight from the simulator counters."""
    acked = sum(s.acked for s in sim.stations)
    elapsed = sim.clock.now
    return {
        "acked_frames": acked,
        "airtime_per_success_us": sim.channel.total_busy_us / acked if acked else float("inf"),
        "collision_time_fraction": sim.channel.collision_us / elapsed if elapsed else 0.0,
    }
