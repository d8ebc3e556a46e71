"""Experiment runner: builds the cell, drives agents window by window, runs
federation rounds, and streams metrics and round logs to CSV."""

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import bianchi
from .config import AGENT_MODES
from .ddpg import DdpgAgent
from .fed import AVERAGE, EXPONENTIAL, NONE, AggregationConfig, ClientReport, run_round
from .metrics import (
    MetricsRecord,
    StateVector,
    compute_idle,
    compute_plr,
    map_action_to_cw,
    throughput_mbps,
    window_reward,
)
from .sim import CellSimulator, ErrorCurve, MacTiming, Station, TrafficSource

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["run_id", "mode", "seed", "window", "station", "plr", "idle", "cw", "action",
                  "reward", "mean_delay_us", "throughput_mbps", "frames_success", "frames_lost"]
ROUND_COLUMNS = ["run_id", "round", "mode", "skipped", "participants", "betas"]
GLOBAL = -1
AGGREGATION_MODE = {"efrl": EXPONENTIAL, "afrl": AVERAGE, "drl": NONE}


class PartialOutputError(IOError):
    """Raised when writing results fails part-way; ``path`` holds what was written."""

    def __init__(self, path, exc):
        super().__init__(f"output to {path} is incomplete: {exc}")
        self.path = path


@dataclass
class RoundRecord:
    index: int
    skipped: bool
    participants: list
    betas: list
    sample_counts: dict
    scores_input: dict


@dataclass
class RunReport:
    run_id: str
    mode: str
    seed: int
    rows_written: int
    wall_time_s: float
    summary: dict
    metrics_path: Path | None = None
    rounds_path: Path | None = None
    records: list = field(default_factory=list)
    rounds: list = field(default_factory=list)

    def global_records(self):
        return [r for r in self.records if r.station_id == GLOBAL]


def _fmt(x, digits=6):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.{digits}f}"


def metrics_row(run_id, mode, seed, rec):
    return [run_id, mode, seed, rec.window_index, rec.station_id, _fmt(rec.plr), _fmt(rec.idle),
            rec.cw, rec.action, _fmt(rec.reward), _fmt(rec.mean_delay_us, 3),
            _fmt(rec.throughput_mbps), rec.frames_success, rec.frames_lost]


def build_stations(cfg, seq):
    """Stations with distances and traffic drawn from dedicated seed streams."""
    layout_seq, traffic_seq = seq.spawn(2)
    n = cfg.n_stations
    if cfg.distances is not None:
        distances = list(cfg.distances)
    else:
        distances = np.random.default_rng(layout_seq).uniform(0.5, 30.0, n).tolist()
    streams = [np.random.default_rng(s) for s in traffic_seq.spawn(n)]
    hi = cfg.random_rate_max_mbps
    rate_range = (cfg.random_rate_min_mbps, 2 * cfg.traffic_rate_mbps if hi is None else hi)
    n_fixed = n if cfg.scenario != "dynamic" else cfg.n_fixed_traffic
    stations = []
    for i in range(n):
        if i < n_fixed:
            src = TrafficSource("constant", cfg.traffic_rate_mbps,
                                payload_bytes=cfg.payload_bytes, rng=streams[i])
        else:
            src = TrafficSource("random", rate_range=rate_range, redraw_period_us=cfg.fl_period_us,
                                payload_bytes=cfg.payload_bytes, rng=streams[i])
        stations.append(Station(i, distances[i], traffic=src))
    return stations


def build_simulator(cfg, seq):
    sim_seq, station_seq = seq.spawn(2)
    stations = build_stations(cfg, station_seq)
    beb = cfg.mode in ("beb", "rtscts")
    start_cw = cfg.fixed_cw if cfg.mode == "fixed" else 15
    for sta in stations:
        sta.cw_current = start_cw
    return CellSimulator(
        stations,
        timing=MacTiming(data_rate_mbps=cfg.data_rate_mbps),
        rng=np.random.default_rng(sim_seq),
        error_curve=ErrorCurve(cfg.perr_min, cfg.perr_max, cfg.perr_gamma),
        rts_cts=cfg.mode == "rtscts",
        cw_policy="beb" if beb else "fixed",
        retry_limit=cfg.retry_limit,
        queue_limit=cfg.queue_limit,
        payload_bytes=cfg.payload_bytes,
        ampdu_max=cfg.ampdu_max,
        max_ppdu_us=cfg.max_ppdu_us,
    )


class _Writers:
    def __init__(self, cfg, write):
        self.metrics_path = self.rounds_path = None
        self._files = []
        self.metrics = self.rounds = None
        if not write:
            return
        out = Path(cfg.out_dir)
        self.metrics_path = out / f"{cfg.run_id}_metrics.csv"
        try:
            out.mkdir(parents=True, exist_ok=True)
            mf = open(self.metrics_path, "w", newline="")
            self._files.append(mf)
            self.metrics = csv.writer(mf, lineterminator="\n")
            self.metrics.writerow(METRIC_COLUMNS)
            if cfg.mode in AGENT_MODES:
                self.rounds_path = out / f"{cfg.run_id}_rounds.csv"
                rf = open(self.rounds_path, "w", newline="")
                self._files.append(rf)
                self.rounds = csv.writer(rf, lineterminator="\n")
                self.rounds.writerow(ROUND_COLUMNS)
        except OSError as exc:
            self.close()
            raise PartialOutputError(out, exc) from exc

    def close(self):
        for f in self._files:
            f.close()


def run_experiment(cfg, write=True, keep_records=True):
    """Run one seeded episode of ``cfg`` and return a :class:`RunReport`."""
    if cfg.scenario == "bianchi-validate":
        return _run_bianchi(cfg, write)
    t0 = time.perf_counter()
    root = np.random.SeedSequence(cfg.seed)
    sim_seq, agent_seq = root.spawn(2)
    sim = build_simulator(cfg, sim_seq)
    n = cfg.n_stations
    learning = cfg.mode in AGENT_MODES
    agents, prev_s, prev_u, actions = [], [None] * n, [None] * n, [-1] * n
    samples = [0] * n
    if learning:
        agents = [DdpgAgent(cfg.ddpg, np.random.default_rng(s)) for s in agent_seq.spawn(n)]
        s0 = (0.0, 1.0)
        for i, agent in enumerate(agents):
            u, a = agent.select_action(s0)
            prev_s[i], prev_u[i], actions[i] = s0, u, a
            sim.set_cw(i, map_action_to_cw(a))
    selection = replace(cfg.selection, top_k=cfg.resolved_top_k())
    aggregation = AggregationConfig(AGGREGATION_MODE.get(cfg.mode, NONE), cfg.lam, cfg.normalize)
    limit_us = cfg.delay_limit_ms * 1000.0
    step = cfg.step_us
    writers = _Writers(cfg, write)
    report = RunReport(cfg.run_id, cfg.mode, cfg.seed, 0, 0.0, {},
                       writers.metrics_path, writers.rounds_path)
    records = []
    try:
        for k in range(cfg.n_windows):
            stats = sim.run_window(step)
            idle = compute_idle(step, stats.busy_us)
            window_rows = []
            all_delays, tx_total, ack_total, succ_total = [], 0, 0, 0
            for i, sw in enumerate(stats.stations):
                plr = compute_plr(sw.n_tx, sw.n_ack)
                reward, empty = window_reward(sw.delays, limit_us)
                sim.stations[i].plr_history.append(plr)
                action_used = actions[i]
                if learning:
                    agent = agents[i]
                    s = StateVector(plr, idle).as_tuple()
                    if not empty:
                        agent.store(prev_s[i], prev_u[i], reward, s)
                        samples[i] += 1
                    agent.train_step()
                    u, a = agent.select_action(s)
                    sim.set_cw(i, map_action_to_cw(a))
                    prev_s[i], prev_u[i], actions[i] = s, u, a
                mean_delay = float(np.mean(sw.delays)) if sw.delays else float("nan")
                window_rows.append(MetricsRecord(
                    k, i, plr, idle, sw.cw, action_used, reward, mean_delay,
                    throughput_mbps(sw.frames_success, cfg.payload_bytes, step),
                    sw.frames_success, sw.n_tx - sw.n_ack))
                all_delays.extend(sw.delays)
                tx_total += sw.n_tx
                ack_total += sw.n_ack
                succ_total += sw.frames_success
            g_reward, _ = window_reward(all_delays, limit_us)
            window_rows.append(MetricsRecord(
                k, GLOBAL, compute_plr(tx_total, ack_total), idle, -1, -1, g_reward,
                float(np.mean(all_delays)) if all_delays else float("nan"),
                throughput_mbps(succ_total, cfg.payload_bytes, step), succ_total, tx_total - ack_total))
            if writers.metrics is not None:
                for rec in window_rows:
                    writers.metrics.writerow(metrics_row(cfg.run_id, cfg.mode, cfg.seed, rec))
            report.rows_written += len(window_rows)
            if keep_records:
                records.extend(window_rows)
            if learning and (k + 1) % cfg.windows_per_round == 0:
                rnd = _federate(cfg, sim, agents, samples, selection, aggregation, (k + 1) // cfg.windows_per_round)
                report.rounds.append(rnd)
                if writers.rounds is not None:
                    writers.rounds.writerow([cfg.run_id, rnd.index, cfg.mode, int(rnd.skipped),
                                             ";".join(map(str, rnd.participants)),
                                             ";".join(f"{b:.6f}" for b in rnd.betas)])
                samples = [0] * n
                for agent in agents:
                    agent.decay_noise()
    except OSError as exc:
        raise PartialOutputError(writers.metrics_path, exc) from exc
    finally:
        writers.close()
    report.records = records
    report.wall_time_s = time.perf_counter() - t0
    report.summary = summarize_records(records, cfg.n_windows, cfg.warmup_frac) if records else {}
    return report


def _federate(cfg, sim, agents, samples, selection, aggregation, index):
    reports = []
    for i, agent in enumerate(agents):
        hist = sim.stations[i].plr_history
        plr10 = float(np.mean(hist)) if hist else 0.0
        reports.append(ClientReport(i, agent.export_weights(), samples[i],
                                    sim.stations[i].distance_m, plr10))
    outcome = run_round(reports, selection, aggregation)
    if not outcome.skipped:
        for sid in outcome.participants:
            agents[sid].import_weights(outcome.global_weights)
    return RoundRecord(index, outcome.skipped, outcome.participants, outcome.betas,
                       {r.station_id: r.sample_count for r in reports},
                       {r.station_id: (r.distance_m, r.plr_mean10) for r in reports})


def _run_bianchi(cfg, write):
    t0 = time.perf_counter()
    rows = bianchi.run_bianchi_validation(cfg.n_stations, cfg.fixed_cw, cfg.sim_time_s, cfg.seed,
                                          MacTiming(data_rate_mbps=cfg.data_rate_mbps))
    path = None
    if write:
        out = Path(cfg.out_dir)
        path = out / f"{cfg.run_id}_bianchi.csv"
        try:
            out.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as f:
                w = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
                w.writeheader()
                w.writerows(rows)
        except OSError as exc:
            raise PartialOutputError(path, exc) from exc
    return RunReport(cfg.run_id, cfg.mode, cfg.seed, len(rows), time.perf_counter() - t0,
                     {"bianchi": rows}, metrics_path=path)


# -- summaries ---------------------------------------------------------------

def summarize_records(records, n_windows=None, warmup_frac=0.25):
    """Post-warmup statistics over the cell-wide rows.

    Mean delay is frame-weighted; percentiles are over per-window means.
    """
    g = [r for r in records if r.station_id == GLOBAL]
    if not g:
        raise ValueError("no completed windows to summarize")
    if n_windows is None:
        n_windows = max(r.window_index for r in g) + 1
    first = int(math.floor(warmup_frac * n_windows))
    kept = [r for r in g if r.window_index >= first] or g
    with_frames = [r for r in kept if r.frames_success > 0 and not math.isnan(r.mean_delay_us)]
    frames = sum(r.frames_success for r in with_frames)
    mean_delay = (sum(r.mean_delay_us * r.frames_success for r in with_frames) / frames
                  if frames else float("nan"))
    per_window = np.array([r.mean_delay_us for r in with_frames])
    return {
        "windows": len(kept),
        "mean_delay_us": mean_delay,
        "mean_throughput_mbps": float(np.mean([r.throughput_mbps for r in kept])),
        "delay_p50_us": float(np.percentile(per_window, 50)) if len(per_window) else float("nan"),
        "delay_p95_us": float(np.percentile(per_window, 95)) if len(per_window) else float("nan"),
        "window_delay_var": float(np.var(per_window)) if len(per_window) else float("nan"),
    }


def read_metrics_csv(path):
    """Load a metrics CSV back into ``(mode, seed, MetricsRecord)`` tuples."""
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            delay = float(row["mean_delay_us"]) if row["mean_delay_us"] else float("nan")
            rec = MetricsRecord(int(row["window"]), int(row["station"]), float(row["plr"]),
                                float(row["idle"]), int(row["cw"]), int(row["action"]),
                                float(row["reward"]), delay, float(row["throughput_mbps"]),
                                int(row["frames_success"]), int(row["frames_lost"]))
            out.append((row["mode"], int(row["seed"]), rec))
    return out


def emit_summary(rows, warmup_frac=0.25, base_mode=None):
    """Per-mode summary of ``(mode, seed, MetricsRecord)`` rows.

    Returns ``(summary_dict, table_text)``. When ``base_mode`` is present the
    ``delay_delta`` column holds ``(base - mode) / base`` of the mean delay.
    """
    by_mode = {}
    for mode, seed, rec in rows:
        by_mode.setdefault(mode, {}).setdefault(seed, []).append(rec)
    summary = {}
    for mode in sorted(by_mode):
        per_seed = [summarize_records(recs, warmup_frac=warmup_frac) for _, recs in sorted(by_mode[mode].items())]
        summary[mode] = {
            "seeds": len(per_seed),
            "mean_delay_us": float(np.mean([s["mean_delay_us"] for s in per_seed])),
            "mean_throughput_mbps": float(np.mean([s["mean_throughput_mbps"] for s in per_seed])),
            "delay_p50_us": float(np.mean([s["delay_p50_us"] for s in per_seed])),
            "delay_p95_us": float(np.mean([s["delay_p95_us"] for s in per_seed])),
        }
    if base_mode is None and summary:
        base_mode = next(iter(summary))
    base = summary.get(base_mode, {}).get("mean_delay_us")
    for mode, s in summary.items():
        s["delay_delta"] = relative_delta(base, s["mean_delay_us"]) if base else float("nan")
    head = f"{'mode':<10}{'seeds':>6}{'delay_ms':>11}{'p50_ms':>10}{'p95_ms':>10}{'thr_mbps':>10}{'vs_' + str(base_mode):>14}"
    lines = [head, "-" * len(head)]
    for mode, s in summary.items():
        lines.append(f"{mode:<10}{s['seeds']:>6}{s['mean_delay_us'] / 1e3:>11.3f}{s['delay_p50_us'] / 1e3:>10.3f}"
                     f"{s['delay_p95_us'] / 1e3:>10.3f}{s['mean_throughput_mbps']:>10.3f}{s['delay_delta']:>+14.2%}")
    return summary, "\n".join(lines)


def relative_delta(base, test):
    return (base - test) / base


def write_summary_json(summary, path):
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
