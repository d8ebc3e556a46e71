"""AP-side federation: participant pruning, aggregation weights and rounds."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .ddpg import LayoutMismatch, WeightSnapshot

log = logging.getLogger(__name__)

EXPONENTIAL, AVERAGE, NONE = "exponential", "average", "none"


@dataclass(frozen=True)
class ClientReport:
    station_id: int
    weights: WeightSnapshot
    sample_count: int
    distance_m: float
    plr_mean10: float

    def __post_init__(self):
        if self.sample_count < 0:
            raise ValueError("sample_count must be non-negative")
        if not 0.0 <= self.plr_mean10 <= 1.0:
            raise ValueError("plr_mean10 must lie in [0, 1]")


@dataclass
class SelectionConfig:
    w1: float = 0.5
    w2: float = 0.5
    d_max: float = 30.0
    min_samples: int = 64
    top_k: int | None = None  # None keeps every station that passes the filter
    pruning: bool = True

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise ValueError("w1 and w2 must be non-negative and sum to 1")
        if self.d_max <= 0:
            raise ValueError("d_max must be positive")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be at least 1")


@dataclass
class AggregationConfig:
    mode: str = EXPONENTIAL
    lam: float = 1.0
    normalize: bool = True

    def __post_init__(self):
        if self.mode not in (EXPONENTIAL, AVERAGE, NONE):
            raise ValueError(f"unknown aggregation mode {self.mode!r}")
        if not math.isfinite(self.lam):
            raise ValueError("lambda must be finite")


@dataclass
class RoundOutcome:
    participants: list
    betas: list
    global_weights: WeightSnapshot | None
    skipped: bool
    distance_flags: list = field(default_factory=list)


def score_station(report, cfg):
    """Composite score ``w1 * (d_max - d) / d_max + w2 * (1 - PLR)``.

    A distance beyond ``d_max`` gets a distance score of 0; the station id is
    logged.
    """
    s_dist = (cfg.d_max - report.distance_m) / cfg.d_max
    if s_dist < 0:
        log.warning("station %d beyond d_max (%.2f m), distance score clamped",
                    report.station_id, report.distance_m)
        s_dist = 0.0
    return cfg.w1 * s_dist + cfg.w2 * (1.0 - report.plr_mean10)


def select_participants(reports, cfg):
    """Sample-count filter, then score-descending order (lower id wins ties),
    truncated to ``top_k``. With pruning off every report is kept, in id order."""
    if not cfg.pruning:
        return sorted(r.station_id for r in reports)
    passing = [r for r in reports if r.sample_count >= cfg.min_samples]
    ranked = sorted(passing, key=lambda r: (-score_station(r, cfg), r.station_id))
    if cfg.top_k is not None:
        ranked = ranked[:cfg.top_k]
    return [r.station_id for r in ranked]


def compute_betas(sample_counts, lam=1.0, normalize=True):
    """``exp(lam * n_i / sum(n))`` per participant, optionally normalized to 1."""
    counts = np.asarray(sample_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("sample counts sum to zero")
    raw = np.exp(lam * counts / total)
    return raw / raw.sum() if normalize else raw


def fedavg_betas(sample_counts):
    counts = np.asarray(sample_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("sample counts sum to zero")
    return counts / total


def aggregate(flats, betas):
    """Elementwise ``sum_i beta_i * flat_i``.

    When the betas sum to one the sum is taken as ``flat_0 + sum_i beta_i *
    (flat_i - flat_0)``, which is the same convex combination but returns
    identical inputs bit for bit.
    """
    if len(flats) != len(betas) or not flats:
        raise ValueError("need one beta per vector and at least one vector")
    n = len(flats[0])
    if any(len(f) != n for f in flats):
        raise LayoutMismatch("flat vectors differ in length")
    if abs(math.fsum(betas) - 1.0) < 1e-9:
        ref = np.asarray(flats[0], dtype=np.float64)
        out = ref.copy()
        for f, b in zip(flats[1:], betas[1:]):
            out += b * (np.asarray(f) - ref)
        return out
    out = np.zeros(n)
    for f, b in zip(flats, betas):
        out += b * np.asarray(f)
    return out


def _aggregate_snapshots(snaps, betas):
    layout = snaps[0].layout_id
    if any(s.layout_id != layout for s in snaps):
        raise LayoutMismatch("participants report different layouts")
    return WeightSnapshot(aggregate([s.actor_flat for s in snaps], betas),
                          aggregate([s.critic_flat for s in snaps], betas), layout)


def run_round(reports, selection, aggregation):
    """One federation round over immutable reports.

    Exponential mode applies the full pruning pipeline; average mode keeps
    every station that passes the sample filter and weights by sample share;
    none mode is a no-op. Only the returned participants should receive
    ``global_weights``.
    """
    if aggregation.mode == NONE:
        return RoundOutcome([], [], None, skipped=True)
    by_id = {r.station_id: r for r in reports}
    if aggregation.mode == EXPONENTIAL:
        ids = select_participants(reports, selection)
    else:
        ids = sorted(r.station_id for r in reports if r.sample_count >= selection.min_samples)
    counts = [by_id[i].sample_count for i in ids]
    if not ids or sum(counts) <= 0:
        log.info("federation round skipped: no eligible participants")
        return RoundOutcome([], [], None, skipped=True)
    if aggregation.mode == EXPONENTIAL:
        betas = compute_betas(counts, aggregation.lam, aggregation.normalize)
    else:
        betas = fedavg_betas(counts)
    merged = _aggregate_snapshots([by_id[i].weights for i in ids], betas)
    return RoundOutcome(ids, [float(b) for b in betas], merged, skipped=False)
