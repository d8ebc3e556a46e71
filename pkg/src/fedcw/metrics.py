"""Observation, reward and action mapping for the contention-window MDP."""

import logging
import math
from collections import Counter
from dataclasses import dataclass

log = logging.getLogger(__name__)

DELAY_LIMIT_US = 20_000
STEP_US = 20_000
N_ACTIONS = 7


class CounterError(ValueError):
    """Raised when window counters are mutually inconsistent."""


@dataclass(frozen=True)
class StateVector:
    plr: float
    idle: float

    def __post_init__(self):
        if not (0.0 <= self.plr <= 1.0 and 0.0 <= self.idle <= 1.0):
            raise ValueError(f"state components must lie in [0, 1], got {self}")

    def as_tuple(self):
        return (self.plr, self.idle)


@dataclass
class MetricsRecord:
    window_index: int
    station_id: int  # -1 marks the cell-wide row
    plr: float
    idle: float
    cw: int
    action: int
    reward: float
    mean_delay_us: float
    throughput_mbps: float
    frames_success: int
    frames_lost: int


def compute_plr(n_tx, n_ack):
    """Fraction of this window's transmissions that were not acknowledged."""
    if n_ack > n_tx or n_ack < 0:
        raise CounterError(f"n_ack={n_ack} exceeds n_tx={n_tx}")
    if n_tx == 0:
        return 0.0
    return (n_tx - n_ack) / n_tx


def compute_idle(t_obs_us, t_busy_us):
    if not 0 <= t_busy_us <= t_obs_us:
        raise CounterError(f"busy time {t_busy_us} outside [0, {t_obs_us}]")
    return (t_obs_us - t_busy_us) / t_obs_us


def map_action_to_cw(a):
    if a != int(a) or not 0 <= a < N_ACTIONS:
        raise ValueError(f"action must be an integer in 0..6, got {a!r}")
    return 2 ** (int(a) + 4) - 1


# how many actor outputs had to be clamped into [0, 1]
counters = Counter()


def discretize_action(u):
    """Scale a [0, 1] actor output by 6 and round half away from zero.

    Out-of-range inputs are clamped and counted in ``counters["clamped"]``.
    """
    if not 0.0 <= u <= 1.0:
        counters["clamped"] += 1
        log.warning("actor output %r outside [0, 1], clamping", u)
        u = min(max(u, 0.0), 1.0)
    return int(math.floor(6.0 * u + 0.5))


def compute_reward(mean_delay_us, delay_limit_us=DELAY_LIMIT_US):
    if mean_delay_us < 0:
        raise ValueError("mean delay must be non-negative")
    return (delay_limit_us - mean_delay_us) / delay_limit_us


def window_reward(delays, delay_limit_us=DELAY_LIMIT_US):
    """Reward for one station's window; ``(0.0, True)`` flags an empty window."""
    if not delays:
        return 0.0, True
    return compute_reward(sum(delays) / len(delays), delay_limit_us), False


def throughput_mbps(frames_success, payload_bytes, duration_us):
    return frames_success * payload_bytes * 8 / duration_us
