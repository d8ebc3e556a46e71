"""MAC-layer world state: timing constants, frames, stations, the shared medium
and traffic sources, plus the small pure functions the event loop is built on."""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

CW_MIN = 15
CW_MAX = 1023
CW_LEVELS = (15, 31, 63, 127, 255, 511, 1023)
DEFAULT_PAYLOAD = 1472
DISTANCE_RANGE = (0.5, 30.0)

SUCCESS = "success"
COLLISION = "collision"
ERROR = "error"


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class MacTiming:
    """5 GHz OFDM timing with a fixed effective PHY rate (all values in us)."""

    slot_us: int = 9
    sifs_us: int = 16
    difs_us: int = 34
    ack_duration_us: int = 32
    rts_duration_us: int = 36
    cts_duration_us: int = 32
    data_rate_mbps: float = 120.0
    ack_timeout_us: int = 57
    cts_timeout_us: int = 57
    phy_preamble_us: int = 20
    mac_overhead_bytes: int = 36

    def __post_init__(self):
        if self.difs_us != self.sifs_us + 2 * self.slot_us:
            raise ConfigurationError("DIFS must equal SIFS + 2 slots")
        durations = (self.slot_us, self.sifs_us, self.ack_duration_us, self.rts_duration_us,
                     self.cts_duration_us, self.ack_timeout_us, self.cts_timeout_us)
        if min(durations) <= 0 or self.data_rate_mbps <= 0:
            raise ConfigurationError("all MAC durations and the data rate must be positive")

    def data_duration_us(self, payload_bytes=DEFAULT_PAYLOAD, n_frames=1):
        """PPDU airtime for ``n_frames`` MPDUs (one PHY preamble)."""
        bits = n_frames * (payload_bytes + self.mac_overhead_bytes) * 8
        return self.phy_preamble_us + math.ceil(bits / self.data_rate_mbps)

    def max_frames_per_ppdu(self, payload_bytes, ampdu_max, max_ppdu_us):
        per_frame = (payload_bytes + self.mac_overhead_bytes) * 8 / self.data_rate_mbps
        fit = int((max_ppdu_us - self.phy_preamble_us) // per_frame)
        return max(1, min(ampdu_max, fit))

    def payload_airtime_us(self, payload_bytes=DEFAULT_PAYLOAD):
        """Time the payload bits alone occupy at the PHY rate (not rounded)."""
        return payload_bytes * 8 / self.data_rate_mbps


def exchange_timing(timing, outcome, payload_bytes=DEFAULT_PAYLOAD, rts_cts=False, n_frames=1):
    """Return ``(busy_us, occupied_us)`` for one channel access.

    ``busy_us`` is how long energy is on the medium from the access start;
    ``occupied_us`` is when contention may resume (DIFS still follows).
    With ``n_frames > 1`` the data PPDU is an A-MPDU answered by a block ACK
    of the same duration as a normal ACK.
    """
    d = timing.data_duration_us(payload_bytes, n_frames)
    s, a = timing.sifs_us, timing.ack_duration_us
    if not rts_cts:
        if outcome == SUCCESS:
            busy = d + s + a
            return busy, busy
        return d, d + timing.ack_timeout_us
    r, c = timing.rts_duration_us, timing.cts_duration_us
    if outcome == SUCCESS:
        busy = r + s + c + s + d + s + a
        return busy, busy
    if outcome == COLLISION:
        return r, r + timing.cts_timeout_us
    busy = r + s + c + s + d
    return busy, busy + timing.ack_timeout_us


@dataclass(frozen=True)
class ErrorCurve:
    """Distance-dependent frame error probability
    ``p_min + (p_max - p_min) * ((d - 0.5) / 29.5) ** gamma``."""

    p_min: float = 0.01
    p_max: float = 0.15
    gamma: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.p_min <= self.p_max <= 1.0:
            raise ConfigurationError("need 0 <= p_min <= p_max <= 1")
        if self.gamma <= 0:
            raise ConfigurationError("gamma must be positive")

    def __call__(self, distance_m):
        lo, hi = DISTANCE_RANGE
        if not lo <= distance_m <= hi:
            raise ConfigurationError(f"distance {distance_m} m outside [{lo}, {hi}]")
        frac = (distance_m - lo) / (hi - lo)
        return self.p_min + (self.p_max - self.p_min) * frac ** self.gamma


NO_ERRORS = ErrorCurve(0.0, 0.0)


def p_err(distance_m, curve=ErrorCurve()):
    return curve(distance_m)


@dataclass
class Frame:
    id: int
    src: int
    enqueue_time: int
    payload_bytes: int = DEFAULT_PAYLOAD
    first_tx_time: int | None = None
    ack_time: int | None = None
    retry_count: int = 0


class TrafficSource:
    """UDP-like arrival process with equally spaced frames at the current rate.

    Arrivals are placed where the cumulative offered volume crosses a multiple
    of the frame size, so rate changes keep the spacing continuous. The
    random-rate kind redraws its rate uniformly from ``rate_range`` at each
    multiple of ``redraw_period_us``.
    """

    def __init__(self, kind="constant", rate_mbps=10.0, rate_range=None,
                 redraw_period_us=2_500_000, payload_bytes=DEFAULT_PAYLOAD, rng=None):
        if kind not in ("constant", "random"):
            raise ConfigurationError(f"unknown traffic kind {kind!r}")
        if kind == "random":
            if rate_range is None or not 0 <= rate_range[0] <= rate_range[1]:
                raise ConfigurationError("random traffic needs a range 0 <= low <= high")
            if redraw_period_us <= 0:
                raise ConfigurationError("redraw period must be positive")
        elif rate_mbps < 0:
            raise ConfigurationError("rate must be non-negative")
        self.kind = kind
        self.rate_range = rate_range
        self.redraw_period_us = int(redraw_period_us)
        self.frame_bits = payload_bytes * 8
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.t = 0
        # arrivals in the current constant-rate segment sit at
        # anchor + (k * frame_bits - anchor_credit) / rate
        self._anchor = 0
        self._anchor_credit = 0.0
        self._k = 0
        self.rate_mbps = rate_mbps if kind == "constant" else self._draw()
        self._next_redraw = self.redraw_period_us if kind == "random" else None

    def _draw(self):
        lo, hi = self.rate_range
        return float(self.rng.uniform(lo, hi))

    def _segment(self, end, out):
        """Emit arrivals in (self.t, end] at the current rate."""
        r = self.rate_mbps
        if r > 0:
            while True:
                nxt = self._anchor + ((self._k + 1) * self.frame_bits - self._anchor_credit) / r
                if nxt > end:
                    break
                self._k += 1
                out.append(math.floor(nxt))
        self.t = end

    def _switch_rate(self, at, new_rate):
        if new_rate == self.rate_mbps:
            return
        credit = self._anchor_credit + self.rate_mbps * (at - self._anchor) - self._k * self.frame_bits
        self._anchor, self._anchor_credit, self._k = at, credit, 0
        self.rate_mbps = new_rate

    def arrivals(self, window_us):
        end = self.t + window_us
        out = []
        while self._next_redraw is not None and self._next_redraw <= end:
            boundary = self._next_redraw
            self._segment(boundary, out)
            self._switch_rate(boundary, self._draw())
            self._next_redraw += self.redraw_period_us
        self._segment(end, out)
        return out


def generate_arrivals(src, window_us):
    return src.arrivals(window_us)


@dataclass
class Station:
    id: int
    distance_m: float
    traffic: TrafficSource | None = None
    cw_current: int = CW_MIN
    saturated: bool = False
    queue: deque = field(default_factory=deque)
    backoff_slots: int = 0
    plr_history: deque = field(default_factory=lambda: deque(maxlen=10))
    # per observation window
    tx_count_window: int = 0
    ack_count_window: int = 0
    delays_window: list = field(default_factory=list)
    success_window: int = 0
    # run totals
    enqueued: int = 0
    acked: int = 0
    dropped: int = 0
    overflowed: int = 0
    attempts: int = 0  # channel accesses (PPDUs)
    frames_sent: int = 0
    collisions: int = 0
    # contention bookkeeping owned by the event loop
    contending: bool = False
    ready_at: int = 0
    frozen: bool = False

    def __post_init__(self):
        lo, hi = DISTANCE_RANGE
        if not lo <= self.distance_m <= hi:
            raise ConfigurationError(f"station {self.id}: distance {self.distance_m} outside [{lo}, {hi}]")

    def reset_window(self):
        self.tx_count_window = 0
        self.ack_count_window = 0
        self.delays_window = []
        self.success_window = 0


@dataclass
class Channel:
    busy_until: int = 0
    active_transmitters: set = field(default_factory=set)
    busy_accumulator: int = 0
    intervals: list = field(default_factory=list)
    collision_us: int = 0
    total_busy_us: int = 0

    def record_busy(self, start, end):
        self.intervals.append((start, end))
        self.busy_until = max(self.busy_until, end)

    def close_window(self, start, end):
        """Set ``busy_accumulator`` to the busy time inside [start, end) and
        drop intervals that cannot reach later windows."""
        self.busy_accumulator = union_length(self.intervals, start, end)
        self.intervals = [iv for iv in self.intervals if iv[1] > end]
        return self.busy_accumulator


def union_length(intervals, start, end):
    """Length of the union of half-open intervals clipped to [start, end)."""
    clipped = sorted((max(a, start), min(b, end)) for a, b in intervals if b > start and a < end)
    total = 0
    cur_a = cur_b = None
    for a, b in clipped:
        if cur_b is None or a > cur_b:
            if cur_b is not None:
                total += cur_b - cur_a
            cur_a, cur_b = a, b
        else:
            cur_b = max(cur_b, b)
    if cur_b is not None:
        total += cur_b - cur_a
    return total


def begin_backoff(sta, rng):
    sta.backoff_slots = int(rng.integers(0, sta.cw_current + 1))
    return sta.backoff_slots


@dataclass(frozen=True)
class TxOutcome:
    kind: str  # SUCCESS, COLLISION or ERROR
    acked: tuple  # one flag per MPDU in the PPDU

    @property
    def n_acked(self):
        return sum(self.acked)


def resolve_transmission(transmitters, error_probs, rng, n_frames=None):
    """Outcome per transmitter.

    Any overlap destroys every frame (no capture). A lone PPDU loses each of
    its MPDUs independently with the station's error probability; it counts
    as a success when at least one MPDU is acknowledged.
    """
    if not transmitters:
        raise ValueError("resolve_transmission needs at least one transmitter")
    n_frames = n_frames or {}
    if len(transmitters) > 1:
        return {sid: TxOutcome(COLLISION, (False,) * n_frames.get(sid, 1)) for sid in transmitters}
    (sid,) = transmitters
    p = error_probs(sid) if callable(error_probs) else error_probs[sid]
    acked = tuple(bool(x) for x in rng.random(n_frames.get(sid, 1)) >= p)
    return {sid: TxOutcome(SUCCESS if any(acked) else ERROR, acked)}


def beb_next_cw(cw, success):
    return CW_MIN if success else min(2 * (cw + 1) - 1, CW_MAX)
