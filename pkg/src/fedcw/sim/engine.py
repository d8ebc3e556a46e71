"""Single-collision-domain CSMA/CA event loop.

Backoff follows the generic-slot convention of the classic two-dimensional
Markov-chain DCF model: a contending station's counter drops by one for every
idle slot, stays frozen while the medium is busy, and takes one further
decrement at the slot boundary where contention resumes after DIFS. A busy
period therefore costs exactly one backoff slot.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .clock import SimClock
from .mac import (
    COLLISION,
    CW_MAX,
    CW_MIN,
    SUCCESS,
    ErrorCurve,
    Frame,
    MacTiming,
    begin_backoff,
    beb_next_cw,
    exchange_timing,
    resolve_transmission,
    Channel,
)


@dataclass
class StationWindow:
    station_id: int
    cw: int
    n_tx: int
    n_ack: int
    delays: list
    frames_success: int


@dataclass
class WindowStats:
    start: int
    end: int
    busy_us: int
    stations: list = field(default_factory=list)

    @property
    def duration_us(self):
        return self.end - self.start


class CellSimulator:
    """One AP, N uplink stations, one shared medium.

    ``cw_policy`` is ``"fixed"`` (CW held until someone calls :meth:`set_cw`,
    the agent-controlled and fixed-CW modes) or ``"beb"`` (double on failure,
    reset to 15 on success or drop). ``retry_limit`` retransmissions are
    allowed before a frame is dropped; ``queue_limit`` caps each station's
    queue (``None`` = unbounded) with tail drop. ``ampdu_max > 1`` lets a
    station that wins the medium send up to that many queued frames in one
    A-MPDU (further bounded by ``max_ppdu_us``), acknowledged per frame.
    """

    def __init__(self, stations, timing=None, rng=None, error_curve=None, rts_cts=False,
                 cw_policy="fixed", retry_limit=7, queue_limit=None, payload_bytes=1472,
                 ampdu_max=1, max_ppdu_us=5484):
        if cw_policy not in ("fixed", "beb"):
            raise ValueError(f"unknown cw_policy {cw_policy!r}")
        self.stations = list(stations)
        if [s.id for s in self.stations] != list(range(len(self.stations))):
            raise ValueError("station ids must be 0..N-1 in order")
        self.timing = timing or MacTiming()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        curve = error_curve or ErrorCurve()
        self.error_probs = {s.id: curve(s.distance_m) for s in self.stations}
        self.rts_cts = rts_cts
        self.cw_policy = cw_policy
        self.retry_limit = retry_limit
        self.queue_limit = queue_limit
        self.payload_bytes = payload_bytes
        self.max_frames = self.timing.max_frames_per_ppdu(payload_bytes, ampdu_max, max_ppdu_us)
        self.clock = SimClock()
        self.channel = Channel()
        self.free_at = 0
        self.window_start = 0
        self.successes = 0
        self.success_busy_us = 0
        self._token = 0
        self._frame_ids = itertools.count()
        self.trace = None
        for sta in self.stations:
            if sta.saturated:
                self._enqueue(sta, 0)
                begin_backoff(sta, self.rng)
                self._join(sta, 0)
        self._reschedule()

    # -- helpers -----------------------------------------------------------

    def _origin(self):
        return self.free_at + self.timing.difs_us

    def _tx_at(self, sta):
        return sta.ready_at + (sta.backoff_slots - sta.frozen) * self.timing.slot_us

    def _join(self, sta, now):
        origin = self._origin()
        slot = self.timing.slot_us
        if now <= origin:
            sta.ready_at = origin
        else:
            sta.ready_at = origin + math.ceil((now - origin) / slot) * slot
        sta.frozen = False
        sta.contending = True

    def _reschedule(self):
        times = [self._tx_at(s) for s in self.stations if s.contending]
        if not times:
            return
        self._token += 1
        self.clock.schedule(min(times), ("contend", self._token))

    def _enqueue(self, sta, t):
        if self.queue_limit is not None and len(sta.queue) >= self.queue_limit:
            sta.overflowed += 1
            return False
        sta.queue.append(Frame(next(self._frame_ids), sta.id, t, self.payload_bytes))
        sta.enqueued += 1
        return True

    def _sync(self, sta, now):
        """Fold idle slots elapsed before ``now`` into the stored counter."""
        if not sta.contending or now <= sta.ready_at:
            return
        slot = self.timing.slot_us
        elapsed = (now - sta.ready_at) // slot
        sta.backoff_slots -= sta.frozen + elapsed
        sta.ready_at += elapsed * slot
        sta.frozen = False

    # -- public API --------------------------------------------------------

    def set_cw(self, station_id, cw):
        sta = self.stations[station_id]
        if not CW_MIN <= cw <= CW_MAX:
            raise ValueError(f"cw {cw} outside [{CW_MIN}, {CW_MAX}]")
        sta.cw_current = cw
        if sta.backoff_slots > cw:
            self._sync(sta, self.clock.now)
            if sta.backoff_slots > cw:
                sta.backoff_slots = cw
                if sta.contending:
                    self._reschedule()

    def schedule_arrivals(self, station_id, times):
        for t in times:
            self.clock.schedule(t, ("arrival", station_id))

    def run_until(self, t_end):
        """Dispatch every event strictly before ``t_end``."""
        clock = self.clock
        while clock._queue and clock._queue[0][0] < t_end:
            t, ev = clock.pop()
            kind = ev[0]
            if kind == "arrival":
                self._on_arrival(t, ev[1])
            elif kind == "contend":
                if ev[1] == self._token:
                    self._on_contend(t)
            elif kind == "end":
                self._on_end(t, ev[1], ev[2])
        clock.advance(max(clock.now, t_end))

    def run_window(self, duration_us):
        """Generate this window's arrivals, run it, and return its counters."""
        start = self.window_start
        end = start + duration_us
        for sta in self.stations:
            if sta.traffic is not None and not sta.saturated:
                self.schedule_arrivals(sta.id, sta.traffic.arrivals(duration_us))
        self.run_until(end)
        busy = self.channel.close_window(start, end)
        rows = []
        for sta in self.stations:
            rows.append(StationWindow(sta.id, sta.cw_current, sta.tx_count_window,
                                      sta.ack_count_window, sta.delays_window, sta.success_window))
            sta.reset_window()
        self.window_start = end
        return WindowStats(start, end, busy, rows)

    # -- event handlers ----------------------------------------------------

    def _on_arrival(self, t, sid):
        sta = self.stations[sid]
        was_empty = not sta.queue
        if self._enqueue(sta, t) and was_empty:
            begin_backoff(sta, self.rng)
            self._join(sta, t)
            self._reschedule()

    def _on_contend(self, t):
        slot = self.timing.slot_us
        txs = [s for s in self.stations if s.contending and self._tx_at(s) == t]
        ids = [s.id for s in txs]
        n_frames = {s.id: min(len(s.queue), self.max_frames) for s in txs}
        outcomes = resolve_transmission(ids, self.error_probs, self.rng, n_frames)
        kind = COLLISION if len(ids) > 1 else outcomes[ids[0]].kind
        busy, occupied = exchange_timing(self.timing, kind, self.payload_bytes, self.rts_cts,
                                         max(n_frames.values()))
        self.channel.record_busy(t, t + busy)
        self.channel.active_transmitters = set(ids)
        self.channel.total_busy_us += busy
        if kind == COLLISION:
            self.channel.collision_us += busy
        elif kind == SUCCESS:
            self.success_busy_us += busy
        for sta in txs:
            out = outcomes[sta.id]
            k = len(out.acked)
            sta.contending = False
            sta.tx_count_window += k
            sta.ack_count_window += out.n_acked
            sta.attempts += 1
            sta.frames_sent += k
            for i in range(k):
                if sta.queue[i].first_tx_time is None:
                    sta.queue[i].first_tx_time = t
            if out.kind == COLLISION:
                sta.collisions += 1
        self.free_at = t + occupied
        origin = self._origin()
        for sta in self.stations:
            if sta.contending:
                sta.backoff_slots -= sta.frozen + (t - sta.ready_at) // slot
                sta.ready_at = origin
                sta.frozen = True
        if self.trace is not None:
            self.trace.append((t, tuple(ids), kind))
        self.clock.schedule(t + occupied, ("end", tuple(ids), outcomes))

    def _on_end(self, t, ids, outcomes):
        self.channel.active_transmitters = set()
        for sid in ids:
            sta = self.stations[sid]
            out = outcomes[sid]
            retry = []
            dropped = False
            for acked in out.acked:
                frame = sta.queue.popleft()
                if acked:
                    frame.ack_time = t
                    sta.delays_window.append(t - frame.enqueue_time)
                    sta.success_window += 1
                    sta.acked += 1
                    self.successes += 1
                    continue
                frame.retry_count += 1
                if frame.retry_count > self.retry_limit:
                    sta.dropped += 1
                    dropped = True
                else:
                    retry.append(frame)
            sta.queue.extendleft(reversed(retry))
            if self.cw_policy == "beb":
                # a drop resets CW just like a success
                sta.cw_current = beb_next_cw(sta.cw_current, out.kind == SUCCESS or dropped)
            if sta.saturated and not sta.queue:
                self._enqueue(sta, t)
            if sta.queue:
                begin_backoff(sta, self.rng)
                self._join(sta, t)
        self._reschedule()
