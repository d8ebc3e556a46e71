"""Event queue with a deterministic (timestamp, sequence) dispatch order."""

import heapq
import itertools


class SchedulingError(ValueError):
    pass


class SimClock:
    """Integer-microsecond simulation clock backed by a binary heap.

    Events scheduled for the same instant are dispatched in insertion order.
    """

    def __init__(self):
        self.now = 0
        self._queue = []
        self._seq = itertools.count()

    def schedule(self, at, event):
        if at < self.now:
            raise SchedulingError(f"cannot schedule at {at} us, clock is at {self.now} us")
        heapq.heappush(self._queue, (int(at), next(self._seq), event))

    def peek_time(self):
        return self._queue[0][0] if self._queue else None

    def pop(self):
        at, _, event = heapq.heappop(self._queue)
        self.now = at
        return at, event

    def advance(self, to):
        if to < self.now:
            raise SchedulingError(f"cannot move clock back from {self.now} to {to}")
        self.now = to

    def __len__(self):
        return len(self._queue)


def schedule(clock, at, event):
    clock.schedule(at, event)
