"""Discrete-event engine: ordered event queue, clock and seeded RNG streams."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class TimeOrderError(ValueError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(order=True)
class Event:
    time: float
    sequence_no: int
    target: Any = field(compare=False, default=None)
    payload: Any = field(compare=False, default=None)
    cancelled: bool = field(compare=False, default=False)


class EventHandle:
    __slots__ = ("_event",)

    def __init__(self, event: Event):
        self._event = event

    @property
    def time(self) -> float:
        return self._event.time

    @property
    def cancelled(self) -> bool:
        return self._event.cancelled

    def cancel(self) -> None:
        self._event.cancelled = True


class Simulator:
    """Single-threaded event loop.

    Events with equal time are dispatched in insertion order. ``dispatch`` is
    called as ``dispatch(event)`` for every live event; handlers may schedule
    further events at or after the current clock.
    """

    def __init__(self, dispatch: Callable[[Event], None] | None = None):
        self.now = 0.0
        self.dispatched = 0
        self._queue: list[Event] = []
        self._seq = 0
        self._dispatch = dispatch

    def schedule(self, time: float, target: Any = None, payload: Any = None) -> EventHandle:
        if time < self.now:
            raise TimeOrderError(f"event at t={time!r} is before clock t={self.now!r}")
        ev = Event(time, self._seq, target, payload)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return EventHandle(ev)

    def schedule_in(self, delay: float, target: Any = None, payload: Any = None) -> EventHandle:
        return self.schedule(self.now + delay, target, payload)

    def pending(self) -> int:
        return sum(1 for ev in self._queue if not ev.cancelled)

    def run_until(self, t_end: float) -> float:
        if t_end < self.now:
            raise TimeOrderError(f"t_end={t_end!r} is before clock t={self.now!r}")
        queue = self._queue
        while queue and queue[0].time <= t_end:
            ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self.now = ev.time
            self.dispatched += 1
            if self._dispatch is not None:
                self._dispatch(ev)
        self.now = t_end
        return self.now


def rng_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent generator for ``(seed, stream_id)``; reproducible across platforms."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))
