"""Deterministic discrete-event scheduler.

Events fire in ``(time, seq)`` order, where ``seq`` is the scheduling order,
so simultaneous events always resolve the same way.
"""
from __future__ import annotations

import heapq
from typing import Any, Callable


class SchedulingError(RuntimeError):
    pass


class Event:
    __slots__ = ("time", "seq", "fn", "args", "cancelled")

    def __init__(self, time: int, seq: int, fn: Callable, args: tuple):
        self.time = time
        self.seq = seq
        self.fn = fn
        self.args = args
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class Scheduler:
    def __init__(self) -> None:
        self.now = 0
        self._seq = 0
        self._heap: list[tuple[int, int, Event]] = []
        self.processed = 0

    def __len__(self) -> int:
        return len(self._heap)

    def at(self, time: int, fn: Callable, *args: Any) -> Event:
        if time < self.now:
            raise SchedulingError(f"cannot schedule at {time} before now={self.now}")
        ev = Event(time, self._seq, fn, args)
        self._seq += 1
        heapq.heappush(self._heap, (time, ev.seq, ev))
        return ev

    def after(self, delay: int, fn: Callable, *args: Any) -> Event:
        return self.at(self.now + delay, fn, *args)

    def run(self, until: int) -> None:
        heap = self._heap
        while heap and heap[0][0] <= until:
            ev = heapq.heappop(heap)[2]
            if ev.cancelled:
                continue
            self.now = ev.time
            self.processed += 1
            ev.fn(*ev.args)
        self.now = max(self.now, until)
