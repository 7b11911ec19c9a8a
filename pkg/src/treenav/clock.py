"""Injectable time sources.

Latency accounting and history timestamps go through a clock object so
scripted runs produce byte-identical reports. The virtual clock only moves
when told to — typically by a scripted backend's configured delay.
"""

from __future__ import annotations

import time


class SystemClock:
    def time(self) -> float:
        return time.time()

    def monotonic(self) -> float:
        return time.monotonic()


class VirtualClock:
    """Deterministic clock: time advances only via :meth:`advance`."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def time(self) -> float:
        return self._now

    def monotonic(self) -> float:
        return self._now

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("clock cannot run backwards")
        self._now += seconds


SYSTEM_CLOCK = SystemClock()
