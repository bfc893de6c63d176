"""Injectable clocks.

Every time-dependent component (pin retention, liveness checks, retrain
scheduling, redelivery timeouts) takes a Clock so tests can drive hours of
behavior in milliseconds with ManualClock.
"""

from __future__ import annotations

import threading
import time as _time


class Clock:
    """Interface: monotonic-ish seconds plus an interruptible sleep."""

    def now(self) -> float:
        raise NotImplementedError

    def sleep(self, seconds: float) -> None:
        raise NotImplementedError


class SystemClock(Clock):
    def now(self) -> float:
        return _time.time()

    def sleep(self, seconds: float) -> None:
        _time.sleep(seconds)


class ManualClock(Clock):
    """Deterministic clock advanced explicitly by tests.

    sleep() blocks until advance() pushes the clock past the caller's
    deadline, so background loops (liveness checker, retrainer) stay
    synchronized with simulated time instead of wall time.
    """

    def __init__(self, start: float = 0.0):
        self._now = start
        self._cond = threading.Condition()
        self._sleepers = 0

    def now(self) -> float:
        with self._cond:
            return self._now

    def sleep(self, seconds: float) -> None:
        with self._cond:
            deadline = self._now + seconds
            self._sleepers += 1
            try:
                while self._now < deadline:
                    self._cond.wait()
            finally:
                self._sleepers -= 1

    def advance(self, seconds: float) -> None:
        with self._cond:
            self._now += seconds
            self._cond.notify_all()

    def set(self, timestamp: float) -> None:
        with self._cond:
            self._now = max(self._now, timestamp)
            self._cond.notify_all()

    @property
    def sleepers(self) -> int:
        with self._cond:
            return self._sleepers

    def wait_for_sleepers(self, count: int, timeout: float = 5.0) -> bool:
        """Block (real time) until `count` threads are parked in sleep()."""
        deadline = _time.monotonic() + timeout
        while _time.monotonic() < deadline:
            with self._cond:
                if self._sleepers >= count:
                    return True
            _time.sleep(0.001)
        return False
