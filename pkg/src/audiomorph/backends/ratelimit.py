"""Thread-safe request admission at a fixed maximum rate."""

from __future__ import annotations

import threading
import time

from ..errors import ParameterError


class RateLimiter:
    """Serializes admissions so consecutive grants are at least
    1/per_second apart, regardless of how many threads contend.

    Each caller reserves the next free slot under the lock and then
    sleeps until its slot arrives; sleeps never undershoot, so the
    observed admission rate cannot exceed the configured limit.
    """

    def __init__(self, per_second: float):
        if not per_second > 0:
            raise ParameterError(f"rate limit must be positive, got {per_second}")
        self._interval = 1.0 / per_second
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            slot = max(now, self._next_slot)
            self._next_slot = slot + self._interval
        delay = slot - time.monotonic()
        if delay > 0:
            time.sleep(delay)
