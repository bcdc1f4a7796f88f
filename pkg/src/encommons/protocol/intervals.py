"""encommons.protocol.intervals

Interval arithmetic for the rolling identifier schedule.

API:
- interval_from_timestamp(): unix seconds -> interval number (900 s windows)
- day_start_of(): floor an interval to its day start (multiple of 96)
- is_day_aligned(): check day alignment
- day_starts_between(): inclusive list of day starts
"""

from __future__ import annotations

INTERVAL_SECONDS = 900
INTERVALS_PER_DAY = 96


class IntervalError(ValueError):
    """Base error for interval issues."""


class UnalignedDayError(IntervalError):
    def __init__(self, value: int) -> None:
        super().__init__(f"unaligned day start: {value} is not a multiple of {INTERVALS_PER_DAY}")


def interval_from_timestamp(unix_seconds: int) -> int:
    """Return the interval number ``floor(unix_seconds / 900)``."""

    if unix_seconds < 0:
        raise IntervalError(f"unix_seconds must be non-negative, got {unix_seconds}")
    return int(unix_seconds) // INTERVAL_SECONDS


def is_day_aligned(interval: int) -> bool:
    return interval >= 0 and interval % INTERVALS_PER_DAY == 0


def require_day_aligned(interval: int) -> int:
    if not is_day_aligned(interval):
        raise UnalignedDayError(interval)
    return interval


def day_start_of(interval: int) -> int:
    """Floor ``interval`` to the start of its day."""

    if interval < 0:
        raise IntervalError(f"interval must be non-negative, got {interval}")
    return interval - interval % INTERVALS_PER_DAY


def day_index(interval: int) -> int:
    return interval // INTERVALS_PER_DAY


def day_starts_between(first: int, last: int) -> list[int]:
    """Day starts from ``first`` to ``last`` inclusive; both must be aligned."""

    require_day_aligned(first)
    require_day_aligned(last)
    if first > last:
        raise IntervalError(f"first day start {first} is after last {last}")
    return list(range(first, last + 1, INTERVALS_PER_DAY))
