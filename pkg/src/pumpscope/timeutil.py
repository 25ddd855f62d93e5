"""UTC time helpers. All instants are tz-aware UTC; candle times are epoch milliseconds."""

from __future__ import annotations

import re
from datetime import date, datetime, timedelta, timezone

MINUTE_MS = 60_000
HOUR_MS = 60 * MINUTE_MS
DAY_MS = 24 * HOUR_MS

UTC = timezone.utc
_EPOCH = datetime(1970, 1, 1, tzinfo=UTC)
_FRACTION = re.compile(r"(T\d{2}:\d{2}:\d{2})\.(\d+)")


def parse_utc(text: str) -> datetime:
    """Parse an ISO-8601 timestamp carrying an explicit offset; result truncated to seconds.

    Naive timestamps are rejected rather than guessed.
    """
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    # fromisoformat on 3.10 only takes 3 or 6 fractional digits
    text = _FRACTION.sub(lambda m: f"{m.group(1)}.{m.group(2)[:6].ljust(6, '0')}", text)
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return dt.astimezone(UTC).replace(microsecond=0)


def format_utc(dt: datetime) -> str:
    return dt.astimezone(UTC).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_day(text: str) -> date:
    return date.fromisoformat(text.strip())


def to_ms(dt: datetime) -> int:
    return (dt - _EPOCH) // timedelta(milliseconds=1)


def from_ms(ms: int) -> datetime:
    return _EPOCH + timedelta(milliseconds=ms)


def day_ms(d: date) -> int:
    return (d - _EPOCH.date()).days * DAY_MS


def ms_day(ms: int) -> date:
    return _EPOCH.date() + timedelta(days=ms // DAY_MS)


def floor_ms(ms: int, step: int) -> int:
    return ms - ms % step


def utc_day(dt: datetime) -> date:
    return dt.astimezone(UTC).date()
