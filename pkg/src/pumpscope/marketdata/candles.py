"""Candles, OHLCV series and their CSV representation.

Prices and volumes are kept as :class:`decimal.Decimal` parsed from the
exchange's decimal strings, so storage round-trips are exact.
"""

from __future__ import annotations

import csv
import enum
import io
from bisect import bisect_left
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from ..errors import SchemaError
from ..timeutil import DAY_MS, HOUR_MS, MINUTE_MS

CSV_HEADER = ["open_time_ms", "open", "high", "low", "close", "volume"]


class Granularity(str, enum.Enum):
    MINUTE = "1m"
    HOUR = "1h"
    DAY = "1d"

    @property
    def ms(self) -> int:
        return _GRAN_MS[self]

    def __str__(self) -> str:
        return self.value


_GRAN_MS = {Granularity.MINUTE: MINUTE_MS, Granularity.HOUR: HOUR_MS, Granularity.DAY: DAY_MS}


class InvalidCandle(ValueError):
    pass


class InvalidSeries(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Candle:
    open_time: int
    open: Decimal
    high: Decimal
    low: Decimal
    close: Decimal
    volume: Decimal

    def __post_init__(self):
        o, h, l, c = self.open, self.high, self.low, self.close
        if not all(x.is_finite() for x in (o, h, l, c, self.volume)):
            raise InvalidCandle(f"non-finite field in candle at {self.open_time}")
        if min(o, h, l, c) < 0 or self.volume < 0:
            raise InvalidCandle(f"negative field in candle at {self.open_time}")
        if not (l <= o <= h and l <= c <= h):
            raise InvalidCandle(f"candle at {self.open_time} violates low <= open/close <= high")

    @classmethod
    def from_strings(cls, open_time, o, h, l, c, v) -> "Candle":
        return cls(int(open_time), Decimal(o), Decimal(h), Decimal(l), Decimal(c), Decimal(v))

    def as_row(self) -> list[str]:
        return [str(self.open_time), str(self.open), str(self.high), str(self.low),
                str(self.close), str(self.volume)]


class Gap(NamedTuple):
    """Half-open range ``[start_ms, end_ms)`` of missing bar slots."""

    start_ms: int
    end_ms: int


def split_pair(pair: str) -> tuple[str, str]:
    base, sep, quote = pair.partition("/")
    if not sep or not base or not quote:
        raise ValueError(f"pair {pair!r} is not BASE/QUOTE")
    return base, quote


@dataclass(frozen=True)
class OhlcvSeries:
    exchange: str
    pair: str
    granularity: Granularity
    candles: tuple[Candle, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "granularity", Granularity(self.granularity))
        object.__setattr__(self, "candles", tuple(self.candles))
        step = self.granularity.ms
        cs = self.candles
        object.__setattr__(self, "_times", tuple(c.open_time for c in cs))
        for prev, cur in zip(cs, cs[1:]):
            delta = cur.open_time - prev.open_time
            if delta <= 0:
                raise InvalidSeries(
                    f"{self.key}: open_time not strictly increasing at {cur.open_time}")
            if delta % step:
                raise InvalidSeries(
                    f"{self.key}: spacing {delta} ms at {cur.open_time} is not a multiple of {step}")

    @property
    def key(self) -> tuple[str, str, Granularity]:
        return (self.exchange, self.pair, self.granularity)

    def __len__(self):
        return len(self.candles)

    def __iter__(self):
        return iter(self.candles)

    @property
    def times(self) -> tuple[int, ...]:
        return self._times  # type: ignore[attr-defined]

    def slice(self, start_ms: int | None = None, end_ms: int | None = None) -> "OhlcvSeries":
        """Bars with ``start_ms <= open_time < end_ms``."""
        times = self.times
        lo = 0 if start_ms is None else bisect_left(times, start_ms)
        hi = len(times) if end_ms is None else bisect_left(times, end_ms)
        return OhlcvSeries(self.exchange, self.pair, self.granularity, self.candles[lo:hi])

    def with_candles(self, candles: Sequence[Candle], pair: str | None = None) -> "OhlcvSeries":
        return OhlcvSeries(self.exchange, pair or self.pair, self.granularity, tuple(candles))


def find_gaps(series: OhlcvSeries, start_ms: int, end_ms: int) -> list[Gap]:
    """Missing slots of ``series`` within ``[start_ms, end_ms)``, slots anchored at ``start_ms``."""
    step = series.granularity.ms
    gaps = []
    cursor = start_ms
    for c in series.slice(start_ms, end_ms):
        if c.open_time > cursor:
            gaps.append(Gap(cursor, c.open_time))
        cursor = c.open_time + step
    if cursor < end_ms:
        gaps.append(Gap(cursor, end_ms))
    return gaps


def series_filename(exchange: str, pair: str, granularity: Granularity | str) -> str:
    base, quote = split_pair(pair)
    return f"{exchange}__{base}-{quote}__{Granularity(granularity).value}.csv"


def parse_series_filename(name: str) -> tuple[str, str, Granularity]:
    stem = name[:-4] if name.endswith(".csv") else name
    parts = stem.split("__")
    if len(parts) != 3 or "-" not in parts[1]:
        raise ValueError(f"{name!r} is not exchange__BASE-QUOTE__granularity.csv")
    base, quote = parts[1].split("-", 1)
    return parts[0], f"{base}/{quote}", Granularity(parts[2])


def format_candles_csv(candles: Iterable[Candle]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in candles:
        w.writerow(c.as_row())
    return buf.getvalue()


def read_candles_csv(path: str | Path) -> list[Candle]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise SchemaError(path, f"expected header {','.join(CSV_HEADER)}", row=1)
        for rowno, row in enumerate(reader, start=2):
            if len(row) != 6:
                raise SchemaError(path, f"expected 6 columns, got {len(row)}", row=rowno)
            try:
                out.append(Candle.from_strings(*row))
            except (InvalidOperation, ValueError) as exc:
                col = None
                for name, value in zip(CSV_HEADER, row):
                    try:
                        int(value) if name == "open_time_ms" else Decimal(value)
                    except (InvalidOperation, ValueError):
                        col = name
                        break
                raise SchemaError(path, str(exc) or "invalid value", row=rowno, column=col) from None
    return out


def read_series_csv(path: str | Path, exchange: str | None = None, pair: str | None = None,
                    granularity: Granularity | str | None = None) -> OhlcvSeries:
    """Load a series; key parts default to those encoded in the filename."""
    if exchange is None or pair is None or granularity is None:
        ex, pr, gr = parse_series_filename(Path(path).name)
        exchange = exchange or ex
        pair = pair or pr
        granularity = granularity or gr
    try:
        return OhlcvSeries(exchange, pair, Granularity(granularity), tuple(read_candles_csv(path)))
    except InvalidSeries as exc:
        raise SchemaError(path, str(exc)) from None


def write_series_csv(path: str | Path, series: OhlcvSeries) -> None:
    Path(path).write_text(format_candles_csv(series.candles), encoding="utf-8")
