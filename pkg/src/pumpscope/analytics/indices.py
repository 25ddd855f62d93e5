"""Relative (coin), market and market-adjusted price indices over day offsets.

Day offset ``n`` is the UTC calendar day ``pump_day + n``; its value uses
that day's daily close. Offsets are contiguous from 0: a series stops at the
horizon, at the censoring offset, or at the first day without data,
whichever comes first.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from ..errors import PumpscopeError
from ..marketdata.candles import Granularity, OhlcvSeries
from ..timeutil import ms_day, utc_day
from .performance import PrePumpBaseline

DEFAULT_HORIZON = 365


class MarketIndexUnavailable(PumpscopeError):
    pass


class IndexMismatch(PumpscopeError):
    pass


@dataclass(frozen=True)
class IndexSeries:
    kind: str  # "R" coin, "M" market, "I" adjusted
    base_day: date
    values: tuple[float, ...]
    censored_from: int | None = None
    end_reason: str = "horizon"  # "horizon" | "censored" | "data_end"

    def __len__(self):
        return len(self.values)

    def value(self, offset: int) -> float | None:
        return self.values[offset] if 0 <= offset < len(self.values) else None

    @property
    def last_offset(self) -> int | None:
        return len(self.values) - 1 if self.values else None


def _daily_closes(daily: OhlcvSeries) -> dict[date, float]:
    if daily.granularity != Granularity.DAY:
        raise ValueError("index computations need a daily series")
    return {ms_day(c.open_time): float(c.close) for c in daily.candles}


def relative_index(daily: OhlcvSeries, baseline: PrePumpBaseline | float, pump_day: date,
                   horizon: int = DEFAULT_HORIZON, censor_at: int | None = None) -> IndexSeries:
    """Closing price relative to the pre-pump price, times 100, for offsets 0..horizon.

    With ``censor_at`` (days until the coin's next pump) only offsets below it
    are kept.
    """
    price = baseline.price if isinstance(baseline, PrePumpBaseline) else float(baseline)
    if price <= 0:
        raise ValueError("baseline price must be positive")
    closes = _daily_closes(daily)
    values = []
    reason = "horizon"
    for n in range(horizon + 1):
        if censor_at is not None and n >= censor_at:
            reason = "censored"
            break
        close = closes.get(pump_day + timedelta(days=n))
        if close is None:
            reason = "data_end"
            break
        values.append(close / price * 100.0)
    return IndexSeries("R", pump_day, tuple(values),
                       censor_at if reason == "censored" else None, reason)


class MarketPanel:
    """Daily price and quote volume per market coin, pooled across exchanges.

    A coin's daily price is the plain mean of the exchange closes available
    that day; its weight is the summed ``close * volume`` across those
    exchanges.
    """

    def __init__(self, top: Mapping[str, Mapping[str, OhlcvSeries]]):
        self.coins = sorted(top)
        self._data: dict[str, dict[date, tuple[float, float]]] = {}
        for coin in self.coins:
            closes: dict[date, list[float]] = {}
            qvol: dict[date, float] = {}
            for exchange in sorted(top[coin]):
                series = top[coin][exchange]
                if series.granularity != Granularity.DAY:
                    raise ValueError(f"market series {coin}@{exchange} must be daily")
                for c in series.candles:
                    d = ms_day(c.open_time)
                    closes.setdefault(d, []).append(float(c.close))
                    qvol[d] = qvol.get(d, 0.0) + float(c.close) * float(c.volume)
            self._data[coin] = {d: (sum(v) / len(v), qvol[d]) for d, v in closes.items()}
        self._cache: dict[tuple[date, int], IndexSeries] = {}

    def at(self, coin: str, day: date) -> tuple[float, float] | None:
        return self._data[coin].get(day)

    def index(self, pump_day: date, horizon: int = DEFAULT_HORIZON) -> IndexSeries:
        key = (pump_day, horizon)
        if key not in self._cache:
            self._cache[key] = self._compute(pump_day, horizon)
        return self._cache[key]

    def _compute(self, pump_day: date, horizon: int) -> IndexSeries:
        base = {c: self._data[c][pump_day] for c in self.coins if pump_day in self._data[c]}
        if not base:
            raise MarketIndexUnavailable(f"no market coin has data on {pump_day}")
        values = []
        reason = "horizon"
        for n in range(horizon + 1):
            d = pump_day + timedelta(days=n)
            num = Fraction(0)
            den = Fraction(0)
            rel = []
            for coin, (p0, v0) in base.items():
                today = self._data[coin].get(d)
                if today is None:
                    continue
                r = Fraction(today[0]) / Fraction(p0) * 100
                w = Fraction(today[1] if today[1] > 0 else v0)
                rel.append(r)
                num += w * r
                den += w
            if not rel:
                reason = "data_end"
                break
            values.append(float(num / den) if den > 0 else float(sum(rel) / len(rel)))
        return IndexSeries("M", pump_day, tuple(values), None, reason)


def market_index(top: Mapping[str, Mapping[str, OhlcvSeries]] | MarketPanel, pump_day: date,
                 horizon: int = DEFAULT_HORIZON) -> IndexSeries:
    """Volume-weighted average of the market coins' relative prices, 100 on the pump day.

    Each coin is weighted by its quote volume on the offset day, falling back
    to its pump-day volume when that day's volume is zero. Only coins priced
    on the pump day take part.
    """
    panel = top if isinstance(top, MarketPanel) else MarketPanel(top)
    return panel.index(pump_day, horizon)


def adjusted_index(r: IndexSeries, m: IndexSeries) -> IndexSeries:
    """Coin index net of the market: ``R - M + 100`` on the offsets both cover."""
    if r.base_day != m.base_day:
        raise IndexMismatch(f"base days differ: {r.base_day} vs {m.base_day}")
    n = min(len(r), len(m))
    if n == 0:
        raise IndexMismatch("coin and market indices share no offsets")
    values = tuple(r.values[i] - m.values[i] + 100.0 for i in range(n))
    if n == len(r):
        reason, censored = r.end_reason, r.censored_from
    else:
        reason, censored = m.end_reason, None
    return IndexSeries("I", r.base_day, values, censored, reason)


def censor_offsets(events: Iterable) -> dict[str, int | None]:
    """Days from each event's pump day to the same coin's next pump, ``None`` for a coin's last pump."""
    by_coin: dict[str, list] = {}
    for e in events:
        by_coin.setdefault(e.coin, []).append(e)
    out: dict[str, int | None] = {}
    for evs in by_coin.values():
        evs.sort(key=lambda e: (e.announced_at, e.id))
        for i, e in enumerate(evs):
            later = [x for x in evs[i + 1:] if x.announced_at > e.announced_at]
            out[e.id] = (utc_day(later[0].announced_at) - utc_day(e.announced_at)).days if later else None
    return out
