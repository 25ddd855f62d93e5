"""Pre-pump baselines and performance inside the five-minute pump window."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta

from ..errors import PumpscopeError
from ..marketdata.candles import Granularity, OhlcvSeries
from ..timeutil import MINUTE_MS, day_ms, floor_ms, to_ms, utc_day

BASELINE_DAYS = 7
PUMP_WINDOW_MINUTES = 5


class BaselineUnavailable(PumpscopeError):
    pass


class WindowEmpty(PumpscopeError):
    pass


@dataclass(frozen=True)
class PrePumpBaseline:
    price: float
    volume: float
    days: int


@dataclass(frozen=True)
class PumpPerformance:
    delta_p: float
    pump_volume: float
    delta_v: float | None
    max_price: float
    total_value: float
    pre_value: float
    baseline: PrePumpBaseline


def _require(series: OhlcvSeries, gran: Granularity, what: str) -> None:
    if series.granularity != gran:
        raise ValueError(f"{what} needs a {gran.value} series, got {series.granularity.value}")


def pre_pump_baseline(daily: OhlcvSeries, announced_at: datetime, days: int = BASELINE_DAYS) -> PrePumpBaseline:
    """Mean daily close and volume over the ``days`` calendar days before the pump day.

    Missing days shrink the divisor; zero contributing days is an error.
    """
    _require(daily, Granularity.DAY, "pre_pump_baseline")
    pump_day = utc_day(announced_at)
    bars = daily.slice(day_ms(pump_day - timedelta(days=days)), day_ms(pump_day)).candles
    if not bars:
        raise BaselineUnavailable(f"no daily bars in the {days} days before {pump_day}")
    price = sum(float(c.close) for c in bars) / len(bars)
    volume = sum(float(c.volume) for c in bars) / len(bars)
    return PrePumpBaseline(price, volume, len(bars))


def pump_window(minute: OhlcvSeries, announced_at: datetime,
                minutes: int = PUMP_WINDOW_MINUTES) -> OhlcvSeries:
    """Minute bars opening in ``[announced_at floored to the minute, + minutes)``."""
    _require(minute, Granularity.MINUTE, "pump_window")
    start = floor_ms(to_ms(announced_at), MINUTE_MS)
    return minute.slice(start, start + minutes * MINUTE_MS)


def max_price_increase(minute: OhlcvSeries, announced_at: datetime, baseline: PrePumpBaseline) -> float:
    """Percentage rise of the highest bar high in the pump window over the baseline price."""
    if baseline.price <= 0:
        raise ValueError("baseline price must be positive")
    window = pump_window(minute, announced_at)
    if not len(window):
        raise WindowEmpty(f"no minute bars in the pump window at {announced_at.isoformat()}")
    p_max = max(float(c.high) for c in window)
    return (p_max - baseline.price) / baseline.price * 100.0


def pump_volume_metrics(minute: OhlcvSeries, announced_at: datetime,
                        baseline: PrePumpBaseline) -> tuple[float, float | None]:
    """Volume traded in the pump window and its percentage change over the baseline daily volume.

    The change is ``None`` when the baseline volume is zero.
    """
    window = pump_window(minute, announced_at)
    if not len(window):
        raise WindowEmpty(f"no minute bars in the pump window at {announced_at.isoformat()}")
    volume = sum(float(c.volume) for c in window)
    if baseline.volume <= 0:
        return volume, None
    return volume, (volume - baseline.volume) / baseline.volume * 100.0


def total_value(max_price: float, pump_volume: float, baseline_price: float,
                baseline_volume: float) -> tuple[float, float]:
    """(pre-pump daily trade value, best-case pump-window trade value)."""
    if min(max_price, pump_volume, baseline_price, baseline_volume) < 0:
        raise ValueError("total_value inputs must be nonnegative")
    return baseline_price * baseline_volume, max_price * pump_volume


def pump_performance(minute: OhlcvSeries, daily: OhlcvSeries, announced_at: datetime) -> PumpPerformance:
    baseline = pre_pump_baseline(daily, announced_at)
    if baseline.price <= 0:
        raise BaselineUnavailable("baseline price is zero")
    delta_p = max_price_increase(minute, announced_at, baseline)
    volume, delta_v = pump_volume_metrics(minute, announced_at, baseline)
    max_price = max(float(c.high) for c in pump_window(minute, announced_at))
    pre_value, pump_value = total_value(max_price, volume, baseline.price, baseline.volume)
    return PumpPerformance(delta_p, volume, delta_v, max_price, pump_value, pre_value, baseline)


def pump_day(announced_at: datetime) -> date:
    return utc_day(announced_at)
