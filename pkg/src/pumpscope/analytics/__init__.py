"""Pump performance, price indices, robust aggregation and cohort comparisons."""

from .aggregate import DAY_OFFSETS, QUANTILE_RULE, AggregateRow, aggregate, daily_profile, iqr_mean, iqr_members, quantile, summarize
from .cohort import (
    CPI_CODE,
    CPI_SCHEME,
    NON_CPI_SCHEME,
    BinScheme,
    bin_by_pump_count,
    binned_analysis,
    cpi_dominant,
    group_by_coin,
    is_cpi,
    nth_pump_analysis,
    split_by_organiser,
)
from .event_window import EventWindowReport, PeriodCounts, WeeklyCounts, event_window_analysis, relative_change
from .indices import (
    DEFAULT_HORIZON,
    IndexMismatch,
    IndexSeries,
    MarketIndexUnavailable,
    MarketPanel,
    adjusted_index,
    censor_offsets,
    market_index,
    relative_index,
)
from .performance import (
    BASELINE_DAYS,
    PUMP_WINDOW_MINUTES,
    BaselineUnavailable,
    PrePumpBaseline,
    PumpPerformance,
    WindowEmpty,
    max_price_increase,
    pre_pump_baseline,
    pump_performance,
    pump_volume_metrics,
    pump_window,
    total_value,
)

__all__ = [
    "AggregateRow", "BASELINE_DAYS", "BaselineUnavailable", "BinScheme", "CPI_CODE", "CPI_SCHEME",
    "DAY_OFFSETS", "DEFAULT_HORIZON", "EventWindowReport", "IndexMismatch", "IndexSeries",
    "MarketIndexUnavailable", "MarketPanel", "NON_CPI_SCHEME", "PUMP_WINDOW_MINUTES", "PeriodCounts",
    "PrePumpBaseline", "PumpPerformance", "QUANTILE_RULE", "WeeklyCounts", "WindowEmpty",
    "adjusted_index", "aggregate", "bin_by_pump_count", "binned_analysis", "censor_offsets",
    "cpi_dominant", "daily_profile", "event_window_analysis", "group_by_coin", "iqr_mean",
    "iqr_members", "is_cpi", "market_index", "max_price_increase", "nth_pump_analysis",
    "pre_pump_baseline", "pump_performance", "pump_volume_metrics", "pump_window", "quantile",
    "relative_change", "relative_index", "split_by_organiser", "summarize", "total_value",
]
