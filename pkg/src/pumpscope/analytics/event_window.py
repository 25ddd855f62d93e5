"""Before/after comparison of pump activity around a split date."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from typing import Iterable, Mapping

from ..timeutil import UTC
from .cohort import is_cpi

PERFORMANCE_FIELDS = (
    "delta_p", "delta_v", "pre_price", "during_price",
    "pre_volume", "during_volume", "pre_value", "during_value",
)


@dataclass(frozen=True)
class PeriodCounts:
    count: int
    proportion: float
    time_proportion: float
    pumps_per_week: float | None


@dataclass(frozen=True)
class WeeklyCounts:
    weeks: tuple[int, ...]
    counts: dict[str, tuple[int, ...]]  # "all" and one entry per exchange
    before_mean: dict[str, float]
    after_mean: dict[str, float]


@dataclass(frozen=True)
class EventWindowReport:
    split_at: date
    span_days: float
    before: PeriodCounts
    after: PeriodCounts
    exchange_shares: dict[str, tuple[float, float]]
    weekly: WeeklyCounts
    performance: dict[str, dict[str, dict[str, float | None]]] = field(default_factory=dict)
    """group ("CPI"/"nonCPI") -> metric -> {"before", "after", "change"}"""


def _pct(part: float, whole: float) -> float:
    return part / whole * 100.0 if whole else 0.0


def relative_change(before: float | None, after: float | None) -> float | None:
    if before is None or after is None or before == 0:
        return None
    return (after - before) / before * 100.0


def _performance_values(perf) -> dict[str, float | None]:
    return {
        "delta_p": perf.delta_p,
        "delta_v": perf.delta_v,
        "pre_price": perf.baseline.price,
        "during_price": perf.max_price,
        "pre_volume": perf.baseline.volume,
        "during_volume": perf.pump_volume,
        "pre_value": perf.pre_value,
        "during_value": perf.total_value,
    }


def _mean(values: list[float]) -> float | None:
    return statistics.mean(values) if values else None


def event_window_analysis(events: Iterable, split_at: date, half_window_weeks: int = 5,
                          performance: Mapping[str, object] | None = None) -> EventWindowReport:
    """Counts, exchange shares, weekly counts and performance means either side of ``split_at``.

    An event is "before" when announced strictly before midnight UTC of
    ``split_at``. The time span runs from the earlier of the first event and
    the split to the later of the last event and the split. Week ``k`` covers
    ``[split + 7k days, split + 7(k+1) days)``.
    """
    evs = list(events)
    split = datetime.combine(split_at, time(), tzinfo=UTC)
    before = [e for e in evs if e.announced_at < split]
    after = [e for e in evs if e.announced_at >= split]
    total = len(evs)

    if evs:
        start = min(min(e.announced_at for e in evs), split)
        end = max(max(e.announced_at for e in evs), split)
    else:
        start = end = split
    before_days = (split - start) / timedelta(days=1)
    after_days = (end - split) / timedelta(days=1)
    span = before_days + after_days

    def period(group: list, days: float) -> PeriodCounts:
        return PeriodCounts(len(group), _pct(len(group), total), _pct(days, span),
                            len(group) / (days / 7) if days > 0 else None)

    exchanges = sorted({e.exchange for e in evs})
    shares = {}
    for ex in exchanges:
        b = sum(1 for e in before if e.exchange == ex)
        a = sum(1 for e in after if e.exchange == ex)
        shares[ex] = (_pct(b, a + b), _pct(a, a + b))

    weeks = tuple(range(-half_window_weeks, half_window_weeks))
    counts: dict[str, list[int]] = {key: [0] * len(weeks) for key in ["all", *exchanges]}
    lo = split - timedelta(weeks=half_window_weeks)
    for e in evs:
        k = (e.announced_at - lo) // timedelta(weeks=1)
        if 0 <= k < len(weeks):
            counts["all"][k] += 1
            counts[e.exchange][k] += 1
    weekly = WeeklyCounts(
        weeks,
        {key: tuple(v) for key, v in counts.items()},
        {key: statistics.mean(v[:half_window_weeks]) if half_window_weeks else 0.0 for key, v in counts.items()},
        {key: statistics.mean(v[half_window_weeks:]) if half_window_weeks else 0.0 for key, v in counts.items()},
    )

    perf_table: dict[str, dict[str, dict[str, float | None]]] = {}
    if performance is not None:
        for group, want_cpi in (("CPI", True), ("nonCPI", False)):
            rows = {}
            for metric in PERFORMANCE_FIELDS:
                means = {}
                for label, part in (("before", before), ("after", after)):
                    vals = []
                    for e in part:
                        perf = performance.get(e.id)
                        if perf is None or is_cpi(e) != want_cpi:
                            continue
                        v = _performance_values(perf)[metric]
                        if v is not None:
                            vals.append(v)
                    means[label] = _mean(vals)
                means["change"] = relative_change(means["before"], means["after"])
                rows[metric] = means
            perf_table[group] = rows

    return EventWindowReport(split_at, span, period(before, before_days), period(after, after_days),
                             shares, weekly, perf_table)
