"""Mean, median and interquartile mean per day offset.

Quartiles use linear interpolation between order statistics (the "type 7"
rule: position ``h = (n - 1) p`` in the sorted sample). The IQR mean is the
mean of the values ``v`` with ``Q1 <= v <= Q3``.

Membership is decided on order statistics rather than on the interpolated
floats: ``Q1`` lies strictly between ``x[j]`` and ``x[j+1]`` when the
interpolation weight is nonzero, so no rounding of the quartile itself can
move a value in or out. Means are correctly rounded (``statistics.mean``).
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

DAY_OFFSETS: tuple[int, ...] = (7, 14, 30, 60, 90, 180, 270, 365)
QUANTILE_RULE = "linear interpolation between order statistics (type 7); IQR bounds inclusive"


def quantile(sorted_values: Sequence[float], p: float) -> float:
    """Type-7 quantile of an already sorted sample."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("quantile of empty sample")
    h = (n - 1) * p
    j = int(h)
    t = h - j
    if j + 1 >= n or t == 0:
        return sorted_values[j]
    a, b = sorted_values[j], sorted_values[j + 1]
    return a + (b - a) * t


def _quartile_bounds(xs: Sequence[float]) -> tuple[float, float]:
    """Smallest and largest sample values inside [Q1, Q3] for a sorted sample."""
    n = len(xs)
    # Q1 at (n-1)/4, Q3 at 3(n-1)/4; remainders are exact in integers
    j1, r1 = divmod(n - 1, 4)
    j3, r3 = divmod(3 * (n - 1), 4)
    lower = xs[j1] if r1 == 0 else xs[j1 + 1]
    upper = xs[j3]
    return lower, upper


def iqr_members(values: Iterable[float]) -> list[float]:
    xs = sorted(values)
    if not xs:
        return []
    lo, hi = _quartile_bounds(xs)
    return [v for v in xs if lo <= v <= hi]


def iqr_mean(values: Iterable[float]) -> float | None:
    """Mean of the members of [Q1, Q3]; ``None`` when no sample value lies there.

    That happens only for two distinct values, where both quartiles fall
    strictly between them.
    """
    xs = list(values)
    if not xs:
        raise ValueError("iqr_mean of empty sample")
    members = iqr_members(xs)
    return statistics.mean(members) if members else None


@dataclass(frozen=True)
class AggregateRow:
    offset: int
    n: int
    mean: float | None
    median: float | None
    iqr_mean: float | None

    @property
    def average(self) -> float | None:
        """Plain mean of the three averages."""
        if self.n == 0 or self.iqr_mean is None:
            return None
        return (self.mean + self.median + self.iqr_mean) / 3


def summarize(offset: int, values: Sequence[float]) -> AggregateRow:
    if not values:
        return AggregateRow(offset, 0, None, None, None)
    return AggregateRow(offset, len(values), statistics.mean(values), statistics.median(values),
                        iqr_mean(values))


def aggregate(indices: Iterable, offsets: Sequence[int] = DAY_OFFSETS) -> list[AggregateRow]:
    """Per offset, summarize the values of every series that reaches it.

    Series are taken in the given order; a cell nobody reaches has ``n == 0``.
    """
    series = list(indices)
    rows = []
    for off in offsets:
        vals = [s.values[off] for s in series if off < len(s.values)]
        rows.append(summarize(off, vals))
    return rows


def daily_profile(indices: Iterable, horizon: int) -> list[AggregateRow]:
    """``aggregate`` for every offset 0..horizon (plot data)."""
    return aggregate(indices, range(horizon + 1))
