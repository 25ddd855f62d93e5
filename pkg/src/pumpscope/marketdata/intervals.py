"""Half-open integer interval arithmetic used for coverage bookkeeping."""

from __future__ import annotations

from typing import Iterable

Interval = tuple[int, int]


def normalize(intervals: Iterable[Interval]) -> list[Interval]:
    """Sort and coalesce overlapping or touching intervals; empty ones are dropped."""
    out: list[list[int]] = []
    for s, e in sorted((s, e) for s, e in intervals if e > s):
        if out and s <= out[-1][1]:
            out[-1][1] = max(out[-1][1], e)
        else:
            out.append([s, e])
    return [(s, e) for s, e in out]


def subtract(span: Interval, covered: Iterable[Interval]) -> list[Interval]:
    """Parts of ``span`` not inside any interval of ``covered``."""
    start, end = span
    out = []
    cursor = start
    for s, e in normalize(covered):
        if e <= cursor:
            continue
        if s >= end:
            break
        if s > cursor:
            out.append((cursor, s))
        cursor = max(cursor, e)
        if cursor >= end:
            break
    if cursor < end:
        out.append((cursor, end))
    return out
