"""Organiser groups, pump-count bins and nth-pump comparisons."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .aggregate import DAY_OFFSETS, AggregateRow, aggregate

CPI_CODE = "CPI"


@dataclass(frozen=True)
class BinScheme:
    name: str
    edges: tuple[tuple[int, int | None], ...]

    def __post_init__(self):
        prev_hi = 0
        for lo, hi in self.edges:
            if lo != prev_hi + 1 or (hi is not None and hi < lo):
                raise ValueError(f"bin scheme {self.name!r} must tile 1.. without gaps")
            if hi is None:
                break
            prev_hi = hi
        if self.edges[-1][1] is not None:
            raise ValueError(f"bin scheme {self.name!r} must end with an open bin")

    def label(self, lo: int, hi: int | None) -> str:
        if hi is None:
            return f"{lo}+"
        return str(lo) if lo == hi else f"{lo}-{hi}"

    @property
    def labels(self) -> list[str]:
        return [self.label(lo, hi) for lo, hi in self.edges]

    def bin_of(self, count: int) -> str:
        for lo, hi in self.edges:
            if count >= lo and (hi is None or count <= hi):
                return self.label(lo, hi)
        raise ValueError(f"pump count {count} outside scheme {self.name!r}")


CPI_SCHEME = BinScheme("CPI", ((1, 10), (11, 18), (19, 30), (31, None)))
NON_CPI_SCHEME = BinScheme("nonCPI", ((1, 1), (2, None)))


def is_cpi(event) -> bool:
    return event.channel.code == CPI_CODE


def split_by_organiser(events: Iterable) -> tuple[list, list]:
    cpi, other = [], []
    for e in events:
        (cpi if is_cpi(e) else other).append(e)
    return cpi, other


def cpi_dominant(events: Sequence) -> bool:
    """True when more than half of a coin's pumps were organised by CPI."""
    return sum(1 for e in events if is_cpi(e)) * 2 > len(events)


def group_by_coin(events: Iterable) -> dict[str, list]:
    out: dict[str, list] = {}
    for e in events:
        out.setdefault(e.coin, []).append(e)
    for evs in out.values():
        evs.sort(key=lambda e: (e.announced_at, e.id))
    return out


def bin_by_pump_count(events_by_coin: Mapping[str, Sequence], scheme: BinScheme) -> dict[str, list[str]]:
    """Assign every coin to the bin holding its number of pumps; bins in scheme order."""
    bins: dict[str, list[str]] = {label: [] for label in scheme.labels}
    for coin in sorted(events_by_coin):
        bins[scheme.bin_of(len(events_by_coin[coin]))].append(coin)
    return bins


def binned_analysis(events_by_coin: Mapping[str, Sequence], scheme: BinScheme,
                    index_of: Mapping[str, object] | Callable[[str], object | None],
                    offsets: Sequence[int] = DAY_OFFSETS) -> dict[str, list[AggregateRow]]:
    """Aggregate uncensored adjusted indices over all pumps of the coins in each bin."""
    lookup = index_of.get if isinstance(index_of, Mapping) else index_of
    out = {}
    for label, coins in bin_by_pump_count(events_by_coin, scheme).items():
        series = [s for coin in coins for e in events_by_coin[coin] if (s := lookup(e.id)) is not None]
        out[label] = aggregate(series, offsets)
    return out


def nth_pump_analysis(events_by_coin: Mapping[str, Sequence],
                      index_of: Mapping[str, object] | Callable[[str], object | None],
                      ns: Sequence[int] = (1, 2, 3, 4),
                      offsets: Sequence[int] = DAY_OFFSETS) -> dict[int, list[AggregateRow]]:
    """Aggregate each coin's nth pump (1-based, time order) for every n in ``ns``."""
    lookup = index_of.get if isinstance(index_of, Mapping) else index_of
    out = {}
    for n in ns:
        series = []
        for coin in sorted(events_by_coin):
            evs = sorted(events_by_coin[coin], key=lambda e: (e.announced_at, e.id))
            if len(evs) >= n and (s := lookup(evs[n - 1].id)) is not None:
                series.append(s)
        out[n] = aggregate(series, offsets)
    return out
