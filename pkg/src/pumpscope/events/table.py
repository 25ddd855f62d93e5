"""Building and cleaning the event table: extraction, cross-channel merge, listing checks, stats."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import timedelta
from typing import Collection, Iterable, Mapping, Sequence

from ..errors import PumpscopeError
from .model import ChannelRegistry, ChannelRef, EventTable, PumpEvent, RawMessage, derive_channel_code
from .patterns import PatternSet, parse_announcement

log = logging.getLogger(__name__)

DEFAULT_DEDUP_WINDOW = timedelta(minutes=15)


class CleaningError(PumpscopeError):
    pass


@dataclass(frozen=True)
class Removal:
    event: PumpEvent
    reason: str  # "excluded_exchange" | "delisted"


@dataclass(frozen=True)
class ChannelStat:
    code: str
    name: str
    pumps: int
    share: float
    coins: int

    @property
    def per_coin(self) -> float:
        return self.pumps / self.coins


def extract_events(messages: Iterable[RawMessage], patterns: PatternSet,
                   quotes: Mapping[str, str]) -> dict[str, list[PumpEvent]]:
    """Turn messages into per-channel event lists.

    ``quotes`` maps every known exchange id to the quote currency its pumps
    trade against; an announcement whose exchange is unknown is dropped.
    """
    per_channel: dict[str, list[PumpEvent]] = defaultdict(list)
    for msg in messages:
        ann = parse_announcement(msg, patterns)
        if ann is None:
            continue
        exchange = ann.exchange_hint or msg.channel.default_exchange
        if exchange is None:
            log.warning("no exchange for %s announcement of %s at %s; dropped",
                        msg.channel.code, ann.coin, msg.timestamp.isoformat())
            continue
        if exchange not in quotes:
            log.warning("exchange %r not in registry (%s, %s); dropped", exchange, msg.channel.code, ann.coin)
            continue
        per_channel[msg.channel.code].append(
            PumpEvent.create(ann.coin, exchange, msg.channel, msg.timestamp, quotes[exchange])
        )
    return dict(per_channel)


def resolve_channel(name: str, registry: ChannelRegistry,
                    overrides: Mapping[str, str] | None = None) -> ChannelRef:
    """Look a channel up by name, registering a derived code for unknown names."""
    ch = registry.by_name(name)
    if ch is None:
        ch = ChannelRef(name=name, code=derive_channel_code(name, overrides))
        registry.add(ch)
    return ch


def merge_events(raw: Mapping[str, Sequence[PumpEvent]] | Iterable[Sequence[PumpEvent]],
                 window: timedelta = DEFAULT_DEDUP_WINDOW,
                 provenance: Iterable[str] = ()) -> EventTable:
    """Collapse cross-channel reposts into single events.

    Events sharing (coin, exchange) are clustered by single linkage: two are
    in the same cluster when a chain of events, each within ``window`` of the
    next, connects them. Each cluster keeps its earliest post; simultaneous
    posts are resolved by channel code.
    """
    if window <= timedelta(0):
        raise ValueError("merge window must be positive")
    lists = raw.values() if isinstance(raw, Mapping) else raw
    groups: dict[tuple[str, str], list[PumpEvent]] = defaultdict(list)
    for events in lists:
        for e in events:
            groups[(e.coin, e.exchange)].append(e)

    kept: list[PumpEvent] = []
    for key in sorted(groups):
        evs = sorted(groups[key], key=lambda e: (e.announced_at, e.channel.code, e.id))
        last = None
        for e in evs:
            if last is None or e.announced_at - last > window:
                kept.append(e)
            last = e.announced_at

    seen: set[str] = set()
    out = []
    for e in kept:
        if e.id in seen:
            # same channel, second and coin on two exchanges
            e = PumpEvent(f"{e.id}-{e.exchange}", e.coin, e.exchange, e.channel, e.announced_at, e.pair)
        seen.add(e.id)
        out.append(e)
    return EventTable.from_events(out, provenance)


def clean_events(table: EventTable, listings: Mapping[str, Collection[str]],
                 excluded: Collection[str] = ()) -> tuple[EventTable, list[Removal]]:
    """Drop events on excluded exchanges and events whose coin is no longer listed."""
    excluded = set(excluded)
    unknown = sorted({e.exchange for e in table} - excluded - set(listings))
    if unknown:
        raise CleaningError(f"no listing data for exchange(s) {', '.join(unknown)} and not excluded")
    kept: list[PumpEvent] = []
    removed: list[Removal] = []
    for e in table:
        if e.exchange in excluded:
            removed.append(Removal(e, "excluded_exchange"))
        elif e.coin not in listings[e.exchange]:
            removed.append(Removal(e, "delisted"))
        else:
            kept.append(e)
    return EventTable(tuple(kept), table.provenance), removed


def channel_stats(table: EventTable) -> list[ChannelStat]:
    """Per-channel pump counts, percentage share and pumps per distinct coin, largest first."""
    if not len(table):
        raise ValueError("channel_stats needs a nonempty table")
    counts: Counter[str] = Counter()
    coins: dict[str, set[str]] = defaultdict(set)
    names: dict[str, str] = {}
    for e in table:
        counts[e.channel.code] += 1
        coins[e.channel.code].add(e.coin)
        names[e.channel.code] = e.channel.name
    total = len(table)
    return [
        ChannelStat(code, names[code], n, n / total * 100.0, len(coins[code]))
        for code, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ]


def exchange_counts(table: EventTable) -> dict[str, int]:
    return dict(sorted(Counter(e.exchange for e in table).items()))


def pumps_per_coin_distribution(table: EventTable,
                                edges: Sequence[tuple[int, int | None]] = (
                                    (1, 10), (11, 20), (21, 30), (31, 40), (41, 50), (51, None)),
                                ) -> list[tuple[str, int, float]]:
    """Histogram of how many coins were pumped k times, as (label, coins, percent)."""
    per_coin = Counter(e.coin for e in table)
    n = len(per_coin)
    rows = []
    for lo, hi in edges:
        c = sum(1 for k in per_coin.values() if k >= lo and (hi is None or k <= hi))
        label = f"{lo}+" if hi is None else (f"{lo}" if lo == hi else f"{lo}-{hi}")
        rows.append((label, c, c / n * 100.0 if n else 0.0))
    return rows
