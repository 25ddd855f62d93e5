"""Core event types: channels, raw messages, pump events and event tables."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping

from ..errors import ConfigError
from ..timeutil import UTC

CODE_RE = re.compile(r"^[A-Z0-9]{2,4}$")
COIN_RE = re.compile(r"^[A-Z0-9]+$")


class ChannelCodeError(ConfigError):
    pass


@dataclass(frozen=True)
class ChannelRef:
    name: str
    code: str
    default_exchange: str | None = None
    link: str = ""

    def __post_init__(self):
        if not CODE_RE.match(self.code):
            raise ChannelCodeError(
                f"channel code {self.code!r} for {self.name!r} must be 2-4 uppercase alphanumerics"
            )


@dataclass(frozen=True)
class RawMessage:
    channel: ChannelRef
    timestamp: datetime
    text: str = ""

    def __post_init__(self):
        if self.timestamp.tzinfo is None:
            raise ValueError("message timestamp must be UTC-aware")


def derive_channel_code(name: str, overrides: Mapping[str, str] | None = None) -> str:
    """Return the short code identifying a channel.

    Overrides win; otherwise the code is the uppercased first alphanumeric
    character of each whitespace-separated word, truncated to four characters.
    """
    if not name or not name.strip():
        raise ChannelCodeError("channel name must be nonempty")
    if overrides and name in overrides:
        code = overrides[name]
    else:
        initials = []
        for word in name.split():
            first = next((ch for ch in word if ch.isalnum()), None)
            if first is not None:
                initials.append(first.upper())
        code = "".join(initials)[:4]
        if len(code) < 2:
            raise ChannelCodeError(
                f"channel {name!r} yields code {code!r}; supply an explicit override"
            )
    if not CODE_RE.match(code):
        raise ChannelCodeError(f"derived code {code!r} for {name!r} is not a valid channel code")
    return code


class ChannelRegistry:
    """Name/code lookup over a set of channels with unique codes."""

    def __init__(self, channels: Iterable[ChannelRef] = ()):
        self._by_name: dict[str, ChannelRef] = {}
        self._by_code: dict[str, ChannelRef] = {}
        for ch in channels:
            self.add(ch)

    def add(self, channel: ChannelRef) -> None:
        if channel.code in self._by_code and self._by_code[channel.code].name != channel.name:
            raise ChannelCodeError(
                f"code {channel.code!r} assigned to both {self._by_code[channel.code].name!r} "
                f"and {channel.name!r}"
            )
        if channel.name in self._by_name and self._by_name[channel.name].code != channel.code:
            raise ChannelCodeError(f"channel {channel.name!r} registered twice with different codes")
        self._by_name[channel.name] = channel
        self._by_code[channel.code] = channel

    def by_name(self, name: str) -> ChannelRef | None:
        return self._by_name.get(name)

    def by_code(self, code: str) -> ChannelRef | None:
        return self._by_code.get(code)

    def __iter__(self):
        return iter(sorted(self._by_code.values(), key=lambda c: c.code))

    def __len__(self):
        return len(self._by_code)


def event_id(code: str, announced_at: datetime, coin: str) -> str:
    return f"{code}-{announced_at.astimezone(UTC).strftime('%Y%m%dT%H%M%SZ')}-{coin}"


@dataclass(frozen=True)
class PumpEvent:
    id: str
    coin: str
    exchange: str
    channel: ChannelRef
    announced_at: datetime
    pair: str

    def __post_init__(self):
        if not self.coin or not COIN_RE.match(self.coin):
            raise ValueError(f"coin {self.coin!r} must be nonempty uppercase alphanumeric")
        if self.announced_at.tzinfo is None:
            raise ValueError("announced_at must be UTC-aware")
        if self.announced_at.microsecond:
            raise ValueError("announced_at carries sub-second precision")

    @classmethod
    def create(cls, coin: str, exchange: str, channel: ChannelRef, announced_at: datetime,
               quote: str) -> "PumpEvent":
        announced_at = announced_at.astimezone(UTC).replace(microsecond=0)
        return cls(
            id=event_id(channel.code, announced_at, coin),
            coin=coin,
            exchange=exchange,
            channel=channel,
            announced_at=announced_at,
            pair=f"{coin}/{quote}",
        )

    @property
    def key(self) -> tuple[str, str, datetime]:
        return (self.coin, self.exchange, self.announced_at)

    @property
    def quote(self) -> str:
        return self.pair.split("/", 1)[1]


def _sort_key(e: PumpEvent):
    return (e.announced_at, e.id)


@dataclass(frozen=True)
class EventTable:
    """Time-ordered pump events with no duplicate (coin, exchange, announced_at)."""

    events: tuple[PumpEvent, ...] = ()
    provenance: tuple[str, ...] = field(default=())

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "provenance", tuple(self.provenance))
        keys = set()
        ids = set()
        for prev, cur in zip(events, events[1:]):
            if _sort_key(cur) < _sort_key(prev):
                raise ValueError("events must be sorted ascending by announced_at")
        for e in events:
            if e.key in keys:
                raise ValueError(f"duplicate event key {e.key!r}")
            if e.id in ids:
                raise ValueError(f"duplicate event id {e.id!r}")
            keys.add(e.key)
            ids.add(e.id)

    @classmethod
    def from_events(cls, events: Iterable[PumpEvent], provenance: Iterable[str] = ()) -> "EventTable":
        return cls(tuple(sorted(events, key=_sort_key)), tuple(provenance))

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def by_coin(self) -> dict[str, list[PumpEvent]]:
        out: dict[str, list[PumpEvent]] = {}
        for e in self.events:
            out.setdefault(e.coin, []).append(e)
        return out
