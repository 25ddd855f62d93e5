"""Announcement pattern sets and message parsing.

A pattern set is configuration: an ordered list of regular expressions, each
with a named ``coin`` group (and optionally an ``exchange`` group), plus an
alias table used to spot exchange names in the message text and a list of
tokens that are never coins (``#binance``, ``#pump`` ...).

Image announcements are handled upstream: whatever extracted the text from
the image fills ``RawMessage.text`` and the same patterns apply.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, NamedTuple, Sequence

from ..errors import ConfigError
from .model import RawMessage

log = logging.getLogger(__name__)

_COIN_TOKEN = re.compile(r"^(?=.*[A-Z])[A-Z0-9]{1,15}$")


class PatternConfigError(ConfigError):
    pass


class Announcement(NamedTuple):
    coin: str
    exchange_hint: str | None


@dataclass(frozen=True)
class AnnouncementPattern:
    name: str
    regex: re.Pattern

    @classmethod
    def compile(cls, name: str, source: str) -> "AnnouncementPattern":
        try:
            rx = re.compile(source)
        except re.error as exc:
            raise PatternConfigError(f"pattern {name!r} does not compile: {exc}") from None
        if "coin" not in rx.groupindex:
            raise PatternConfigError(f"pattern {name!r} lacks a named 'coin' group")
        return cls(name, rx)


DEFAULT_IGNORE = frozenset({
    "PUMP", "PUMPS", "DUMP", "SIGNAL", "SIGNALS", "VIP", "CRYPTO", "COIN", "BTC", "USDT",
    "BINANCE", "KUCOIN", "HOTBIT", "YOBIT", "BITTREX", "BITMART",
})

DEFAULT_PATTERNS: tuple[tuple[str, str], ...] = (
    ("hashtag", r"(?<![\w#])#(?P<coin>[A-Za-z0-9]{2,15})\b"),
    ("coin_keyword", r"(?i:\bcoin)(?:\s+(?i:name))?\s*(?::|(?i:is))\s*\$?(?P<coin>[A-Z][A-Z0-9]{1,14})\b"),
    ("pumping_today", r"(?i:pumping\s+today)\s*(?::|-|(?i:is))?\s*\$?(?P<coin>[A-Z][A-Z0-9]{1,14})\b"),
)

DEFAULT_EXCHANGE_ALIASES = {
    "binance": "binance",
    "kucoin": "kucoin",
    "hotbit": "hotbit",
    "yobit": "yobit",
    "bittrex": "bittrex",
    "bitmart": "bitmart",
}


@dataclass(frozen=True)
class PatternSet:
    patterns: tuple[AnnouncementPattern, ...]
    exchange_aliases: Mapping[str, str] = field(default_factory=dict)
    ignore: frozenset[str] = DEFAULT_IGNORE

    def __post_init__(self):
        if not self.patterns:
            raise PatternConfigError("pattern set is empty")
        aliases = {k.lower(): v for k, v in self.exchange_aliases.items()}
        object.__setattr__(self, "exchange_aliases", aliases)
        if aliases:
            alts = "|".join(re.escape(a) for a in sorted(aliases, key=len, reverse=True))
            rx = re.compile(rf"(?<![A-Za-z0-9])(?:{alts})(?![A-Za-z0-9])", re.IGNORECASE)
        else:
            rx = None
        object.__setattr__(self, "_alias_rx", rx)

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> "PatternSet":
        raw = cfg.get("patterns")
        if not isinstance(raw, Sequence) or isinstance(raw, str) or not raw:
            raise PatternConfigError("'patterns' must be a nonempty list")
        compiled = []
        for i, item in enumerate(raw):
            if not isinstance(item, Mapping) or "regex" not in item:
                raise PatternConfigError(f"pattern #{i} must be an object with a 'regex' key")
            compiled.append(AnnouncementPattern.compile(str(item.get("name", f"pattern{i}")), item["regex"]))
        aliases = cfg.get("exchange_aliases", DEFAULT_EXCHANGE_ALIASES)
        ignore = frozenset(t.upper() for t in cfg.get("ignore", DEFAULT_IGNORE))
        return cls(tuple(compiled), dict(aliases), ignore)

    @classmethod
    def load(cls, path: str | Path) -> "PatternSet":
        try:
            cfg = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise PatternConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_config(cfg)

    @classmethod
    def default(cls) -> "PatternSet":
        return cls(
            tuple(AnnouncementPattern.compile(n, s) for n, s in DEFAULT_PATTERNS),
            dict(DEFAULT_EXCHANGE_ALIASES),
        )

    def find_exchange(self, text: str) -> str | None:
        rx = self._alias_rx  # type: ignore[attr-defined]
        if rx is None:
            return None
        m = rx.search(text)
        return self.exchange_aliases[m.group(0).lower()] if m else None


def _normalize_coin(token: str) -> str:
    return token.strip().lstrip("#$").upper()


def parse_announcement(msg: RawMessage, patterns: PatternSet) -> Announcement | None:
    """Extract the announced coin from one message, or ``None``.

    Patterns are tried in priority order; within a pattern the leftmost
    acceptable match wins. Further distinct coins in the same message are
    logged and dropped.
    """
    text = msg.text or ""
    if not text.strip():
        return None
    found: list[tuple[str, str | None]] = []
    for pat in patterns.patterns:
        for m in pat.regex.finditer(text):
            coin = _normalize_coin(m.group("coin"))
            if not _COIN_TOKEN.match(coin) or coin in patterns.ignore:
                continue
            hint = None
            if "exchange" in pat.regex.groupindex and m.group("exchange"):
                hint = patterns.exchange_aliases.get(m.group("exchange").lower(), m.group("exchange").lower())
            found.append((coin, hint))
        if found:
            break
    if not found:
        return None
    coin, hint = found[0]
    extra = sorted({c for c, _ in found[1:] if c != coin})
    if extra:
        log.info("multi-coin announcement in %s at %s: kept %s, dropped %s",
                 msg.channel.code, msg.timestamp.isoformat(), coin, ",".join(extra))
    if hint is None:
        hint = patterns.find_exchange(text)
    return Announcement(coin, hint)
