"""Pipeline configuration: one JSON document, paths relative to its own directory."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Any

from .analytics.aggregate import DAY_OFFSETS
from .analytics.cohort import CPI_SCHEME, NON_CPI_SCHEME, BinScheme
from .analytics.indices import DEFAULT_HORIZON
from .errors import ConfigError
from .marketdata.fetch import DEFAULT_LISTING_FLOOR
from .normalize import CLOSE_RULES
from .timeutil import parse_day


@dataclass(frozen=True)
class FetchSettings:
    max_attempts: int = 3
    backoff_seconds: float = 1.0
    passes: int = 2


@dataclass(frozen=True)
class PipelineConfig:
    path: Path
    sha256: str
    channel_registry: Path
    message_logs: tuple[Path, ...]
    exchanges: dict[str, str]  # exchange id -> quote currency of its pump pairs
    collection_date: date
    split_date: date
    output_dir: Path
    patterns: Path | None = None
    channel_code_overrides: dict[str, str] = field(default_factory=dict)
    replay_manifest: Path | None = None
    excluded_exchanges: tuple[str, ...] = ()
    dedup_window: timedelta = timedelta(minutes=15)
    horizon_days: int = DEFAULT_HORIZON
    day_offsets: tuple[int, ...] = DAY_OFFSETS
    bin_schemes: dict[str, BinScheme] = field(
        default_factory=lambda: {"CPI": CPI_SCHEME, "nonCPI": NON_CPI_SCHEME})
    market_coins: tuple[str, ...] = ()
    market_exchanges: tuple[str, ...] = ()
    market_quote: str = "USDT"
    reference_pair: str = "BTC/USDT"
    listing_floor: date = DEFAULT_LISTING_FLOOR
    market_caps: Path | None = None
    close_rule: str = "ref_close"
    half_window_weeks: int = 5
    fetch: FetchSettings = FetchSettings()

    @property
    def target_quote(self) -> str:
        return self.reference_pair.split("/")[1]

    @property
    def source_quote(self) -> str:
        return self.reference_pair.split("/")[0]


def _get(doc: dict, key: str, kind, required=False, default=None):
    if key not in doc:
        if required:
            raise ConfigError(f"config: missing required field {key!r}")
        return default
    val = doc[key]
    if not isinstance(val, kind):
        raise ConfigError(f"config: field {key!r} must be {getattr(kind, '__name__', kind)}")
    return val


def _day(doc, key, required=False, default=None) -> date | None:
    raw = _get(doc, key, str, required)
    if raw is None:
        return default
    try:
        return parse_day(raw)
    except ValueError:
        raise ConfigError(f"config: field {key!r} must be a YYYY-MM-DD date") from None


def _scheme(name: str, raw: Any) -> BinScheme:
    try:
        edges = tuple((int(lo), None if hi is None else int(hi)) for lo, hi in raw)
        return BinScheme(name, edges)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: bad bin scheme {name!r}: {exc}") from None


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
        doc = json.loads(raw)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    base = path.parent

    def existing(rel: str, key: str) -> Path:
        p = (base / rel).resolve() if not Path(rel).is_absolute() else Path(rel)
        if not p.exists():
            raise ConfigError(f"config: {key} path does not exist: {p}")
        return p

    def optional_path(key: str) -> Path | None:
        rel = _get(doc, key, str)
        return existing(rel, key) if rel else None

    logs = _get(doc, "message_logs", list, required=True)
    exchanges = _get(doc, "exchanges", dict, required=True)
    if not all(isinstance(k, str) and isinstance(v, str) for k, v in exchanges.items()):
        raise ConfigError("config: 'exchanges' must map exchange ids to quote currencies")
    offsets = tuple(_get(doc, "day_offsets", list, default=list(DAY_OFFSETS)))
    if not offsets:
        raise ConfigError("config: day_offsets must not be empty")
    if any(not isinstance(o, int) or o < 0 for o in offsets):
        raise ConfigError("config: day_offsets must be nonnegative integers")
    horizon = _get(doc, "horizon_days", int, default=DEFAULT_HORIZON)
    if horizon < max(offsets):
        raise ConfigError(f"config: horizon_days {horizon} is shorter than the largest day offset {max(offsets)}")
    schemes_raw = _get(doc, "bin_schemes", dict)
    schemes = ({name: _scheme(name, edges) for name, edges in schemes_raw.items()}
               if schemes_raw is not None else {"CPI": CPI_SCHEME, "nonCPI": NON_CPI_SCHEME})
    if set(schemes) - {"CPI", "nonCPI"}:
        raise ConfigError("config: bin_schemes keys must be 'CPI' and/or 'nonCPI'")
    close_rule = _get(doc, "close_rule", str, default="ref_close")
    if close_rule not in CLOSE_RULES:
        raise ConfigError(f"config: close_rule must be one of {', '.join(CLOSE_RULES)}")
    ref = _get(doc, "reference_pair", str, default="BTC/USDT")
    if ref.count("/") != 1:
        raise ConfigError("config: reference_pair must look like BASE/QUOTE")
    fetch_doc = _get(doc, "fetch", dict, default={})
    window = _get(doc, "dedup_window_minutes", (int, float), default=15)
    if window <= 0:
        raise ConfigError("config: dedup_window_minutes must be positive")
    out = _get(doc, "output_dir", str, required=True)
    try:
        fetch = FetchSettings(
            max_attempts=int(fetch_doc.get("max_attempts", 3)),
            backoff_seconds=float(fetch_doc.get("backoff_seconds", 1.0)),
            passes=int(fetch_doc.get("passes", 2)),
        )
    except (TypeError, ValueError):
        raise ConfigError("config: fetch settings must be numbers") from None
    if fetch.max_attempts < 1 or fetch.passes < 1 or fetch.backoff_seconds < 0:
        raise ConfigError("config: fetch needs max_attempts >= 1, passes >= 1 and backoff_seconds >= 0")
    half_window = _get(doc, "half_window_weeks", int, default=5)
    if half_window < 1:
        raise ConfigError("config: half_window_weeks must be at least 1")

    return PipelineConfig(
        path=path.resolve(),
        sha256=hashlib.sha256(raw).hexdigest(),
        channel_registry=existing(_get(doc, "channel_registry", str, required=True), "channel_registry"),
        message_logs=tuple(existing(p, "message_logs") for p in logs),
        exchanges={k.lower(): v.upper() for k, v in exchanges.items()},
        collection_date=_day(doc, "collection_date", required=True),
        split_date=_day(doc, "split_date", required=True),
        output_dir=(base / out).resolve(),
        patterns=optional_path("patterns"),
        channel_code_overrides=_get(doc, "channel_code_overrides", dict, default={}),
        replay_manifest=optional_path("replay_manifest"),
        excluded_exchanges=tuple(x.lower() for x in _get(doc, "excluded_exchanges", list, default=[])),
        dedup_window=timedelta(minutes=window),
        horizon_days=horizon,
        day_offsets=offsets,
        bin_schemes=schemes,
        market_coins=tuple(_get(doc, "market_coins", list, default=[])),
        market_exchanges=tuple(x.lower() for x in _get(doc, "market_exchanges", list, default=[])),
        market_quote=_get(doc, "market_quote", str, default="USDT"),
        reference_pair=ref,
        listing_floor=_day(doc, "listing_floor", default=DEFAULT_LISTING_FLOOR),
        market_caps=optional_path("market_caps"),
        close_rule=close_rule,
        half_window_weeks=half_window,
        fetch=fetch,
    )
