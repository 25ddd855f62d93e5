"""Exchange client contract, clocks, the deterministic replay client and a ccxt adapter.

Every client exposes::

    client.exchange            # exchange id
    client.max_batch           # largest accepted ``limit``
    client.min_interval        # seconds between requests the client asks for
    client.fetch_ohlcv(pair, granularity, since_ms, limit) -> list[Candle]
    client.listed_coins()      # base symbols currently listed

``fetch_ohlcv`` returns candles with ``open_time >= since_ms`` in ascending
order, at most ``limit`` of them. An empty list means there is no data at or
after ``since_ms`` within the client's horizon.
"""

from __future__ import annotations

import json
import random
import threading
import time
from bisect import bisect_left
from collections import deque
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

from ..errors import ConfigError, PumpscopeError, SchemaError
from ..timeutil import DAY_MS, day_ms, parse_day
from .candles import Candle, Granularity, read_candles_csv, split_pair


class ExchangeError(PumpscopeError):
    retryable = False


class RateLimited(ExchangeError):
    retryable = True

    def __init__(self, retry_after: float, message: str = ""):
        self.retry_after = float(retry_after)
        super().__init__(message or f"rate limited; retry after {self.retry_after:.3f}s")


class TransportError(ExchangeError):
    retryable = True


class UnknownPair(ExchangeError):
    pass


class Clock(Protocol):
    def now(self) -> float: ...
    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def now(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class SimulatedClock:
    """Virtual time: ``sleep`` advances the clock instantly."""

    def __init__(self, start: float = 0.0):
        self._t = float(start)
        self._lock = threading.Lock()

    def now(self) -> float:
        return self._t

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            with self._lock:
                self._t += seconds


class ExchangeClient(Protocol):
    exchange: str
    max_batch: int
    min_interval: float

    def fetch_ohlcv(self, pair: str, granularity: Granularity, since_ms: int, limit: int) -> list[Candle]: ...

    def listed_coins(self) -> set[str]: ...


@dataclass
class Fault:
    """Injected failure: the next ``times`` matching requests fail with ``kind``."""

    pair: str
    granularity: Granularity
    since_ms: int | None = None
    times: int = 1
    kind: str = "transport"

    def matches(self, pair, granularity, since_ms) -> bool:
        return (self.times > 0 and pair == self.pair and granularity == self.granularity
                and (self.since_ms is None or self.since_ms == since_ms))


@dataclass(frozen=True)
class RequestRecord:
    at: float
    pair: str
    granularity: Granularity
    since_ms: int
    limit: int
    outcome: str  # "ok" | "rate_limited" | "transport" | "unknown_pair"
    returned: int = 0


class ReplayClient:
    """Serves OHLCV from in-memory or on-disk fixtures, simulating exchange limits.

    Series are supplied either as candle lists or as CSV paths loaded lazily.
    The simulated rate limit is a sliding window of ``max_requests`` per
    ``per_seconds`` on the given clock; breaching it yields ``RateLimited``
    with the wait needed. A request sent before a previously issued
    retry-after deadline is counted in ``violations``.
    """

    def __init__(self, exchange: str, series: Mapping[tuple[str, Granularity | str], Sequence[Candle] | str | Path],
                 *, max_batch: int = 500, rate_limit: tuple[int, float] | None = None,
                 clock: Clock | None = None, horizon_days: Mapping[Granularity | str, int] | None = None,
                 horizon_anchor_ms: int | None = None, markets: Iterable[str] | None = None,
                 faults: Iterable[Fault] = (), failure_rate: float = 0.0, seed: int = 0):
        if max_batch <= 0:
            raise ValueError("max_batch must be positive")
        self.exchange = exchange
        self.max_batch = max_batch
        self.clock = clock or SimulatedClock()
        self.rate_limit = rate_limit
        self.min_interval = (rate_limit[1] / rate_limit[0]) if rate_limit else 0.0
        self._sources = {(p, Granularity(g)): src for (p, g), src in series.items()}
        self._loaded: dict[tuple[str, Granularity], tuple[list[int], list[Candle]]] = {}
        self._horizon = {Granularity(g): d for g, d in (horizon_days or {}).items()}
        self._anchor = horizon_anchor_ms
        self._markets = set(markets) if markets is not None else {p for p, _ in self._sources}
        self.faults = list(faults)
        self._failure_rate = failure_rate
        self._rng = random.Random(seed)
        self._window: deque[float] = deque()
        self._lock = threading.Lock()
        self.deadline = float("-inf")
        self.violations = 0
        self.log: list[RequestRecord] = []

    @property
    def request_count(self) -> int:
        return len(self.log)

    def listed_coins(self) -> set[str]:
        return {split_pair(p)[0] for p in self._markets}

    def pairs(self) -> set[str]:
        return set(self._markets)

    def _series(self, pair: str, granularity: Granularity):
        key = (pair, granularity)
        if key not in self._loaded:
            src = self._sources.get(key)
            if src is None:
                candles: list[Candle] = []
            elif isinstance(src, (str, Path)):
                candles = read_candles_csv(src)
            else:
                candles = list(src)
            candles.sort(key=lambda c: c.open_time)
            self._loaded[key] = ([c.open_time for c in candles], candles)
        return self._loaded[key]

    def _record(self, now, pair, granularity, since_ms, limit, outcome, returned=0):
        self.log.append(RequestRecord(now, pair, granularity, since_ms, limit, outcome, returned))

    def fetch_ohlcv(self, pair: str, granularity: Granularity | str, since_ms: int, limit: int) -> list[Candle]:
        granularity = Granularity(granularity)
        if not 0 < limit <= self.max_batch:
            raise ValueError(f"limit {limit} outside 1..{self.max_batch}")
        with self._lock:
            now = self.clock.now()
            if now < self.deadline:
                self.violations += 1
                self._record(now, pair, granularity, since_ms, limit, "rate_limited")
                raise RateLimited(self.deadline - now, "request before retry-after deadline")
            if self.rate_limit:
                max_req, per = self.rate_limit
                while self._window and self._window[0] <= now - per:
                    self._window.popleft()
                if len(self._window) >= max_req:
                    wait = self._window[0] + per - now
                    self.deadline = now + wait
                    self._record(now, pair, granularity, since_ms, limit, "rate_limited")
                    raise RateLimited(wait)
                self._window.append(now)
            for f in self.faults:
                if f.matches(pair, granularity, since_ms):
                    f.times -= 1
                    self._record(now, pair, granularity, since_ms, limit, f.kind)
                    if f.kind == "rate_limit":
                        self.deadline = now + 1.0
                        raise RateLimited(1.0)
                    raise TransportError(f"injected failure for {pair} {granularity} since {since_ms}")
            if self._failure_rate and self._rng.random() < self._failure_rate:
                self._record(now, pair, granularity, since_ms, limit, "transport")
                raise TransportError("simulated transport failure")
            if pair not in self._markets:
                self._record(now, pair, granularity, since_ms, limit, "unknown_pair")
                raise UnknownPair(f"{self.exchange} has no market {pair}")
            times, candles = self._series(pair, granularity)
            lo = bisect_left(times, since_ms)
            horizon = self._horizon.get(granularity)
            if horizon is not None and self._anchor is not None:
                lo = max(lo, bisect_left(times, self._anchor - horizon * DAY_MS))
            batch = candles[lo:lo + limit]
            self._record(now, pair, granularity, since_ms, limit, "ok", len(batch))
            return batch


def load_replay_manifest(path: str | Path, clock: Clock | None = None) -> dict[str, ReplayClient]:
    """Build one replay client per exchange from a JSON manifest.

    Layout::

        {"exchanges": {"<id>": {
            "max_batch": 500,
            "rate_limit": {"max_requests": 20, "per_seconds": 1.0},
            "horizon_days": {"1m": 90}, "horizon_anchor": "2023-03-07",
            "markets": ["ABC/BTC", ...],            # optional, defaults to series keys
            "faults": [{"pair": ..., "granularity": ..., "since_ms": ..., "times": 1}],
            "failure_rate": 0.0, "seed": 0,
            "series": {"ABC/BTC": {"1d": "<csv relative to manifest>", ...}}}}}
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(path, f"cannot read replay manifest: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("exchanges"), dict):
        raise SchemaError(path, "manifest must contain an 'exchanges' object", column="exchanges")
    clock = clock or SimulatedClock()
    clients = {}
    for ex, entry in sorted(doc["exchanges"].items()):
        try:
            series: dict[tuple[str, Granularity], Path] = {}
            for pair, files in entry.get("series", {}).items():
                for gran, rel in files.items():
                    series[(pair, Granularity(gran))] = path.parent / rel
            rl = entry.get("rate_limit")
            anchor = entry.get("horizon_anchor")
            clients[ex] = ReplayClient(
                ex, series,
                max_batch=int(entry.get("max_batch", 500)),
                rate_limit=(int(rl["max_requests"]), float(rl["per_seconds"])) if rl else None,
                clock=clock,
                horizon_days=entry.get("horizon_days"),
                horizon_anchor_ms=day_ms(parse_day(anchor)) if anchor else None,
                markets=entry.get("markets"),
                faults=[Fault(f["pair"], Granularity(f["granularity"]), f.get("since_ms"),
                              int(f.get("times", 1)), f.get("kind", "transport"))
                        for f in entry.get("faults", [])],
                failure_rate=float(entry.get("failure_rate", 0.0)),
                seed=int(entry.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(path, f"bad entry for exchange {ex!r}: {exc}", column=ex) from None
    return clients


class CcxtClient:
    """Adapter over a ``ccxt`` exchange instance. Only used with ``--live``."""

    _TIMEFRAMES = {Granularity.MINUTE: "1m", Granularity.HOUR: "1h", Granularity.DAY: "1d"}

    def __init__(self, exchange: str, max_batch: int = 500, api: Any = None):
        if api is None:
            try:
                import ccxt  # noqa: PLC0415
            except ImportError:
                raise ConfigError("live mode needs the 'ccxt' package (pip install ccxt)") from None
            api = getattr(ccxt, exchange)({"enableRateLimit": False})
        self.exchange = exchange
        self.max_batch = max_batch
        self._api = api
        self.min_interval = getattr(api, "rateLimit", 1000) / 1000.0
        self._errors = self._error_classes()

    def _error_classes(self):
        try:
            import ccxt  # noqa: PLC0415
            return (ccxt.RateLimitExceeded, ccxt.DDoSProtection), ccxt.NetworkError, ccxt.BadSymbol
        except ImportError:
            return (), (), ()

    def listed_coins(self) -> set[str]:
        markets = self._api.load_markets()
        return {m.get("base") or split_pair(sym)[0] for sym, m in markets.items() if "/" in sym}

    def fetch_ohlcv(self, pair: str, granularity: Granularity | str, since_ms: int, limit: int) -> list[Candle]:
        rate, network, bad_symbol = self._errors
        try:
            rows = self._api.fetch_ohlcv(pair, self._TIMEFRAMES[Granularity(granularity)], since_ms, limit)
        except Exception as exc:
            if rate and isinstance(exc, rate):
                raise RateLimited(self.min_interval or 1.0, str(exc)) from exc
            if bad_symbol and isinstance(exc, bad_symbol):
                raise UnknownPair(str(exc)) from exc
            if network and isinstance(exc, network):
                raise TransportError(str(exc)) from exc
            raise
        out = []
        for ts, o, h, l, c, v in rows:
            if ts < since_ms:
                continue
            out.append(Candle(int(ts), *(Decimal(repr(x)) for x in (o, h, l, c, v or 0))))
        return out[:limit]
