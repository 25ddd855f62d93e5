"""Rate-limited, retrying, paginated OHLCV collection."""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta

from ..errors import PumpscopeError
from ..timeutil import UTC, DAY_MS, HOUR_MS, MINUTE_MS, day_ms, floor_ms, to_ms
from .candles import Candle, Gap, Granularity, OhlcvSeries, find_gaps
from .client import Clock, ExchangeClient, ExchangeError, RateLimited, SystemClock, UnknownPair
from .intervals import Interval, normalize, subtract

log = logging.getLogger(__name__)

DEFAULT_LISTING_FLOOR = date(2005, 1, 1)
# added to every wait so accumulated float error never lands a request early
SAFETY_MARGIN = 1e-6


class IngestionError(PumpscopeError):
    pass


class RetriesExhausted(IngestionError):
    pass


class RateLimiter:
    """Owns the request clock for one exchange.

    Requests are spaced at least ``min_interval`` apart and never issued
    before the latest retry-after deadline.
    """

    def __init__(self, min_interval: float = 0.0, clock: Clock | None = None):
        self.min_interval = min_interval
        self.clock = clock or SystemClock()
        self._next = float("-inf")
        self._deadline = float("-inf")
        self._lock = threading.Lock()
        self.requests = 0

    def acquire(self) -> None:
        with self._lock:
            wait = max(self._next, self._deadline) - self.clock.now()
            if wait > 0:
                self.clock.sleep(wait)
            now = self.clock.now()
            self._next = now + self.min_interval + (SAFETY_MARGIN if self.min_interval else 0.0)
            self.requests += 1

    def defer(self, seconds: float) -> None:
        with self._lock:
            self._deadline = max(self._deadline, self.clock.now() + seconds + SAFETY_MARGIN)


@dataclass
class RangeResult:
    candles: list[Candle]
    missing: list[Interval]


class Fetcher:
    """Retrying request layer plus pagination over one exchange client.

    Each request gets ``max_attempts`` tries; retryable errors back off
    exponentially (``backoff`` seconds doubled per attempt), never less than a
    server-supplied retry-after.
    """

    def __init__(self, client: ExchangeClient, limiter: RateLimiter | None = None,
                 max_attempts: int = 3, backoff: float = 1.0, passes: int = 2):
        self.client = client
        self.passes = passes
        self.limiter = limiter or RateLimiter(getattr(client, "min_interval", 0.0),
                                              getattr(client, "clock", None))
        self.max_attempts = max_attempts
        self.backoff = backoff

    @property
    def requests(self) -> int:
        return self.limiter.requests

    def request(self, pair: str, granularity: Granularity, since_ms: int, limit: int) -> list[Candle]:
        last: ExchangeError | None = None
        for attempt in range(1, self.max_attempts + 1):
            self.limiter.acquire()
            try:
                return self.client.fetch_ohlcv(pair, granularity, since_ms, limit)
            except ExchangeError as exc:
                if not exc.retryable:
                    raise
                last = exc
                wait = self.backoff * 2 ** (attempt - 1)
                if isinstance(exc, RateLimited):
                    wait = max(wait, exc.retry_after)
                log.debug("%s %s %s since %d attempt %d failed: %s", self.client.exchange, pair,
                          granularity, since_ms, attempt, exc)
                if attempt < self.max_attempts:
                    self.limiter.defer(wait)
                else:
                    self.limiter.defer(exc.retry_after if isinstance(exc, RateLimited) else 0.0)
        raise RetriesExhausted(
            f"{self.client.exchange} {pair} {granularity} since {since_ms}: {self.max_attempts} attempts failed"
        ) from last

    def fetch_range(self, pair: str, granularity: Granularity, start_ms: int, end_ms: int) -> RangeResult:
        """One pagination pass over ``[start_ms, end_ms)``.

        A page that exhausts its retries is recorded as missing and skipped.
        """
        granularity = Granularity(granularity)
        step = granularity.ms
        candles: list[Candle] = []
        missing: list[Interval] = []
        since = start_ms
        while since < end_ms:
            limit = min(self.client.max_batch, math.ceil((end_ms - since) / step))
            try:
                batch = self.request(pair, granularity, since, limit)
            except RetriesExhausted:
                skip_to = min(since + limit * step, end_ms)
                missing.append((since, skip_to))
                since = skip_to
                continue
            batch = [c for c in batch if since <= c.open_time < end_ms]
            if not batch:
                break
            candles.extend(batch)
            since = batch[-1].open_time + step
        return RangeResult(candles, missing)

    def fetch_multipass(self, pair: str, granularity: Granularity, start_ms: int, end_ms: int,
                        passes: int | None = None) -> RangeResult:
        """Paginate, then re-request sub-ranges lost to failures on later passes."""
        passes = self.passes if passes is None else passes
        result = self.fetch_range(pair, granularity, start_ms, end_ms)
        bars = {c.open_time: c for c in result.candles}
        missing = result.missing
        for _ in range(passes - 1):
            if not missing:
                break
            still = []
            for s, e in missing:
                r = self.fetch_range(pair, granularity, s, e)
                bars.update((c.open_time, c) for c in r.candles)
                still.extend(r.missing)
            missing = still
        return RangeResult([bars[t] for t in sorted(bars)], normalize(missing))


class ListingSearchError(IngestionError):
    def __init__(self, message: str, bracket: tuple[date, date] | None = None):
        self.bracket = bracket
        super().__init__(message if bracket is None else f"{message} (bracket {bracket[0]}..{bracket[1]})")


class NeverListed(ListingSearchError):
    pass


@dataclass(frozen=True)
class ListingDate:
    exchange: str
    pair: str
    date: date
    confidence: str  # "exact" | "bounded"
    probes: int = 0


def find_listing_date(fetcher: Fetcher, pair: str, floor: date = DEFAULT_LISTING_FLOOR,
                      ceiling: date | None = None) -> ListingDate:
    """Earliest day with a daily bar, by binary search over calendar days.

    A probe asks for one daily bar starting at the probed day. A bar opening
    on that day means the pair was listed on or before it; no bar (or only a
    later one) means it was listed after. Probe results are cached, so the
    closing confirmation at ``result`` and ``result - 1 day`` normally costs
    nothing extra.
    """
    if ceiling is None:
        ceiling = datetime.now(UTC).date()
    if not floor < ceiling:
        raise ValueError("floor must precede ceiling")
    exchange = fetcher.client.exchange
    cache: dict[date, bool] = {}
    lo, hi = floor, ceiling

    def probe(d: date) -> bool:
        if d not in cache:
            t = day_ms(d)
            try:
                batch = fetcher.request(pair, Granularity.DAY, t, 1)
            except UnknownPair:
                raise
            except RetriesExhausted as exc:
                raise ListingSearchError(f"{exchange} {pair}: probe at {d} failed", (lo, hi)) from exc
            cache[d] = bool(batch) and t <= batch[0].open_time < t + DAY_MS
        return cache[d]

    while lo < hi:
        mid = lo + timedelta(days=(hi - lo).days // 2)
        if probe(mid):
            hi = mid
        else:
            lo = mid + timedelta(days=1)
    if not probe(lo):
        raise NeverListed(f"{exchange} {pair}: no daily data up to {ceiling}", (floor, ceiling))
    exact = not probe(lo - timedelta(days=1))
    return ListingDate(exchange, pair, lo, "exact" if exact else "bounded", len(cache))


class Tier:
    MINUTE = "minute"
    HOURLY = "hourly"
    DAILY = "daily"


TIER_GRANULARITY = {Tier.MINUTE: Granularity.MINUTE, Tier.HOURLY: Granularity.HOUR, Tier.DAILY: Granularity.DAY}


def tier_windows(announced_at: datetime, listing_day: date, collection_day: date) -> dict[str, Interval]:
    """Half-open ms windows: 1m for one day either side, 1h for a week either side, 1d listing..collection."""
    t = to_ms(announced_at)
    m0 = floor_ms(t, MINUTE_MS)
    h0 = floor_ms(t, HOUR_MS)
    return {
        Tier.MINUTE: (m0 - DAY_MS, m0 + DAY_MS),
        Tier.HOURLY: (h0 - 7 * DAY_MS, h0 + 7 * DAY_MS),
        Tier.DAILY: (day_ms(listing_day), day_ms(collection_day) + DAY_MS),
    }


@dataclass(frozen=True)
class GapRecord:
    exchange: str
    pair: str
    granularity: Granularity
    gap: Gap


@dataclass
class TieredMarketData:
    event_id: str
    minute: OhlcvSeries
    hourly: OhlcvSeries
    daily: OhlcvSeries
    windows: dict[str, Interval] = field(default_factory=dict)
    gaps: list[GapRecord] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)
    unresolved: dict[str, list[Interval]] = field(default_factory=dict)

    def tier(self, name: str) -> OhlcvSeries:
        return getattr(self, name)


def fetch_window(fetcher: Fetcher, pair: str, granularity: Granularity, start_ms: int, end_ms: int,
                 store=None) -> tuple[OhlcvSeries, list[Interval]]:
    """Fetch ``[start_ms, end_ms)`` with multi-pass retries; returns the window and what stayed missing.

    With a ``store``, ranges it already covers are not requested again and
    the result is read back from it.
    """
    exchange = fetcher.client.exchange
    todo = store.missing(exchange, pair, granularity, start_ms, end_ms) if store is not None \
        else [(start_ms, end_ms)]
    fetched: dict[int, Candle] = {}
    lost: list[Interval] = []
    for s, e in todo:
        r = fetcher.fetch_multipass(pair, granularity, s, e)
        fetched.update((c.open_time, c) for c in r.candles)
        lost.extend(r.missing)
    series = OhlcvSeries(exchange, pair, granularity, tuple(fetched[t] for t in sorted(fetched)))
    if store is not None:
        store.put(series, covered=[part for iv in todo for part in subtract(iv, lost)])
        series = store.get(exchange, pair, granularity, start_ms, end_ms)
    return series, normalize(lost)


def fetch_tiered(fetcher: Fetcher, event, listing: ListingDate, collection_date: date,
                 store=None, pair: str | None = None) -> TieredMarketData:
    """Fetch the three granularity tiers around one pump event.

    ``event`` needs ``id``, ``announced_at`` and ``pair``; ``pair`` overrides
    the latter (used for conversion reference pairs). With a ``store``, only
    sub-ranges the store has not already covered are requested, and results
    are merged into it.
    """
    pair = pair or event.pair
    if listing.date > event.announced_at.date():
        raise ValueError(f"listing {listing.date} is after event {event.id}")
    exchange = fetcher.client.exchange
    windows = tier_windows(event.announced_at, listing.date, collection_date)
    result = {}
    errors: dict[str, str] = {}
    unresolved: dict[str, list[Interval]] = {}
    gaps: list[GapRecord] = []
    for tier, (start, end) in windows.items():
        gran = TIER_GRANULARITY[tier]
        try:
            series, lost = fetch_window(fetcher, pair, gran, start, end, store)
        except UnknownPair as exc:
            errors[tier] = f"unknown pair: {exc}"
            series, lost = OhlcvSeries(exchange, pair, gran, ()), []
        if lost:
            unresolved[tier] = normalize(lost)
        if not len(series) and tier not in errors:
            errors[tier] = "no data in window" if not lost else "window unavailable after retries"
        gaps.extend(GapRecord(exchange, pair, gran, g) for g in find_gaps(series, start, end))
        result[tier] = series
    return TieredMarketData(event.id, result[Tier.MINUTE], result[Tier.HOURLY], result[Tier.DAILY],
                            windows, gaps, errors, unresolved)
