"""OHLCV ingestion: client contract, replay fixtures, pagination, listing discovery, storage."""

from .candles import (
    Candle,
    Gap,
    Granularity,
    InvalidCandle,
    InvalidSeries,
    OhlcvSeries,
    find_gaps,
    read_series_csv,
    series_filename,
    split_pair,
    write_series_csv,
)
from .client import (
    CcxtClient,
    ExchangeClient,
    ExchangeError,
    Fault,
    RateLimited,
    ReplayClient,
    SimulatedClock,
    SystemClock,
    TransportError,
    UnknownPair,
    load_replay_manifest,
)
from .fetch import (
    DEFAULT_LISTING_FLOOR,
    Fetcher,
    GapRecord,
    IngestionError,
    ListingDate,
    ListingSearchError,
    NeverListed,
    RateLimiter,
    RetriesExhausted,
    Tier,
    TieredMarketData,
    fetch_tiered,
    fetch_window,
    find_listing_date,
    tier_windows,
)
from .store import CandleStore, StoreError

__all__ = [
    "Candle", "CandleStore", "CcxtClient", "DEFAULT_LISTING_FLOOR", "ExchangeClient", "ExchangeError",
    "Fault", "Fetcher", "Gap", "GapRecord", "Granularity", "IngestionError", "InvalidCandle",
    "InvalidSeries", "ListingDate", "ListingSearchError", "NeverListed", "OhlcvSeries", "RateLimited",
    "RateLimiter", "ReplayClient", "RetriesExhausted", "SimulatedClock", "StoreError", "SystemClock",
    "Tier", "TieredMarketData", "TransportError", "UnknownPair", "fetch_tiered", "fetch_window", "find_gaps",
    "find_listing_date", "load_replay_manifest", "read_series_csv", "series_filename", "split_pair",
    "tier_windows", "write_series_csv",
]
