"""Pump announcements: parsing, channel codes, merging and cleaning."""

from .model import (
    ChannelCodeError,
    ChannelRef,
    ChannelRegistry,
    EventTable,
    PumpEvent,
    RawMessage,
    derive_channel_code,
    event_id,
)
from .patterns import Announcement, AnnouncementPattern, PatternConfigError, PatternSet, parse_announcement
from .table import (
    DEFAULT_DEDUP_WINDOW,
    ChannelStat,
    CleaningError,
    Removal,
    channel_stats,
    clean_events,
    exchange_counts,
    extract_events,
    merge_events,
    pumps_per_coin_distribution,
    resolve_channel,
)

__all__ = [
    "Announcement", "AnnouncementPattern", "ChannelCodeError", "ChannelRef", "ChannelRegistry",
    "ChannelStat", "CleaningError", "DEFAULT_DEDUP_WINDOW", "EventTable", "PatternConfigError",
    "PatternSet", "PumpEvent", "RawMessage", "Removal", "channel_stats", "clean_events",
    "derive_channel_code", "event_id", "exchange_counts", "extract_events", "merge_events",
    "parse_announcement", "pumps_per_coin_distribution", "resolve_channel",
]
