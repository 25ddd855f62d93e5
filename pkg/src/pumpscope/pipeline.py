"""The batch stages behind the command line: parse, listings, fetch, analyze.

Each stage reads the previous stage's files from the output directory and
writes its own, so stages can be rerun independently. Rerunning a stage
over complete outputs does no new exchange requests.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Mapping

from . import __version__
from .analytics.aggregate import QUANTILE_RULE, AggregateRow, aggregate, daily_profile
from .analytics.cohort import bin_by_pump_count, binned_analysis, cpi_dominant, group_by_coin, is_cpi, nth_pump_analysis
from .analytics.event_window import EventWindowReport, event_window_analysis
from .analytics.indices import (
    IndexMismatch,
    IndexSeries,
    MarketIndexUnavailable,
    MarketPanel,
    adjusted_index,
    censor_offsets,
    relative_index,
)
from .analytics.performance import BaselineUnavailable, WindowEmpty, pump_day, pump_performance
from .config import PipelineConfig
from .errors import ConfigError, SchemaError
from .events.io import read_events_csv, read_message_log, write_events_csv, write_registry, write_removals_csv, \
    load_registry
from .events.model import EventTable
from .events.patterns import PatternSet
from .events.table import channel_stats, clean_events, exchange_counts, extract_events, merge_events, \
    pumps_per_coin_distribution
from .marketdata.candles import Granularity, OhlcvSeries
from .marketdata.client import CcxtClient, load_replay_manifest
from .marketdata.fetch import (
    Fetcher,
    ListingDate,
    ListingSearchError,
    NeverListed,
    GapRecord,
    fetch_tiered,
    fetch_window,
    find_listing_date,
)
from .marketdata.records import read_listings, write_gap_log, write_listings
from .marketdata.store import CandleStore
from .normalize import ConversionError, convert_quote
from .timeutil import DAY_MS, MINUTE_MS, day_ms, floor_ms, format_utc, parse_day, to_ms

log = logging.getLogger(__name__)

FAILURE_HEADER = ["exchange", "pair", "reason", "permanent"]
MARKET_CAP_HEADER = ["coin", "market_cap_usd", "volume_usd", "as_of_date"]

DECISIONS = {
    "adjusted_index": "I_n = R_n - M_n + 100",
    "quantile_rule": QUANTILE_RULE,
    "pump_window": "5 one-minute bars from the announcement floored to the minute; peak is the highest bar high",
    "baseline": "mean daily close and volume over calendar days -7..-1; missing days shrink the divisor",
    "day_offsets": "offset n is the UTC pump day + n, valued at that day's daily close",
    "market_weights": "quote volume (close x volume summed over exchanges) on the offset day, "
                      "pump-day volume when zero",
    "market_price": "plain mean of the exchange closes per coin and day",
    "censoring": "a series ends before the calendar day of the same coin's next pump, at the horizon, "
                 "or at the first day without a daily bar",
    "binning": "coins binned by their pump count within the organiser group; uncensored series",
    "organiser_split": "CPI iff channel code is CPI; a coin is CPI-dominant iff more than half its pumps are CPI",
    "event_window": "before means announced strictly before midnight UTC of the split date",
}


@dataclass(frozen=True)
class Workspace:
    root: Path

    @property
    def events(self): return self.root / "events.csv"
    @property
    def removed(self): return self.root / "removed.csv"
    @property
    def channels(self): return self.root / "channels.csv"
    @property
    def parse_summary(self): return self.root / "parse_summary.json"
    @property
    def listings(self): return self.root / "listings.csv"
    @property
    def listing_failures(self): return self.root / "listing_failures.csv"
    @property
    def store(self): return self.root / "store"
    @property
    def gaps(self): return self.root / "gaps.csv"
    @property
    def fetch_summary(self): return self.root / "fetch_summary.json"
    @property
    def analysis(self): return self.root / "analysis.json"
    @property
    def report(self): return self.root / "report"

    def require(self, path: Path, stage: str) -> Path:
        if not path.exists():
            raise ConfigError(f"{path.name} not found in {self.root}; run '{stage}' first")
        return path


def dump_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def make_clients(cfg: PipelineConfig, replay: Path | None = None, live: bool = False) -> dict:
    if live:
        wanted = sorted((set(cfg.exchanges) - set(cfg.excluded_exchanges)) | set(cfg.market_exchanges))
        return {ex: CcxtClient(ex) for ex in wanted}
    manifest = replay or cfg.replay_manifest
    if manifest is None:
        raise ConfigError("no replay manifest configured; pass --replay or use --live")
    if not Path(manifest).exists():
        raise ConfigError(f"replay manifest does not exist: {manifest}")
    return load_replay_manifest(manifest)


def make_fetchers(cfg: PipelineConfig, clients: Mapping) -> dict[str, Fetcher]:
    return {ex: Fetcher(c, max_attempts=cfg.fetch.max_attempts, backoff=cfg.fetch.backoff_seconds,
                        passes=cfg.fetch.passes)
            for ex, c in clients.items()}


def load_events(cfg: PipelineConfig, ws: Workspace) -> EventTable:
    registry = load_registry(ws.channels) if ws.channels.exists() else load_registry(cfg.channel_registry)
    return read_events_csv(ws.require(ws.events, "parse"), registry)


# -- parse -----------------------------------------------------------------

def run_parse(cfg: PipelineConfig, clients: Mapping) -> dict:
    ws = Workspace(cfg.output_dir)
    ws.root.mkdir(parents=True, exist_ok=True)
    registry = load_registry(cfg.channel_registry, cfg.channel_code_overrides)
    patterns = PatternSet.load(cfg.patterns) if cfg.patterns else PatternSet.default()
    messages = [m for path in cfg.message_logs
                for m in read_message_log(path, registry, cfg.channel_code_overrides)]
    raw = extract_events(messages, patterns, cfg.exchanges)
    merged = merge_events(raw, cfg.dedup_window, [p.name for p in cfg.message_logs])
    present = {e.exchange for e in merged} - set(cfg.excluded_exchanges)
    listings = {ex: clients[ex].listed_coins() for ex in sorted(present) if ex in clients}
    cleaned, removals = clean_events(merged, listings, cfg.excluded_exchanges)

    write_events_csv(ws.events, cleaned)
    write_removals_csv(ws.removed, removals)
    write_registry(ws.channels, registry)
    summary = {
        "messages": len(messages),
        "extracted": sum(len(v) for v in raw.values()),
        "merged": len(merged),
        "removed": dict(sorted(Counter(r.reason for r in removals).items())),
        "removed_by_exchange": dict(sorted(Counter(r.event.exchange for r in removals).items())),
        "events": len(cleaned),
    }
    dump_json(ws.parse_summary, summary)
    return summary


# -- listings --------------------------------------------------------------

def listing_targets(cfg: PipelineConfig, table: EventTable) -> list[tuple[str, str]]:
    targets = {(e.exchange, e.pair) for e in table}
    for ex in {e.exchange for e in table if e.quote == cfg.source_quote}:
        targets.add((ex, cfg.reference_pair))
    for ex in cfg.market_exchanges:
        for coin in cfg.market_coins:
            if coin != cfg.market_quote:
                targets.add((ex, f"{coin}/{cfg.market_quote}"))
    return sorted(targets)


def _read_failures(path: Path) -> dict[tuple[str, str], tuple[str, bool]]:
    if not path.exists():
        return {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FAILURE_HEADER:
            raise SchemaError(path, f"expected header {','.join(FAILURE_HEADER)}", row=1)
        return {(r["exchange"], r["pair"]): (r["reason"], r["permanent"] == "1") for r in reader}


def _write_failures(path: Path, failures: Mapping[tuple[str, str], tuple[str, bool]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FAILURE_HEADER)
    for (ex, pair), (reason, permanent) in sorted(failures.items()):
        w.writerow([ex, pair, reason, "1" if permanent else "0"])
    path.write_text(buf.getvalue(), encoding="utf-8")


def run_listings(cfg: PipelineConfig, clients: Mapping) -> dict:
    ws = Workspace(cfg.output_dir)
    table = load_events(cfg, ws)
    fetchers = make_fetchers(cfg, clients)
    known = read_listings(ws.listings) if ws.listings.exists() else {}
    old_failures = _read_failures(ws.listing_failures)
    failures = {k: v for k, v in old_failures.items() if v[1]}
    found: dict[tuple[str, str], ListingDate] = {}
    ceiling = cfg.collection_date + timedelta(days=1)
    for ex, pair in listing_targets(cfg, table):
        key = (ex, pair)
        if key in known:
            found[key] = known[key]
            continue
        if key in failures:
            continue
        if ex not in fetchers:
            failures[key] = ("no client for exchange", True)
            continue
        try:
            found[key] = find_listing_date(fetchers[ex], pair, cfg.listing_floor, ceiling)
        except NeverListed as exc:
            failures[key] = (str(exc), True)
        except ListingSearchError as exc:
            failures[key] = (str(exc), False)
        except Exception as exc:  # UnknownPair and non-retryable exchange errors
            if not getattr(exc, "retryable", True):
                failures[key] = (f"{type(exc).__name__}: {exc}", True)
            else:
                raise
    write_listings(ws.listings, found.values())
    _write_failures(ws.listing_failures, failures)
    return {"listings": len(found), "failures": len(failures),
            "probes": sum(f.requests for f in fetchers.values())}


# -- fetch -----------------------------------------------------------------

def run_fetch(cfg: PipelineConfig, clients: Mapping) -> dict:
    """Fill the candle store; returns a summary whose ``unresolved`` list is nonempty on data loss."""
    ws = Workspace(cfg.output_dir)
    table = load_events(cfg, ws)
    listings = read_listings(ws.require(ws.listings, "listings"))
    fetchers = make_fetchers(cfg, clients)
    store = CandleStore(ws.store)
    gaps: list[GapRecord] = []
    tier_errors: dict[str, dict[str, str]] = {}
    unresolved: list[dict] = []
    skipped: dict[str, str] = {}

    def note_unresolved(ex, pair, tier, ranges):
        for s, e in ranges:
            unresolved.append({"exchange": ex, "pair": pair, "tier": tier, "start_ms": s, "end_ms": e})

    for e in table:
        fetcher = fetchers.get(e.exchange)
        pairs = [e.pair] + ([cfg.reference_pair] if e.quote == cfg.source_quote else [])
        for pair in pairs:
            listing = listings.get((e.exchange, pair))
            if fetcher is None or listing is None:
                skipped.setdefault(e.id, f"no listing date for {e.exchange} {pair}")
                continue
            if listing.date > e.announced_at.date():
                skipped.setdefault(e.id, f"{e.exchange} {pair} listed after the announcement")
                continue
            data = fetch_tiered(fetcher, e, listing, cfg.collection_date, store, pair=pair)
            gaps.extend(data.gaps)
            for tier, msg in data.errors.items():
                tier_errors.setdefault(e.id, {})[f"{pair} {tier}"] = msg
            for tier, ranges in data.unresolved.items():
                note_unresolved(e.exchange, pair, tier, ranges)

    end = day_ms(cfg.collection_date) + DAY_MS
    for ex in cfg.market_exchanges:
        for coin in cfg.market_coins:
            pair = f"{coin}/{cfg.market_quote}"
            listing = listings.get((ex, pair))
            if ex not in fetchers or listing is None:
                continue
            _, lost = fetch_window(fetchers[ex], pair, Granularity.DAY, day_ms(listing.date), end, store)
            note_unresolved(ex, pair, "daily", lost)

    write_gap_log(ws.gaps, gaps)
    summary = {
        "requests": {ex: f.requests for ex, f in sorted(fetchers.items())},
        "tier_errors": tier_errors,
        "skipped": dict(sorted(skipped.items())),
        "unresolved": unresolved,
        "gap_log": ws.gaps.name,
    }
    dump_json(ws.fetch_summary, summary)
    return summary


# -- analyze ---------------------------------------------------------------

@dataclass
class EventResult:
    event: object
    performance: object | None = None
    censor_at: int | None = None
    censored: IndexSeries | None = None
    uncensored: IndexSeries | None = None
    warnings: list[str] = field(default_factory=list)


def _row_dict(r: AggregateRow) -> dict:
    return {"offset": r.offset, "n": r.n, "mean": r.mean, "median": r.median, "iqr_mean": r.iqr_mean,
            "average": r.average}


def _rows(rows) -> list[dict]:
    return [_row_dict(r) for r in rows]


def read_market_caps(path: Path) -> dict[str, dict]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MARKET_CAP_HEADER:
            raise SchemaError(path, f"expected header {','.join(MARKET_CAP_HEADER)}", row=1)
        for rowno, row in enumerate(reader, start=2):
            rec = {}
            for col in ("market_cap_usd", "volume_usd"):
                try:
                    rec[col] = float(row[col])
                except ValueError:
                    raise SchemaError(path, "not a number", row=rowno, column=col) from None
            try:
                rec["as_of_date"] = parse_day(row["as_of_date"]).isoformat()
            except ValueError:
                raise SchemaError(path, "not a YYYY-MM-DD date", row=rowno, column="as_of_date") from None
            out[row["coin"].strip().upper()] = rec
    return out


def _market_panel(cfg: PipelineConfig, store: CandleStore) -> MarketPanel:
    top = {}
    for coin in cfg.market_coins:
        per_ex = {}
        for ex in cfg.market_exchanges:
            s = store.get(ex, f"{coin}/{cfg.market_quote}", Granularity.DAY)
            if len(s):
                per_ex[ex] = s
        if per_ex:
            top[coin] = per_ex
    return MarketPanel(top)


def _event_series(cfg, store, e, conversions) -> tuple[OhlcvSeries, OhlcvSeries]:
    m0 = floor_ms(to_ms(e.announced_at), MINUTE_MS)
    minute = store.get(e.exchange, e.pair, Granularity.MINUTE, m0 - DAY_MS, m0 + DAY_MS)
    daily = store.get(e.exchange, e.pair, Granularity.DAY)
    if e.quote == cfg.source_quote:
        ref_min = store.get(e.exchange, cfg.reference_pair, Granularity.MINUTE, m0 - DAY_MS, m0 + DAY_MS)
        ref_day = store.get(e.exchange, cfg.reference_pair, Granularity.DAY)
        minute, rep_m = convert_quote(minute, ref_min, cfg.close_rule)
        daily, rep_d = convert_quote(daily, ref_day, cfg.close_rule)
        conversions.append({"event": e.id, **rep_m.to_dict()})
        conversions.append({"event": e.id, **rep_d.to_dict()})
    return minute, daily


def analyze_events(cfg: PipelineConfig, table: EventTable, store: CandleStore) -> tuple[list[EventResult], list[dict]]:
    panel = _market_panel(cfg, store)
    censor = censor_offsets(table)
    conversions: list[dict] = []
    results = []
    for e in table:
        res = EventResult(e, censor_at=censor[e.id])
        results.append(res)
        try:
            minute, daily = _event_series(cfg, store, e, conversions)
        except ConversionError as exc:
            res.warnings.append(f"conversion failed: {exc}")
            continue
        try:
            res.performance = pump_performance(minute, daily, e.announced_at)
        except (BaselineUnavailable, WindowEmpty) as exc:
            res.warnings.append(f"no pump performance: {exc}")
            continue
        if res.performance.delta_v is None:
            res.warnings.append("baseline volume is zero; volume change undefined")
        day = pump_day(e.announced_at)
        try:
            m = panel.index(day, cfg.horizon_days)
        except MarketIndexUnavailable as exc:
            res.warnings.append(f"no market index: {exc}")
            continue
        baseline = res.performance.baseline
        r_full = relative_index(daily, baseline, day, cfg.horizon_days)
        r_cens = relative_index(daily, baseline, day, cfg.horizon_days, res.censor_at)
        try:
            res.uncensored = adjusted_index(r_full, m)
        except IndexMismatch as exc:
            res.warnings.append(f"no adjusted index: {exc}")
            continue
        if len(r_cens):
            res.censored = adjusted_index(r_cens, m)
    return results, conversions


def _by_id(results, attr) -> dict[str, IndexSeries]:
    return {r.event.id: getattr(r, attr) for r in results if getattr(r, attr) is not None}


def _event_window_dict(w: EventWindowReport) -> dict:
    def period(p):
        return {"count": p.count, "proportion": p.proportion, "time_proportion": p.time_proportion,
                "pumps_per_week": p.pumps_per_week}
    return {
        "split_at": w.split_at.isoformat(),
        "span_days": w.span_days,
        "before": period(w.before),
        "after": period(w.after),
        "exchange_shares": {ex: {"before": b, "after": a} for ex, (b, a) in w.exchange_shares.items()},
        "weekly": {
            "weeks": list(w.weekly.weeks),
            "counts": {k: list(v) for k, v in w.weekly.counts.items()},
            "before_mean": w.weekly.before_mean,
            "after_mean": w.weekly.after_mean,
        },
        "performance": w.performance,
    }


def build_analysis(cfg: PipelineConfig, table: EventTable, results: list[EventResult],
                   conversions: list[dict], market_caps: Mapping[str, dict] | None = None) -> dict:
    offsets = cfg.day_offsets
    censored = _by_id(results, "censored")
    uncensored = _by_id(results, "uncensored")
    ordered = [r.event for r in results]
    cpi_events = [e for e in ordered if is_cpi(e)]
    other_events = [e for e in ordered if not is_cpi(e)]
    groups = {"all": ordered, "CPI": cpi_events, "nonCPI": other_events}

    long_term = {g: _rows(aggregate([censored[e.id] for e in evs if e.id in censored], offsets))
                 for g, evs in groups.items()}
    profiles = {g: _rows(daily_profile([censored[e.id] for e in evs if e.id in censored], cfg.horizon_days))
                for g, evs in groups.items()}
    binned, nth = {}, {}
    for name, scheme in cfg.bin_schemes.items():
        by_coin = group_by_coin(groups[name])
        rows = binned_analysis(by_coin, scheme, uncensored, offsets)
        binned[name] = {"bins": {label: len(coins) for label, coins in
                                 bin_by_pump_count(by_coin, scheme).items()},
                        "rows": {label: _rows(r) for label, r in rows.items()}}
        nth[name] = {str(n): _rows(r) for n, r in nth_pump_analysis(by_coin, uncensored, (1, 2, 3, 4), offsets).items()}

    perf = {r.event.id: r.performance for r in results if r.performance is not None}
    window = event_window_analysis(ordered, cfg.split_date, cfg.half_window_weeks, perf)

    events_out = []
    for r in results:
        e, p = r.event, r.performance
        events_out.append({
            "id": e.id, "coin": e.coin, "exchange": e.exchange, "pair": e.pair, "channel": e.channel.code,
            "announced_at": format_utc(e.announced_at),
            "delta_p": p.delta_p if p else None,
            "delta_v": p.delta_v if p else None,
            "baseline_price": p.baseline.price if p else None,
            "baseline_volume": p.baseline.volume if p else None,
            "baseline_days": p.baseline.days if p else None,
            "max_price": p.max_price if p else None,
            "pump_volume": p.pump_volume if p else None,
            "pre_value": p.pre_value if p else None,
            "total_value": p.total_value if p else None,
            "censor_at": r.censor_at,
            "censored_length": len(r.censored) if r.censored else 0,
            "censored_end": r.censored.end_reason if r.censored else None,
            "index": list(r.uncensored.values) if r.uncensored else None,
        })

    coins = []
    perf_by_coin = group_by_coin(ordered)
    caps = market_caps or {}
    for coin, evs in sorted(perf_by_coin.items()):
        dps = [perf[e.id].delta_p for e in evs if e.id in perf]
        cap = caps.get(coin, {})
        coins.append({
            "coin": coin, "pumps": len(evs), "cpi_pumps": sum(1 for e in evs if is_cpi(e)),
            "cpi_dominant": cpi_dominant(evs),
            "mean_delta_p": sum(dps) / len(dps) if dps else None,
            "market_cap_usd": cap.get("market_cap_usd"), "volume_usd": cap.get("volume_usd"),
            "as_of_date": cap.get("as_of_date"),
        })

    warnings = [f"{r.event.id}: {w}" for r in results for w in r.warnings]
    stats = channel_stats(table) if len(table) else []
    return {
        "version": __version__,
        "config_sha256": cfg.sha256,
        "decisions": {**DECISIONS, "close_conversion": f"close x reference {cfg.close_rule.replace('ref_', '')}"},
        "horizon_days": cfg.horizon_days,
        "day_offsets": list(offsets),
        "counts": {
            "events": len(table),
            "with_performance": len(perf),
            "with_censored_index": len(censored),
            "with_uncensored_index": len(uncensored),
        },
        "channels": [{"code": s.code, "name": s.name, "pumps": s.pumps, "share": s.share, "coins": s.coins,
                      "per_coin": s.per_coin} for s in stats],
        "exchanges": exchange_counts(table),
        "pumps_per_coin": pumps_per_coin_distribution(table) if len(table) else {},
        "long_term": long_term,
        "binned": binned,
        "nth_pump": nth,
        "event_window": _event_window_dict(window),
        "events": events_out,
        "coins": coins,
        "profiles": profiles,
        "conversions": conversions,
        "warnings": warnings,
    }


def run_analyze(cfg: PipelineConfig) -> dict:
    ws = Workspace(cfg.output_dir)
    table = load_events(cfg, ws)
    ws.require(ws.store, "fetch")
    store = CandleStore(ws.store)
    results, conversions = analyze_events(cfg, table, store)
    caps = read_market_caps(cfg.market_caps) if cfg.market_caps else None
    doc = build_analysis(cfg, table, results, conversions, caps)
    for conv in conversions:
        log.info("conversion %s", json.dumps(conv, sort_keys=True))
    dump_json(ws.analysis, doc)
    return doc
