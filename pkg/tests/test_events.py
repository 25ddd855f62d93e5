import itertools
import json
import random
from datetime import datetime, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pumpscope.errors import SchemaError
from pumpscope.events.io import (
    EVENTS_HEADER, format_events_csv, load_registry, read_events_csv, read_message_log,
    write_events_csv, write_registry, write_removals_csv,
)
from pumpscope.events.model import (
    ChannelCodeError, ChannelRef, ChannelRegistry, EventTable, PumpEvent, RawMessage, derive_channel_code,
)
from pumpscope.events.patterns import PatternConfigError, PatternSet, parse_announcement
from pumpscope.events.table import (
    CleaningError, channel_stats, clean_events, exchange_counts, extract_events, merge_events,
    pumps_per_coin_distribution,
)
from pumpscope.timeutil import UTC

from conftest import CPI, OTHER, TESTS, event

QUOTES = {"binance": "BTC", "kucoin": "USDT", "hotbit": "USDT", "yobit": "BTC", "pancakeswap": "USDT"}
T0 = datetime(2022, 1, 1, tzinfo=UTC)


# channel codes

@pytest.mark.parametrize("name, code", [
    ("Crypto Pump Island", "CPI"),
    ("Big Pumps Kucoin", "BPK"),
    ("the #1 (best) pump group here", "T1BP"),
    ("wall street bets", "WSB"),
])
def test_derive_channel_code(name, code):
    assert derive_channel_code(name) == code


def test_derive_channel_code_overrides_and_failures():
    assert derive_channel_code("Whales", {"Whales": "WHL"}) == "WHL"
    with pytest.raises(ChannelCodeError):
        derive_channel_code("Whales")
    with pytest.raises(ChannelCodeError):
        derive_channel_code("  ")
    with pytest.raises(ChannelCodeError):
        derive_channel_code("Whales", {"Whales": "whales"})


def test_registry_rejects_code_collisions():
    reg = ChannelRegistry([ChannelRef("Big Pumps Kucoin", "BPK")])
    with pytest.raises(ChannelCodeError):
        reg.add(ChannelRef("Best Pumps Korea", "BPK"))
    with pytest.raises(ChannelCodeError):
        reg.add(ChannelRef("Big Pumps Kucoin", "BIG"))
    reg.add(ChannelRef("Big Pumps Kucoin", "BPK"))
    assert len(reg) == 1


# announcement parsing

def test_labelled_messages(tmp_path):
    src = TESTS / "data" / "labelled_messages.jsonl"
    labels = [json.loads(line) for line in src.read_text(encoding="utf-8").splitlines()]
    assert len(labels) == 50
    assert sum(1 for r in labels if r["expected_coin"] and f"#{r['expected_coin'].lower()}" in r["text"].lower()) == 20
    reg = ChannelRegistry([ChannelRef("Labelled Test Channel", "LTC", "binance")])
    patterns = PatternSet.default()
    for msg, label in zip(read_message_log(src, reg), labels):
        ann = parse_announcement(msg, patterns)
        got = (ann.coin, ann.exchange_hint) if ann else (None, None)
        assert got == (label["expected_coin"], label["expected_exchange"]), label["text"]


def test_pattern_set_from_config():
    ps = PatternSet.from_config({"patterns": [{"name": "dollar", "regex": r"\$(?P<coin>[A-Z]{2,6})"}],
                                 "exchange_aliases": {"KC": "kucoin"}})
    msg = RawMessage(OTHER, T0, "Buying $ZRX on KC")
    assert parse_announcement(msg, ps) == ("ZRX", "kucoin")
    assert parse_announcement(RawMessage(OTHER, T0, "#ZRX"), ps) is None


def test_pattern_exchange_group_wins_over_text():
    ps = PatternSet.from_config({"patterns": [{"regex": r"(?P<coin>[A-Z]{3}) @ (?P<exchange>\w+)"}]})
    assert parse_announcement(RawMessage(OTHER, T0, "ABC @ Hotbit, not binance"), ps) == ("ABC", "hotbit")


@pytest.mark.parametrize("cfg", [
    {},
    {"patterns": []},
    {"patterns": [{"regex": "(unclosed"}]},
    {"patterns": [{"regex": r"#(\w+)"}]},
    {"patterns": ["#(?P<coin>\\w+)"]},
])
def test_pattern_config_errors(cfg):
    with pytest.raises(PatternConfigError):
        PatternSet.from_config(cfg)


def test_extract_events_uses_default_exchange_and_drops_unknown():
    hotbit_only = ChannelRef("Hot Only", "HO", "hotbit")
    no_default = ChannelRef("No Default", "ND")
    msgs = [
        RawMessage(hotbit_only, T0, "#AAA"),
        RawMessage(hotbit_only, T0 + timedelta(hours=1), "#BBB on binance"),
        RawMessage(no_default, T0, "#CCC"),
        RawMessage(no_default, T0, "#DDD on bittrex"),
        RawMessage(no_default, T0, "nothing here"),
    ]
    out = extract_events(msgs, PatternSet.default(), QUOTES)
    assert [(e.coin, e.exchange, e.pair) for e in out["HO"]] == [("AAA", "hotbit", "AAA/USDT"),
                                                                 ("BBB", "binance", "BBB/BTC")]
    assert "ND" not in out


# merging

def _random_raw(rng: random.Random, n: int):
    channels = [ChannelRef(f"Channel {c}", c) for c in ("AA", "BB", "CC", "DD")]
    raw = {ch.code: [] for ch in channels}
    seen = set()
    while sum(map(len, raw.values())) < n:
        ch = rng.choice(channels)
        coin = rng.choice(["X1", "X2", "X3", "X4", "X5"])
        ex = rng.choice(["kucoin", "hotbit"])
        at = T0 + timedelta(minutes=rng.randrange(0, 3000), seconds=rng.choice([0, 30]))
        if (ch.code, coin, ex, at) in seen:
            continue
        seen.add((ch.code, coin, ex, at))
        raw[ch.code].append(PumpEvent.create(coin, ex, ch, at, "USDT"))
    return raw


def _union_find_merge(events, window):
    parent = list(range(len(events)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in itertools.combinations(range(len(events)), 2):
        a, b = events[i], events[j]
        if (a.coin, a.exchange) == (b.coin, b.exchange) and abs(a.announced_at - b.announced_at) <= window:
            parent[find(i)] = find(j)
    clusters = {}
    for i, e in enumerate(events):
        clusters.setdefault(find(i), []).append(e)
    return {min(c, key=lambda e: (e.announced_at, e.channel.code)) for c in clusters.values()}


def test_merge_matches_union_find_oracle():
    rng = random.Random(11)
    window = timedelta(minutes=15)
    raw = _random_raw(rng, 500)
    flat = [e for evs in raw.values() for e in evs]
    expected = {(e.coin, e.exchange, e.announced_at, e.channel.code) for e in _union_find_merge(flat, window)}
    table = merge_events(raw, window)
    got = {(e.coin, e.exchange, e.announced_at, e.channel.code) for e in table}
    assert got == expected
    assert len(table) < len(flat)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 120), st.integers(1, 60))
def test_merge_properties(seed, n, window_minutes):
    window = timedelta(minutes=window_minutes)
    raw = _random_raw(random.Random(seed), n)
    table = merge_events(raw, window)
    flat = [e for evs in raw.values() for e in evs]
    # every input is within reach of a kept event on the same pair
    for e in flat:
        assert any(k.coin == e.coin and k.exchange == e.exchange and abs(k.announced_at - e.announced_at)
                   <= window * len(flat) for k in table)
    # kept events on one pair are more than a window apart
    for evs in table.by_coin().values():
        for ex in {e.exchange for e in evs}:
            times = [e.announced_at for e in evs if e.exchange == ex]
            assert all(b - a > window for a, b in zip(times, times[1:]))
    assert merge_events(list(raw.values())[::-1], window).events == table.events


def test_merge_keeps_chain_as_one_event_and_breaks_on_gap():
    a = ChannelRef("Alpha Alpha", "AA")
    b = ChannelRef("Beta Beta", "BB")
    posts = {
        "AA": [PumpEvent.create("ZZZ", "kucoin", a, T0, "USDT"),
               PumpEvent.create("ZZZ", "kucoin", a, T0 + timedelta(minutes=28), "USDT")],
        "BB": [PumpEvent.create("ZZZ", "kucoin", b, T0 + timedelta(minutes=14), "USDT"),
               PumpEvent.create("ZZZ", "kucoin", b, T0 + timedelta(minutes=44), "USDT")],
    }
    table = merge_events(posts)
    assert [(e.channel.code, e.announced_at - T0) for e in table] == [
        ("AA", timedelta(0)), ("BB", timedelta(minutes=44))]
    with pytest.raises(ValueError):
        merge_events(posts, timedelta(0))


def test_merge_tie_resolved_by_channel_code():
    a, b = ChannelRef("Zed Zed", "ZZ"), ChannelRef("Alpha Alpha", "AA")
    table = merge_events([[PumpEvent.create("QQQ", "kucoin", a, T0, "USDT")],
                          [PumpEvent.create("QQQ", "kucoin", b, T0, "USDT")]])
    assert [e.channel.code for e in table] == ["AA"]


def test_merge_disambiguates_ids_across_exchanges():
    table = merge_events([[PumpEvent.create("QQQ", "kucoin", OTHER, T0, "USDT"),
                           PumpEvent.create("QQQ", "hotbit", OTHER, T0, "USDT")]])
    assert len({e.id for e in table}) == 2


# cleaning and statistics

def _bulk_table():
    """10687 raw events: 459 delisted coins, 364 on yobit, 673 on pancakeswap, 7920 of the rest from CPI."""
    other = ChannelRef("Other Group", "OG")
    layout = [("binance", CPI, "LIVE", 7920), ("kucoin", other, "LIVE", 1271), ("kucoin", other, "DEAD", 459),
            ("yobit", other, "LIVE", 364), ("pancakeswap", other, "LIVE", 673)]
    events = []
    i = 0
    for ex, ch, prefix, n in layout:
        for _ in range(n):
            events.append(PumpEvent.create(f"{prefix}{i % 97}", ex, ch, T0 + timedelta(minutes=i), QUOTES[ex]))
            i += 1
    return EventTable.from_events(events)


def test_clean_events_counts_and_channel_share():
    table = _bulk_table()
    assert len(table) == 10687
    listings = {"binance": {f"LIVE{k}" for k in range(97)}, "kucoin": {f"LIVE{k}" for k in range(97)}}
    kept, removed = clean_events(table, listings, excluded={"yobit", "pancakeswap"})
    assert len(kept) == 9191
    reasons = {r: sum(1 for x in removed if x.reason == r) for r in ("delisted", "excluded_exchange")}
    assert reasons == {"delisted": 459, "excluded_exchange": 364 + 673}
    top = channel_stats(kept)[0]
    assert top.code == "CPI" and top.pumps == 7920
    assert round(top.share, 2) == 86.17
    assert top.per_coin == 7920 / 97
    assert exchange_counts(kept) == {"binance": 7920, "kucoin": 1271}


def test_clean_events_requires_listing_data():
    table = EventTable.from_events([event(exchange="hotbit")])
    with pytest.raises(CleaningError):
        clean_events(table, {"kucoin": {"ABC"}})
    kept, removed = clean_events(table, {}, excluded={"hotbit"})
    assert len(kept) == 0 and removed[0].reason == "excluded_exchange"


def test_channel_stats_empty():
    with pytest.raises(ValueError):
        channel_stats(EventTable())


def test_pumps_per_coin_distribution():
    events = [event(coin=c, ts=(T0 + timedelta(days=i)).strftime("%Y-%m-%dT%H:%M:%S"))
              for i, c in enumerate(["A1"] * 12 + ["B1"] * 3 + ["C1"] * 55)]
    rows = pumps_per_coin_distribution(EventTable.from_events(events))
    assert rows[0][:2] == ("1-10", 1) and rows[1][:2] == ("11-20", 1) and rows[-1][:2] == ("51+", 1)
    assert sum(r[1] for r in rows) == 3
    assert rows[0][2] == pytest.approx(100 / 3)


def test_event_table_invariants():
    e1 = event(ts="2022-01-02T00:00:00")
    e0 = event(ts="2022-01-01T00:00:00")
    with pytest.raises(ValueError):
        EventTable((e1, e0))
    with pytest.raises(ValueError):
        EventTable((e0, PumpEvent("other-id", e0.coin, e0.exchange, CPI, e0.announced_at, e0.pair)))
    with pytest.raises(ValueError):
        PumpEvent("x", "abc", "kucoin", OTHER, T0, "abc/USDT")
    with pytest.raises(ValueError):
        PumpEvent("x", "ABC", "kucoin", OTHER, T0.replace(tzinfo=None), "ABC/USDT")


# file formats

def test_events_csv_round_trip(tmp_path):
    reg = ChannelRegistry([CPI, OTHER])
    table = EventTable.from_events([event(), event(coin="XYZ", exchange="binance", channel=CPI, quote="BTC")])
    p = tmp_path / "events.csv"
    write_events_csv(p, table)
    back = read_events_csv(p, reg)
    assert back.events == table.events
    assert back.provenance == (str(p),)


def test_empty_events_csv_is_header_only(tmp_path):
    p = tmp_path / "events.csv"
    write_events_csv(p, EventTable())
    assert p.read_text() == ",".join(EVENTS_HEADER) + "\n"
    assert len(read_events_csv(p)) == 0


def test_events_csv_schema_errors(tmp_path):
    good = format_events_csv([event()]).splitlines()
    p = tmp_path / "events.csv"

    p.write_text("id,coin\n")
    with pytest.raises(SchemaError) as ei:
        read_events_csv(p)
    assert ei.value.row == 1

    p.write_text("\n".join([good[0], good[1], good[1].replace("2022-01-01T12:00:00Z", "yesterday")]) + "\n")
    with pytest.raises(SchemaError) as ei:
        read_events_csv(p)
    assert (ei.value.row, ei.value.column) == (3, "announced_at")

    p.write_text("\n".join([good[0], good[1], good[1]]) + "\n")
    with pytest.raises(SchemaError, match="duplicate"):
        read_events_csv(p)


def test_removals_csv(tmp_path):
    from pumpscope.events.table import Removal
    p = tmp_path / "removed.csv"
    write_removals_csv(p, [Removal(event(), "delisted")])
    lines = p.read_text().splitlines()
    assert lines[0].endswith(",reason") and lines[1].endswith(",delisted")


def test_registry_round_trip_and_derived_codes(tmp_path):
    p = tmp_path / "channels.csv"
    p.write_text("name,code,default_exchange,telegram_link\n"
                 "Crypto Pump Island,,Binance,https://t.me/x\n"
                 "Whale Club,WC,,\n")
    reg = load_registry(p)
    assert reg.by_name("Crypto Pump Island") == ChannelRef("Crypto Pump Island", "CPI", "binance", "https://t.me/x")
    out = tmp_path / "out.csv"
    write_registry(out, reg)
    assert [c for c in load_registry(out)] == [c for c in reg]


@pytest.mark.parametrize("body, row, column", [
    ("name,code\n", 1, None),
    ("name,code,default_exchange,telegram_link\nGood Channel,GC,,\n,XX,,\n", 3, "name"),
    ("name,code,default_exchange,telegram_link\nLonely,,,\n", 2, "code"),
])
def test_registry_schema_errors(tmp_path, body, row, column):
    p = tmp_path / "channels.csv"
    p.write_text(body)
    with pytest.raises(SchemaError) as ei:
        load_registry(p)
    assert (ei.value.row, ei.value.column) == (row, column)


@pytest.mark.parametrize("line, column", [
    ("not json", None),
    ("[1, 2]", None),
    ('{"channel_name": "Some Group", "text": "#ABC"}', "timestamp"),
    ('{"channel_name": "Some Group", "timestamp": "2022-01-01T00:00:00", "text": "#ABC"}', "timestamp"),
    ('{"channel_name": "Some Group", "timestamp": "2022-01-01T00:00:00Z", "text": 5}', "text"),
    ('{"channel_name": "Loner", "timestamp": "2022-01-01T00:00:00Z", "text": "#ABC"}', "channel_name"),
])
def test_message_log_schema_errors(tmp_path, line, column):
    p = tmp_path / "log.jsonl"
    p.write_text('{"channel_name": "Some Group", "timestamp": "2022-01-01T00:00:00Z", "text": "#ABC"}\n\n' + line + "\n")
    with pytest.raises(SchemaError) as ei:
        list(read_message_log(p, ChannelRegistry()))
    assert (ei.value.row, ei.value.column) == (3, column)


def test_message_log_registers_unknown_channels(tmp_path):
    p = tmp_path / "log.jsonl"
    p.write_text('{"channel_name": "Fresh Pump Crew", "timestamp": "2022-01-01T01:02:03.9+01:00"}\n')
    reg = ChannelRegistry()
    (msg,) = read_message_log(p, reg)
    assert reg.by_code("FPC").name == "Fresh Pump Crew"
    assert msg.timestamp == datetime(2022, 1, 1, 0, 2, 3, tzinfo=UTC) and msg.text == ""
