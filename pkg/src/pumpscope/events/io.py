"""Readers and writers for message logs, the channel registry and event tables."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from ..errors import SchemaError
from ..timeutil import format_utc, parse_utc
from .model import ChannelCodeError, ChannelRef, ChannelRegistry, EventTable, PumpEvent, RawMessage
from .table import Removal, resolve_channel

REGISTRY_HEADER = ["name", "code", "default_exchange", "telegram_link"]
EVENTS_HEADER = ["id", "channel_code", "coin", "exchange", "pair", "announced_at"]
REMOVALS_HEADER = EVENTS_HEADER + ["reason"]


def _check_header(path, got, expected):
    if got is None:
        raise SchemaError(path, "missing header row", row=1)
    if list(got) != expected:
        raise SchemaError(path, f"expected header {','.join(expected)}, got {','.join(got)}", row=1)


def load_registry(path: str | Path, overrides: Mapping[str, str] | None = None) -> ChannelRegistry:
    """Read ``name,code,default_exchange,telegram_link`` rows; blank codes are derived from the name."""
    registry = ChannelRegistry()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_header(path, reader.fieldnames, REGISTRY_HEADER)
        for rowno, row in enumerate(reader, start=2):
            name = (row["name"] or "").strip()
            if not name:
                raise SchemaError(path, "empty channel name", row=rowno, column="name")
            try:
                code = (row["code"] or "").strip()
                if not code:
                    code = resolve_channel(name, ChannelRegistry(), overrides).code
                registry.add(ChannelRef(
                    name=name,
                    code=code,
                    default_exchange=(row["default_exchange"] or "").strip().lower() or None,
                    link=(row["telegram_link"] or "").strip(),
                ))
            except ChannelCodeError as exc:
                raise SchemaError(path, str(exc), row=rowno, column="code") from None
    return registry


def write_registry(path: str | Path, registry: ChannelRegistry) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REGISTRY_HEADER)
    for ch in sorted(registry, key=lambda c: c.code):
        w.writerow([ch.name, ch.code, ch.default_exchange or "", ch.link])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_message_log(path: str | Path, registry: ChannelRegistry,
                     overrides: Mapping[str, str] | None = None) -> Iterator[RawMessage]:
    """Yield messages from a JSON-lines export with ``channel_name``, ``timestamp`` and ``text``."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(path, f"invalid JSON: {exc.msg}", row=lineno) from None
            if not isinstance(rec, dict):
                raise SchemaError(path, "record is not an object", row=lineno)
            for col in ("channel_name", "timestamp"):
                if not isinstance(rec.get(col), str) or not rec[col].strip():
                    raise SchemaError(path, "missing or empty field", row=lineno, column=col)
            try:
                ts = parse_utc(rec["timestamp"])
            except ValueError as exc:
                raise SchemaError(path, str(exc), row=lineno, column="timestamp") from None
            text = rec.get("text") or ""
            if not isinstance(text, str):
                raise SchemaError(path, "text must be a string", row=lineno, column="text")
            try:
                channel = resolve_channel(rec["channel_name"].strip(), registry, overrides)
            except ChannelCodeError as exc:
                raise SchemaError(path, str(exc), row=lineno, column="channel_name") from None
            yield RawMessage(channel, ts, text)


def _event_row(e: PumpEvent) -> list[str]:
    return [e.id, e.channel.code, e.coin, e.exchange, e.pair, format_utc(e.announced_at)]


def format_events_csv(events: Iterable[PumpEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENTS_HEADER)
    for e in events:
        w.writerow(_event_row(e))
    return buf.getvalue()


def write_events_csv(path: str | Path, table: EventTable | Iterable[PumpEvent]) -> None:
    Path(path).write_text(format_events_csv(table), encoding="utf-8")


def write_removals_csv(path: str | Path, removals: Iterable[Removal]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REMOVALS_HEADER)
    for r in removals:
        w.writerow(_event_row(r.event) + [r.reason])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_events_csv(path: str | Path, registry: ChannelRegistry | None = None) -> EventTable:
    events = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_header(path, reader.fieldnames, EVENTS_HEADER)
        for rowno, row in enumerate(reader, start=2):
            code = row["channel_code"]
            channel = registry.by_code(code) if registry else None
            try:
                if channel is None:
                    channel = ChannelRef(name=code, code=code)
                ts = parse_utc(row["announced_at"])
            except (ValueError, ChannelCodeError) as exc:
                col = "announced_at" if isinstance(exc, ValueError) else "channel_code"
                raise SchemaError(path, str(exc), row=rowno, column=col) from None
            try:
                events.append(PumpEvent(row["id"], row["coin"], row["exchange"], channel, ts, row["pair"]))
            except ValueError as exc:
                raise SchemaError(path, str(exc), row=rowno) from None
    try:
        return EventTable(tuple(events), (str(path),))
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from None
