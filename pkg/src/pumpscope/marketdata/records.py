"""CSV records produced by ingestion: gap logs and listing dates."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable

from ..errors import SchemaError
from ..timeutil import parse_day
from .fetch import GapRecord, ListingDate

GAP_HEADER = ["exchange", "pair", "granularity", "gap_start_ms", "gap_end_ms"]
LISTING_HEADER = ["exchange", "pair", "date", "confidence", "probes"]


def format_gap_log(records: Iterable[GapRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GAP_HEADER)
    rows = sorted({(r.exchange, r.pair, r.granularity.value, r.gap.start_ms, r.gap.end_ms) for r in records})
    w.writerows(rows)
    return buf.getvalue()


def write_gap_log(path: str | Path, records: Iterable[GapRecord]) -> None:
    Path(path).write_text(format_gap_log(records), encoding="utf-8")


def write_listings(path: str | Path, listings: Iterable[ListingDate]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LISTING_HEADER)
    for l in sorted(listings, key=lambda l: (l.exchange, l.pair)):
        w.writerow([l.exchange, l.pair, l.date.isoformat(), l.confidence, l.probes])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_listings(path: str | Path) -> dict[tuple[str, str], ListingDate]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != LISTING_HEADER:
            raise SchemaError(path, f"expected header {','.join(LISTING_HEADER)}", row=1)
        for rowno, row in enumerate(reader, start=2):
            try:
                d = parse_day(row["date"])
            except ValueError as exc:
                raise SchemaError(path, str(exc), row=rowno, column="date") from None
            if row["confidence"] not in ("exact", "bounded"):
                raise SchemaError(path, "confidence must be exact or bounded", row=rowno, column="confidence")
            try:
                probes = int(row["probes"])
            except ValueError:
                raise SchemaError(path, "probes must be an integer", row=rowno, column="probes") from None
            out[(row["exchange"], row["pair"])] = ListingDate(row["exchange"], row["pair"], d,
                                                             row["confidence"], probes)
    return out
