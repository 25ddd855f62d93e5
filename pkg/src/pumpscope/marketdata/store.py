"""Candle store keyed by (exchange, pair, granularity), optionally persisted as CSV files.

Alongside the bars, the store remembers which time ranges have been fully
requested ("covered"), so a restarted fetch skips ranges that are known to
be complete even when they legitimately contain no bars.
"""

from __future__ import annotations

import json
import os
import threading
from collections import defaultdict
from pathlib import Path
from typing import Iterable

from ..errors import PumpscopeError
from .candles import Candle, Granularity, InvalidSeries, OhlcvSeries, parse_series_filename, \
    read_candles_csv, series_filename, format_candles_csv
from .intervals import Interval, normalize, subtract

COVERAGE_FILE = "coverage.json"

Key = tuple[str, str, Granularity]


class StoreError(PumpscopeError):
    pass


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class CandleStore:
    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None
        self._bars: dict[Key, dict[int, Candle]] = {}
        self._coverage: dict[Key, list[Interval]] = defaultdict(list)
        self._locks: dict[Key, threading.Lock] = defaultdict(threading.Lock)
        self._meta_lock = threading.Lock()
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            self._load()

    def _load(self) -> None:
        for path in sorted(self.root.glob("*__*__*.csv")):
            key = parse_series_filename(path.name)
            self._bars[key] = {c.open_time: c for c in read_candles_csv(path)}
        cov = self.root / COVERAGE_FILE
        if cov.exists():
            for row in json.loads(cov.read_text(encoding="utf-8")):
                key = (row["exchange"], row["pair"], Granularity(row["granularity"]))
                self._coverage[key] = normalize(tuple(iv) for iv in row["ranges"])

    def _persist(self, key: Key) -> None:
        if self.root is None:
            return
        ex, pair, gran = key
        bars = self._bars.get(key, {})
        _atomic_write(self.root / series_filename(ex, pair, gran),
                      format_candles_csv(bars[t] for t in sorted(bars)))
        with self._meta_lock:
            rows = [
                {"exchange": k[0], "pair": k[1], "granularity": k[2].value, "ranges": [list(iv) for iv in v]}
                for k, v in sorted(self._coverage.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value))
                if v
            ]
            _atomic_write(self.root / COVERAGE_FILE, json.dumps(rows, indent=1, sort_keys=True) + "\n")

    def put(self, series: OhlcvSeries, covered: Iterable[Interval] = ()) -> None:
        """Merge ``series`` into the store, newer bars replacing older ones at equal open_time.

        The merge is validated as a whole; on failure nothing changes.
        """
        key = series.key
        with self._locks[key]:
            merged = dict(self._bars.get(key, {}))
            merged.update((c.open_time, c) for c in series.candles)
            try:
                OhlcvSeries(*key, tuple(merged[t] for t in sorted(merged)))
            except InvalidSeries as exc:
                raise StoreError(f"rejected merge into {key}: {exc}") from None
            self._bars[key] = merged
            cov = list(self._coverage[key]) + list(covered)
            self._coverage[key] = normalize(cov)
            self._persist(key)

    def get(self, exchange: str, pair: str, granularity: Granularity | str,
            start_ms: int | None = None, end_ms: int | None = None) -> OhlcvSeries:
        key = (exchange, pair, Granularity(granularity))
        bars = self._bars.get(key, {})
        times = sorted(t for t in bars
                       if (start_ms is None or t >= start_ms) and (end_ms is None or t < end_ms))
        return OhlcvSeries(exchange, pair, key[2], tuple(bars[t] for t in times))

    def coverage(self, exchange: str, pair: str, granularity: Granularity | str) -> list[Interval]:
        return list(self._coverage.get((exchange, pair, Granularity(granularity)), []))

    def missing(self, exchange: str, pair: str, granularity: Granularity | str,
                start_ms: int, end_ms: int) -> list[Interval]:
        return subtract((start_ms, end_ms), self.coverage(exchange, pair, granularity))

    def keys(self) -> list[Key]:
        return sorted(self._bars, key=lambda k: (k[0], k[1], k[2].value))
