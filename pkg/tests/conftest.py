from __future__ import annotations

import shutil
import subprocess
import sys
import time
from datetime import date, datetime
from decimal import Decimal
from pathlib import Path

import pytest

from pumpscope.events.model import ChannelRef, PumpEvent
from pumpscope.marketdata.candles import Candle, Granularity, OhlcvSeries
from pumpscope.timeutil import DAY_MS, UTC, day_ms

TESTS = Path(__file__).parent
GOLDEN = TESTS / "cohort" / "golden"
STAGES = ("parse", "listings", "fetch", "analyze", "report")

CPI = ChannelRef("Crypto Pump Island", "CPI", "binance")
OTHER = ChannelRef("Other Signals", "OS", "kucoin")


def candle(t: int, o, h=None, l=None, c=None, v=1) -> Candle:
    o = Decimal(str(o))
    c = o if c is None else Decimal(str(c))
    h = max(o, c) if h is None else Decimal(str(h))
    l = min(o, c) if l is None else Decimal(str(l))
    return Candle(t, o, h, l, c, Decimal(str(v)))


def daily_series(start: date, closes, volumes=None, exchange="ex", pair="ABC/USDT", skip=()) -> OhlcvSeries:
    """Flat daily bars with the given closes; ``None`` entries and indices in ``skip`` are left out."""
    bars = []
    for i, c in enumerate(closes):
        if c is None or i in skip:
            continue
        v = 1 if volumes is None else volumes[i]
        bars.append(candle(day_ms(start) + i * DAY_MS, c, v=v))
    return OhlcvSeries(exchange, pair, Granularity.DAY, tuple(bars))


def event(coin="ABC", exchange="kucoin", ts="2022-01-01T12:00:00", channel=OTHER, quote="USDT") -> PumpEvent:
    at = datetime.fromisoformat(ts).replace(tzinfo=UTC)
    return PumpEvent.create(coin, exchange, channel, at, quote)


def run_cli(*args, cwd=None) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "pumpscope.cli", *map(str, args)],
                          capture_output=True, text=True, cwd=cwd)


class PipelineRun:
    def __init__(self, root: Path, truth: dict, timings: dict, results: dict):
        self.root = root
        self.truth = truth
        self.timings = timings
        self.results = results

    @property
    def out(self) -> Path:
        return self.root / "out"

    @property
    def config(self) -> Path:
        return self.root / "config.json"

    @property
    def elapsed(self) -> float:
        return sum(self.timings.values())


@pytest.fixture(scope="session")
def cohort_run(tmp_path_factory) -> PipelineRun:
    """Generate the synthetic cohort and run every stage once, timing parse through report."""
    from cohort.generate import generate

    root = tmp_path_factory.mktemp("cohort")
    truth = generate(root)
    timings, results = {}, {}
    for stage in STAGES:
        t0 = time.perf_counter()
        results[stage] = run_cli(stage, "--config", root / "config.json")
        timings[stage] = time.perf_counter() - t0
    return PipelineRun(root, truth, timings, results)


@pytest.fixture
def cohort_copy(cohort_run, tmp_path) -> Path:
    """A private copy of the generated cohort inputs (no outputs)."""
    dst = tmp_path / "cohort"
    shutil.copytree(cohort_run.root, dst, ignore=shutil.ignore_patterns("out"))
    return dst
