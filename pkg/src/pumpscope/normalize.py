"""Re-quoting BTC pairs in USDT and timestamp alignment of series.

Conversion of one bar against the BTC/USDT reference bar at the same
open_time::

    open'   = open  * ref.open
    high'   = high  * typical(ref)
    low'    = low   * typical(ref)
    close'  = close * ref.close          (or * typical(ref), see CLOSE_RULES)
    volume' = volume

where ``typical(bar) = (high + low + close) / 3``. Because high/low use a
different rate than open/close, a converted bar can violate
``low <= open, close <= high``; such bars are widened to the min/max of the
four converted prices and counted as repaired.

Arithmetic is decimal. The typical price is rounded to 28 significant
digits; the products are exact.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from decimal import Context, Decimal

from .errors import PumpscopeError
from .marketdata.candles import Candle, OhlcvSeries, split_pair

log = logging.getLogger(__name__)

TYPICAL_CONTEXT = Context(prec=28)
PRODUCT_CONTEXT = Context(prec=200)

CLOSE_RULES = ("ref_close", "typical")


class ConversionError(PumpscopeError):
    pass


@dataclass(frozen=True)
class ConversionReport:
    series: str
    source_quote: str
    target_quote: str
    input_bars: int
    converted: int
    skipped: int
    repaired: int
    close_rule: str

    def to_dict(self) -> dict:
        return asdict(self)


def typical_price(c: Candle) -> Decimal:
    return TYPICAL_CONTEXT.divide(TYPICAL_CONTEXT.add(TYPICAL_CONTEXT.add(c.high, c.low), c.close), Decimal(3))


def convert_bar(bar: Candle, ref: Candle, close_rule: str = "ref_close") -> tuple[Candle, bool]:
    """Convert one bar; returns the bar and whether high/low had to be widened."""
    mul = PRODUCT_CONTEXT.multiply
    tp = typical_price(ref)
    o = mul(bar.open, ref.open)
    h = mul(bar.high, tp)
    l = mul(bar.low, tp)
    c = mul(bar.close, ref.close if close_rule == "ref_close" else tp)
    repaired = False
    if not (l <= o <= h and l <= c <= h):
        h, l = max(o, h, l, c), min(o, h, l, c)
        repaired = True
    return Candle(bar.open_time, o, h, l, c, bar.volume), repaired


def convert_quote(series: OhlcvSeries, reference: OhlcvSeries,
                  close_rule: str = "ref_close") -> tuple[OhlcvSeries, ConversionReport]:
    """Re-quote ``series`` (BASE/BTC) into the reference's quote (e.g. BASE/USDT).

    Bars without a reference bar at the same open_time are dropped, not
    filled.
    """
    if close_rule not in CLOSE_RULES:
        raise ValueError(f"close_rule must be one of {CLOSE_RULES}")
    if series.granularity != reference.granularity:
        raise ConversionError(
            f"granularity mismatch: {series.granularity.value} vs {reference.granularity.value}")
    if not len(reference):
        raise ConversionError(f"empty reference series {reference.pair} on {reference.exchange}")
    base, quote = split_pair(series.pair)
    ref_base, ref_quote = split_pair(reference.pair)
    if ref_base != quote:
        raise ConversionError(f"reference {reference.pair} does not price {quote}")

    ref_by_time = {c.open_time: c for c in reference.candles}
    out = []
    skipped = repaired = 0
    for bar in series.candles:
        ref = ref_by_time.get(bar.open_time)
        if ref is None:
            skipped += 1
            continue
        conv, fixed = convert_bar(bar, ref, close_rule)
        repaired += fixed
        out.append(conv)
    if repaired:
        log.info("%s %s: widened high/low on %d converted bars", series.exchange, series.pair, repaired)
    report = ConversionReport(
        series=f"{series.exchange}:{series.pair}:{series.granularity.value}",
        source_quote=quote,
        target_quote=ref_quote,
        input_bars=len(series),
        converted=len(out),
        skipped=skipped,
        repaired=repaired,
        close_rule=close_rule,
    )
    return series.with_candles(out, pair=f"{base}/{ref_quote}"), report


def align(a: OhlcvSeries, b: OhlcvSeries) -> list[tuple[int, Candle, Candle]]:
    """Inner join of two series on open_time, in time order."""
    if a.granularity != b.granularity:
        raise ValueError("align needs equal granularities")
    out = []
    i = j = 0
    ca, cb = a.candles, b.candles
    while i < len(ca) and j < len(cb):
        ta, tb = ca[i].open_time, cb[j].open_time
        if ta == tb:
            out.append((ta, ca[i], cb[j]))
            i += 1
            j += 1
        elif ta < tb:
            i += 1
        else:
            j += 1
    return out
