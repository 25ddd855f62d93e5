import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pumpscope.report import fmt_amount, fmt_pct, offset_table, render, write_report


@pytest.mark.parametrize("v, pct, amount", [
    (None, "", ""),
    (86.1712, "86.17", "86.1712"),
    (-3.14159, "-3.14", "-3.14159"),
    (0.000123456789, "0.00", "0.000123457"),
    (999_999.994, "999999.99", "1e+06"),
    (1_000_000.0, "1.00e+06", "1.00e+06"),
    (-2.5e9, "-2.50e+09", "-2.50e+09"),
])
def test_number_formats(v, pct, amount):
    assert fmt_pct(v) == pct
    assert fmt_amount(v) == amount


@given(st.floats(-1e12, 1e12, allow_nan=False))
def test_pct_format_round_trips_to_two_decimals(v):
    text = fmt_pct(v)
    if abs(v) < 1e6:
        assert float(text) == pytest.approx(round(v, 2), abs=0.005 + 1e-9)
        assert "." in text and len(text.split(".")[1]) == 2
    else:
        assert "e+" in text


def test_offset_table_layout():
    rows = [{"offset": o, "n": n, "mean": m, "median": m, "iqr_mean": m, "average": m}
            for o, n, m in ((7, 3, 101.234), (14, 0, None))]
    assert offset_table(rows, (7, 14)) == (
        "Day,7,14\nMean,101.23,\nMedian,101.23,\nIQR Mean,101.23,\nAverage,101.23,\nn,3,0\n")


def test_render_from_cohort_analysis(cohort_run, tmp_path):
    doc = json.loads((cohort_run.out / "analysis.json").read_text())
    files = render(doc)
    meta = json.loads(files["metadata.json"])
    assert meta["files"] == sorted(n for n in files if n != "metadata.json")
    assert meta["decisions"] == doc["decisions"]
    assert all(text.endswith("\n") and "\r" not in text for text in files.values())
    header = files["event_performance.csv"].splitlines()
    assert len(header) == len(doc["events"]) + 1
    paths = write_report(doc, tmp_path)
    assert sorted(p.name for p in paths) == sorted(files)
