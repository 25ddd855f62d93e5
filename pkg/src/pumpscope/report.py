"""Render an analysis document into the CSV/JSON report bundle.

Output is byte-deterministic: fixed row and column order, fixed float
formatting, ``\\n`` line endings.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

STAT_ROWS = (("Mean", "mean"), ("Median", "median"), ("IQR Mean", "iqr_mean"), ("Average", "average"))
SCI_THRESHOLD = 1e6
GROUP_FILES = {"all": "all", "CPI": "cpi", "nonCPI": "noncpi"}


def fmt_pct(v: float | None) -> str:
    """Percentages and index values: two decimals, scientific from one million up."""
    if v is None:
        return ""
    return f"{v:.2e}" if abs(v) >= SCI_THRESHOLD else f"{v:.2f}"


def fmt_amount(v: float | None) -> str:
    """Prices, volumes and values: six significant digits, scientific from one million up."""
    if v is None:
        return ""
    return f"{v:.2e}" if abs(v) >= SCI_THRESHOLD else f"{v:.6g}"


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def offset_table(rows: Sequence[Mapping], offsets: Sequence[int]) -> str:
    """Statistics down, day offsets across; the last row counts contributing events."""
    by_off = {r["offset"]: r for r in rows}
    out = [[label] + [fmt_pct(by_off[o][key]) for o in offsets] for label, key in STAT_ROWS]
    out.append(["n"] + [str(by_off[o]["n"]) for o in offsets])
    return _csv(["Day", *map(str, offsets)], out)


def grouped_table(groups: Mapping[str, Sequence[Mapping]], offsets: Sequence[int], label: str) -> str:
    out = []
    for name, rows in groups.items():
        by_off = {r["offset"]: r for r in rows}
        for stat, key in STAT_ROWS[:3]:
            out.append([name, stat] + [fmt_pct(by_off[o][key]) for o in offsets])
        out.append([name, "n"] + [str(by_off[o]["n"]) for o in offsets])
    return _csv([label, "statistic", *map(str, offsets)], out)


def profile_table(rows: Sequence[Mapping]) -> str:
    return _csv(["offset", "n", "mean", "median", "iqr_mean"],
                ([r["offset"], r["n"], fmt_pct(r["mean"]), fmt_pct(r["median"]), fmt_pct(r["iqr_mean"])]
                 for r in rows))


def render(doc: Mapping) -> dict[str, str]:
    """File name -> content for every file of the report bundle."""
    offsets = doc["day_offsets"]
    files: dict[str, str] = {}

    files["channels.csv"] = _csv(
        ["code", "name", "pumps", "share_pct", "coins", "pumps_per_coin"],
        ([c["code"], c["name"], c["pumps"], fmt_pct(c["share"]), c["coins"], fmt_pct(c["per_coin"])]
         for c in doc["channels"]))
    files["exchanges.csv"] = _csv(["exchange", "pumps"], sorted(doc["exchanges"].items()))
    files["pumps_per_coin.csv"] = _csv(["pumps", "coins", "share_pct"],
                                       ([label, n, fmt_pct(p)] for label, n, p in doc["pumps_per_coin"]))

    for group, rows in doc["long_term"].items():
        files[f"long_term_{GROUP_FILES[group]}.csv"] = offset_table(rows, offsets)
    for group, rows in doc["profiles"].items():
        files[f"plot_long_term_{GROUP_FILES[group]}.csv"] = profile_table(rows)
    for group, b in doc["binned"].items():
        files[f"binned_{GROUP_FILES[group]}.csv"] = grouped_table(b["rows"], offsets, "bin")
        files[f"bin_sizes_{GROUP_FILES[group]}.csv"] = _csv(["bin", "coins"], b["bins"].items())
    for group, rows in doc["nth_pump"].items():
        files[f"nth_pump_{GROUP_FILES[group]}.csv"] = grouped_table(rows, offsets, "pump")

    files["event_performance.csv"] = _csv(
        ["id", "coin", "exchange", "channel", "announced_at", "delta_p", "delta_v", "baseline_price",
         "baseline_volume", "baseline_days", "max_price", "pump_volume", "pre_value", "total_value",
         "censor_at", "censored_length", "censored_end"],
        ([e["id"], e["coin"], e["exchange"], e["channel"], e["announced_at"], fmt_pct(e["delta_p"]),
          fmt_pct(e["delta_v"]), fmt_amount(e["baseline_price"]), fmt_amount(e["baseline_volume"]),
          "" if e["baseline_days"] is None else e["baseline_days"], fmt_amount(e["max_price"]),
          fmt_amount(e["pump_volume"]), fmt_amount(e["pre_value"]), fmt_amount(e["total_value"]),
          "" if e["censor_at"] is None else e["censor_at"], e["censored_length"], e["censored_end"] or ""]
         for e in doc["events"]))

    files.update(_event_window_files(doc["event_window"]))

    files["coin_summary.csv"] = _csv(
        ["coin", "pumps", "cpi_pumps", "cpi_dominant", "mean_delta_p", "market_cap_usd", "volume_usd",
         "as_of_date"],
        ([c["coin"], c["pumps"], c["cpi_pumps"], "1" if c["cpi_dominant"] else "0", fmt_pct(c["mean_delta_p"]),
          fmt_amount(c["market_cap_usd"]), fmt_amount(c["volume_usd"]), c["as_of_date"] or ""]
         for c in doc["coins"]))

    meta = {
        "version": doc["version"],
        "config_sha256": doc["config_sha256"],
        "decisions": doc["decisions"],
        "horizon_days": doc["horizon_days"],
        "day_offsets": offsets,
        "counts": doc["counts"],
        "conversions": doc["conversions"],
        "warnings": doc["warnings"],
        "files": sorted(files),
    }
    files["metadata.json"] = json.dumps(meta, indent=1, sort_keys=True) + "\n"
    return files


def _event_window_files(w: Mapping) -> dict[str, str]:
    files = {}
    files["event_window_counts.csv"] = _csv(
        ["period", "number", "proportion", "time_proportion", "pumps_per_week"],
        ([label.capitalize(), w[label]["count"], fmt_pct(w[label]["proportion"]),
          fmt_pct(w[label]["time_proportion"]), fmt_pct(w[label]["pumps_per_week"])]
         for label in ("before", "after")))
    exchanges = sorted(w["exchange_shares"])
    files["event_window_exchanges.csv"] = _csv(
        ["period", *exchanges],
        ([label.capitalize()] + [fmt_pct(w["exchange_shares"][ex][label]) for ex in exchanges]
         for label in ("before", "after")))
    weekly = w["weekly"]
    keys = ["all", *sorted(k for k in weekly["counts"] if k != "all")]
    rows = [[wk] + [weekly["counts"][k][i] for k in keys] for i, wk in enumerate(weekly["weeks"])]
    rows.append(["mean_before"] + [fmt_pct(weekly["before_mean"][k]) for k in keys])
    rows.append(["mean_after"] + [fmt_pct(weekly["after_mean"][k]) for k in keys])
    files["event_window_weekly.csv"] = _csv(["week", *keys], rows)

    perf = w["performance"]
    if perf:
        groups = ("CPI", "nonCPI")
        files["event_window_performance.csv"] = _csv(
            ["period", "delta_p_CPI", "delta_p_nonCPI", "delta_v_CPI", "delta_v_nonCPI"],
            ([label.capitalize()] + [fmt_pct(perf[g][m][label]) for m in ("delta_p", "delta_v") for g in groups]
             for label in ("before", "after")))
        files["event_window_prices_volumes.csv"] = _csv(
            ["row", "pre_CPI", "pre_nonCPI", "during_CPI", "during_nonCPI"],
            ([name] + [fmt_pct(perf[g][f"{phase}_{metric}"]["change"]) for phase in ("pre", "during")
                       for g in groups]
             for name, metric in (("Price", "price"), ("Volume", "volume"))))
        rows = [[label.capitalize()] + [fmt_amount(perf[g][f"{phase}_value"][label]) for g in groups
                                        for phase in ("pre", "during")]
                for label in ("before", "after")]
        rows.append(["Change"] + [fmt_pct(perf[g][f"{phase}_value"]["change"]) for g in groups
                                  for phase in ("pre", "during")])
        files["event_window_value.csv"] = _csv(
            ["period", "CPI_pre", "CPI_during", "nonCPI_pre", "nonCPI_during"], rows)
    return files


def write_report(doc: Mapping, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = render(doc)
    for stale in out.iterdir():
        if stale.is_file() and stale.name not in files:
            stale.unlink()
    paths = []
    for name, text in sorted(files.items()):
        p = out / name
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths
