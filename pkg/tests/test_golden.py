"""End-to-end run over the generated cohort, checked against the frozen report and the generator's truth."""

import json

import pytest

from conftest import GOLDEN, STAGES

REL = 1e-6


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_every_stage_succeeds(cohort_run):
    for stage in STAGES:
        r = cohort_run.results[stage]
        assert r.returncode == 0, (stage, r.stderr)
    assert cohort_run.elapsed < 60


def test_report_matches_golden_bytes(cohort_run):
    produced = {p.name: p.read_bytes() for p in (cohort_run.out / "report").iterdir()}
    frozen = {p.name: p.read_bytes() for p in GOLDEN.iterdir()}
    assert sorted(produced) == sorted(frozen)
    for name in frozen:
        assert produced[name] == frozen[name], name


@pytest.fixture(scope="module")
def analysis(cohort_run):
    return json.loads((cohort_run.out / "analysis.json").read_text())


def test_event_table_matches_truth(cohort_run, analysis):
    truth = cohort_run.truth
    parse = json.loads((cohort_run.out / "parse_summary.json").read_text())
    assert parse["events"] == truth["event_count"]
    assert parse["merged"] == truth["raw_announcements"]
    assert parse["removed"] == truth["removed"]
    assert {e["id"] for e in analysis["events"]} == set(truth["events"])


def test_per_event_metrics_match_truth(cohort_run, analysis):
    truth = cohort_run.truth["events"]
    for e in analysis["events"]:
        t = truth[e["id"]]
        for key in ("delta_p", "delta_v", "baseline_price", "baseline_volume"):
            assert _rel(e[key], t[key]) < REL, (e["id"], key)
        assert e["censor_at"] == t["censor_at"]
        assert e["censored_length"] == t["censored_length"]


def test_aggregates_match_truth(cohort_run, analysis):
    truth = cohort_run.truth["aggregates"]
    for group, rows in analysis["long_term"].items():
        for row in rows:
            t = truth[group].get(str(row["offset"]))
            if t is None:
                assert row["n"] == 0
                continue
            assert row["n"] == t["n"]
            for key in ("mean", "median", "iqr_mean"):
                if t[key] is None:
                    assert row[key] is None
                else:
                    assert _rel(row[key], t[key]) < REL, (group, row["offset"], key)


def test_fetch_was_complete(cohort_run):
    summary = json.loads((cohort_run.out / "fetch_summary.json").read_text())
    assert summary["unresolved"] == [] and summary["tier_errors"] == {}
