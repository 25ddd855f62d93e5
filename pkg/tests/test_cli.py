import json
import shutil

import pytest

from pumpscope import cli
from pumpscope.events.io import EVENTS_HEADER

from conftest import run_cli


@pytest.fixture
def mini(tmp_path):
    """A config with one channel, an empty message log and an empty replay manifest."""
    (tmp_path / "channels.csv").write_text("name,code,default_exchange,telegram_link\nSolo Pump Group,,kucoin,\n")
    (tmp_path / "log.jsonl").write_text("")
    (tmp_path / "replay.json").write_text('{"exchanges": {"kucoin": {"series": {}}}}')
    doc = {"channel_registry": "channels.csv", "message_logs": ["log.jsonl"], "exchanges": {"kucoin": "USDT"},
           "replay_manifest": "replay.json", "collection_date": "2023-04-22", "split_date": "2022-11-11",
           "output_dir": "out"}
    (tmp_path / "config.json").write_text(json.dumps(doc))
    return tmp_path


@pytest.fixture
def full_copy(cohort_run, tmp_path):
    dst = tmp_path / "run"
    shutil.copytree(cohort_run.root, dst)
    return dst


def test_empty_log_gives_header_only_events(mini, capsys):
    assert cli.main(["parse", "--config", str(mini / "config.json")]) == 0
    assert (mini / "out" / "events.csv").read_text() == ",".join(EVENTS_HEADER) + "\n"
    assert json.loads(capsys.readouterr().out)["events"] == 0
    assert (mini / "out" / "channels.csv").read_text().splitlines()[1].startswith("Solo Pump Group,SPG,kucoin")


def test_input_errors_exit_2(mini, capsys):
    cfg = str(mini / "config.json")
    assert cli.main(["parse", "--config", str(mini / "missing.json")]) == 2
    assert cli.main(["analyze", "--config", cfg]) == 2
    assert "parse" in capsys.readouterr().err
    assert cli.main(["parse", "--config", cfg, "--live", "--replay", str(mini / "replay.json")]) == 2
    (mini / "log.jsonl").write_text('{"channel_name": "Solo Pump Group", "timestamp": "2022-01-01T00:00:00Z"}\n'
                                    '{"channel_name": "Solo Pump Group", "timestamp": "noon"}\n')
    assert cli.main(["parse", "--config", cfg]) == 2
    assert "log.jsonl:2 [timestamp]" in capsys.readouterr().err


def test_missing_stage_input_is_named(mini, capsys):
    assert cli.main(["report", "--config", str(mini / "config.json")]) == 2
    assert "analyze" in capsys.readouterr().err


def test_corrupt_analysis_exits_2(mini, capsys):
    (mini / "out").mkdir()
    (mini / "out" / "analysis.json").write_text("{truncated")
    assert cli.main(["report", "--config", str(mini / "config.json")]) == 2
    assert "analysis.json:1" in capsys.readouterr().err


def test_unknown_exchange_without_listing_data_exits_2(mini):
    (mini / "log.jsonl").write_text('{"channel_name": "Solo Pump Group", "timestamp": "2022-01-01T00:00:00Z", '
                                    '"text": "#ABC"}\n')
    (mini / "replay.json").write_text('{"exchanges": {}}')
    assert cli.main(["parse", "--config", str(mini / "config.json")]) == 2


def test_fetch_rerun_makes_no_requests(full_copy):
    r = run_cli("fetch", "--config", full_copy / "config.json")
    assert r.returncode == 0, r.stderr
    summary = json.loads(r.stdout)
    assert summary["requests"] == {"binance": 0, "hotbit": 0, "kucoin": 0}
    assert summary["unresolved"] == []


def test_unresolved_fetch_exits_3(full_copy):
    manifest = full_copy / "replay" / "manifest.json"
    doc = json.loads(manifest.read_text())
    doc["exchanges"]["kucoin"].setdefault("faults", []).append(
        {"pair": "DMTR/USDT", "granularity": "1h", "times": 10_000})
    manifest.write_text(json.dumps(doc))
    shutil.rmtree(full_copy / "out" / "store")
    r = run_cli("fetch", "--config", full_copy / "config.json")
    assert r.returncode == 3
    assert "unresolved" in r.stderr
    summary = json.loads((full_copy / "out" / "fetch_summary.json").read_text())
    assert summary["unresolved"] and all(u["pair"] == "DMTR/USDT" for u in summary["unresolved"])


def test_report_is_reproducible(full_copy, cohort_run):
    r = run_cli("report", "--config", full_copy / "config.json")
    assert r.returncode == 0
    report = full_copy / "out" / "report"
    (report / "stale.csv").write_text("old")
    run_cli("report", "--config", full_copy / "config.json")
    assert not (report / "stale.csv").exists()
    for p in (cohort_run.out / "report").iterdir():
        assert (report / p.name).read_bytes() == p.read_bytes()
