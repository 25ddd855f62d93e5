"""``pumpscope`` command line.

Exit codes: 0 success (possibly with warnings), 2 invalid input or
configuration, 3 ingestion left data unresolved.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, PumpscopeError, SchemaError
from .events.table import CleaningError
from .pipeline import Workspace, make_clients, run_analyze, run_fetch, run_listings, run_parse
from .report import write_report

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INGESTION = 3

log = logging.getLogger("pumpscope")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pumpscope", description="Pump-and-dump event and price-impact pipeline")
    p.add_argument("command", choices=["parse", "listings", "fetch", "analyze", "report"])
    p.add_argument("--config", required=True, type=Path, help="pipeline config (JSON)")
    p.add_argument("--replay", type=Path, help="replay manifest overriding the config's")
    p.add_argument("--live", action="store_true", help="query real exchanges through ccxt")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.live and args.replay:
        print("error: --live and --replay are mutually exclusive", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg = load_config(args.config)
        ws = Workspace(cfg.output_dir)
        if args.command in ("parse", "listings", "fetch"):
            clients = make_clients(cfg, args.replay, args.live)
        if args.command == "parse":
            summary = run_parse(cfg, clients)
        elif args.command == "listings":
            summary = run_listings(cfg, clients)
        elif args.command == "fetch":
            summary = run_fetch(cfg, clients)
            if summary["unresolved"]:
                print(f"error: {len(summary['unresolved'])} sub-range(s) unresolved after retries; "
                      f"see {ws.gaps} and {ws.fetch_summary}", file=sys.stderr)
                return EXIT_INGESTION
        elif args.command == "analyze":
            doc = run_analyze(cfg)
            summary = {"counts": doc["counts"], "warnings": len(doc["warnings"])}
            for w in doc["warnings"]:
                log.warning("%s", w)
        else:
            src = ws.require(ws.analysis, "analyze")
            try:
                doc = json.loads(src.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise SchemaError(src, f"not valid JSON ({exc.msg})", row=exc.lineno) from exc
            paths = write_report(doc, ws.report)
            summary = {"files": len(paths), "report": str(ws.report)}
    except (SchemaError, ConfigError, CleaningError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PumpscopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGESTION if args.command in ("listings", "fetch") else EXIT_INPUT
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
