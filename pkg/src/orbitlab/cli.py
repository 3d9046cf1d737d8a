"""Command-line experiment runner and reporter.

Subcommands: ``reproduce <prop-id>``, ``depbound``, ``twin-quotient IN OUT``,
``constants``.  All state comes from flags and config files; a seed is always
explicit, so identical invocations give bit-identical reports.  Exit codes:
0 all gates passed, 1 a statistical gate failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import analytics as an
from .arrays import BudgetError
from .experiments import (
    ConfigError,
    DEFAULTS,
    Report,
    run_depbound,
    run_reproduce,
    run_twin_quotient,
)
from .kernelspace import ToleranceError

EXIT_PASS = 0
EXIT_STAT_FAIL = 1
EXIT_USAGE = 2


def _load_config(path: Optional[str]) -> Optional[Dict[str, Any]]:
    if path is None:
        return None
    try:
        with open(path) as f:
            cfg = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return cfg


def _report_csv_rows(report: Report) -> List[Dict[str, Any]]:
    return [row.as_dict() for row in report.rows]


def _write_report(report: Report, out_dir: Optional[str], fmt: str) -> None:
    text_lines = []
    for row in report.rows:
        flag = "PASS" if row.passed else "FAIL"
        text_lines.append(
            f"{flag} {report.experiment:<18} {row.case:<22} {row.metric:<42} "
            f"estimate={row.estimate:.10g} se={row.se:.4g} "
            f"oracle=[{row.oracle_lo:.10g}, {row.oracle_hi:.10g}]  ({row.rule})"
        )
    print("\n".join(text_lines))
    print(f"{'PASS' if report.passed else 'FAIL'} {report.experiment}: "
          f"{sum(r.passed for r in report.rows)}/{len(report.rows)} gates")
    if out_dir is None:
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / f"{report.experiment}.json"
        with open(path, "w") as f:
            json.dump(report.as_dict(), f, indent=1, sort_keys=True)
            f.write("\n")
    else:
        path = out / f"{report.experiment}.csv"
        rows = _report_csv_rows(report)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            for r in rows:
                writer.writerow(r)
    print(f"report written to {path}")


def _cmd_reproduce(args) -> int:
    config = _load_config(args.config) or {}
    if args.seed is not None:
        config["seed"] = args.seed
    if args.samples is not None:
        config["samples"] = args.samples
    report = run_reproduce(args.prop_id, config)
    _write_report(report, args.out, args.format)
    return EXIT_PASS if report.passed else EXIT_STAT_FAIL


def _cmd_depbound(args) -> int:
    config = _load_config(args.config) or {}
    if args.seed is not None:
        config["seed"] = args.seed
    if args.samples is not None:
        config["samples"] = args.samples
    report = run_depbound(config)
    _write_report(report, args.out, args.format)
    return EXIT_PASS if report.passed else EXIT_STAT_FAIL


def _cmd_twin_quotient(args) -> int:
    try:
        summary = run_twin_quotient(args.input, args.output, args.tol)
    except (ValueError, ToleranceError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(summary, indent=1, sort_keys=True))
    return EXIT_PASS if summary["law_check"] == "PASS" else EXIT_STAT_FAIL


def _cmd_constants(args) -> int:
    table = an.constants_table()
    if args.format == "csv":
        writer = csv.writer(sys.stdout)
        writer.writerow(["constant", "value"])
        for key in sorted(table):
            writer.writerow([key, f"{table[key]:.17g}"])
    else:
        print(json.dumps(table, indent=1, sort_keys=True))
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbitlab",
        description="Orbit distance-array experiments: reproduce named results, "
                    "compute dependence lower bounds, and quotient kernel spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--samples", type=int, help="sample count (overrides config)")
    common.add_argument("--out", help="directory for report files")
    common.add_argument("--format", choices=["csv", "json"], default="csv",
                        help="report file format (default csv)")

    rep = sub.add_parser("reproduce", parents=[common],
                         help="run one named experiment against its oracles")
    rep.add_argument("prop_id", choices=sorted(DEFAULTS), metavar="prop-id",
                     help=f"one of: {', '.join(sorted(DEFAULTS))}")
    rep.set_defaults(fn=_cmd_reproduce)

    dep = sub.add_parser("depbound", parents=[common],
                         help="dependence-coefficient lower bounds over a joining family")
    dep.set_defaults(fn=_cmd_depbound)

    twq = sub.add_parser("twin-quotient", help="twin-free quotient of a kernel-space file")
    twq.add_argument("input", help="input kernel-space JSON file")
    twq.add_argument("output", help="output path for the quotient space")
    twq.add_argument("--tol", type=float, default=None,
                     help="twin tolerance (default: 0 for exact masses, 1e-9 otherwise)")
    twq.set_defaults(fn=_cmd_twin_quotient)

    con = sub.add_parser("constants", help="dump the analytic oracle table")
    con.add_argument("--format", choices=["csv", "json"], default="json")
    con.set_defaults(fn=_cmd_constants)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, BudgetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
