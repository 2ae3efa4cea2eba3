"""``mollns`` command line: run, sweep, diagnose, report, validate.

Every failure exits nonzero and writes one JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from mollns import __version__
from mollns.config import apply_overrides, check_schema, load_config
from mollns.diagnostics import DiagnosticsConfig, diagnose
from mollns.errors import BlowUpError, ConfigError, SchemaError
from mollns.ledger import TimeSeriesLedger
from mollns.solver import SimConfig, run, run_key
from mollns.sweeps import CACHE_ENV, SweepPlan, run_and_save

EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_MISSING = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_FAILURE, kind: str = "error", details: dict | None = None):
        super().__init__(message)
        self.code = code
        self.kind = kind
        self.details = details or {}


def _emit(obj: dict):
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def _load(path: str, overrides: list[str]) -> dict:
    data = load_config(path)
    data = apply_overrides(data, overrides)
    check_schema(data, path)
    return data


# ------------------------------------------------------------------ commands


def cmd_run(args) -> int:
    data = _load(args.config, args.set)
    config = SimConfig.from_dict(data)
    key = run_key(config)
    out = Path(args.out) if args.out else Path(os.environ.get(CACHE_ENV, "runs")) / key
    ledger = run(config)
    ledger.save(out)
    E = ledger.E
    _emit(
        {
            "run_key": key,
            "directory": str(out),
            "samples": len(ledger),
            "E0": float(E[0]),
            "E_final": float(E[-1]),
            "energy_budget_relative": ledger.meta["energy_budget_residual"] / float(E[0]) if E[0] > 0 else 0.0,
            "wall_seconds": ledger.meta["wall_seconds"],
        }
    )
    return 0


def cmd_sweep(args) -> int:
    data = _load(args.plan, args.set)
    if args.out:
        data["output_dir"] = args.out
    plan = SweepPlan.from_dict(data)
    report = run_and_save(plan, jobs=args.jobs)
    _emit(
        {
            "report": str(Path(plan.output_dir) / "report"),
            "runs": len(report.runs),
            "H_limits": [
                {k: r[k] for k in ("variant", "s", "t", "K", "value", "slope", "fit_residual", "converged")}
                for r in report.h_limits
            ],
            "inclusion_holds": report.inclusion.get("holds"),
        }
    )
    return 0


def cmd_diagnose(args) -> int:
    path = Path(args.ledger)
    if not path.exists():
        raise CliError(f"no ledger at {path}", EXIT_MISSING, "missing-input")
    ledger = TimeSeriesLedger.load(path)
    if args.config:
        cfg_data = _load(args.config, args.set)
    else:
        cfg_data = apply_overrides({}, args.set)
    cfg = DiagnosticsConfig.from_dict(cfg_data)
    report = diagnose(ledger, cfg)
    out = Path(args.out) if args.out else (path if path.is_dir() else path.parent) / "diagnostics"
    report.save(out)
    summary = report.to_dict()
    _emit(
        {
            "directory": str(out),
            "energy_budget_relative": summary["budget"]["relative"],
            "identity_max_residual": max((r["weighted_identity_residual"] for r in report.weighted), default=0.0),
            "uniform_bound_ratio": summary["uniform_bound"]["ratio"],
            "log_convexity": summary["log_convexity"].get("convex"),
        }
    )
    return 0


def _find_runs(sweep_dir: Path) -> list[Path]:
    roots = [sweep_dir / "runs"]
    if os.environ.get(CACHE_ENV):
        roots.append(Path(os.environ[CACHE_ENV]))
    sweep_json = sweep_dir / "report" / "sweep.json"
    wanted = None
    if sweep_json.exists():
        wanted = {r["run_key"] for r in json.loads(sweep_json.read_text()).get("runs", [])}
    found = {}
    for root in roots:
        if root.is_dir():
            for d in sorted(root.iterdir()):
                if (d / "ledger.csv").exists() and (wanted is None or d.name in wanted):
                    found.setdefault(d.name, d)
    return [found[k] for k in sorted(found)]


def cmd_report(args) -> int:
    sweep_dir = Path(args.sweep_dir)
    runs = _find_runs(sweep_dir) if sweep_dir.is_dir() else []
    if not runs:
        raise CliError(f"no runs found in {sweep_dir}", EXIT_MISSING, "missing-input")
    out = Path(args.out) if args.out else sweep_dir / "report" / "figures"
    from mollns.figures import write_report

    sweep_json = sweep_dir / "report" / "sweep.json"
    sweep = json.loads(sweep_json.read_text()) if sweep_json.exists() else None
    ledgers = [TimeSeriesLedger.load(d, with_snapshots=False) for d in runs]
    files = write_report(ledgers, sweep, out)
    _emit({"directory": str(out), "files": [str(f) for f in files]})
    return 0


def cmd_validate(args) -> int:
    from mollns.validation import validate

    result = validate()
    for c in result.checks:
        print(c.line())
    print(f"{'PASS' if result.passed else 'FAIL'}  {len(result.checks)} checks in {result.seconds:.1f}s")
    return 0 if result.passed else EXIT_FAILURE


# ------------------------------------------------------------------ plumbing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mollns", description="Mollified Navier-Stokes laboratory on the torus.")
    p.add_argument("--version", action="version", version=f"mollns {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def overrides(sp):
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="dotted config override")

    sp = sub.add_parser("run", help="integrate one configuration and write its ledger")
    sp.add_argument("config")
    sp.add_argument("--out", help="run directory (default: $MOLLNS_CACHE_DIR/<key> or runs/<key>)")
    overrides(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="execute an m-sweep plan and write report/")
    sp.add_argument("plan")
    sp.add_argument("--jobs", type=int, default=None, help="worker processes")
    sp.add_argument("--out", help="output directory (overrides the plan's output_dir)")
    overrides(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("diagnose", help="evaluate identities and inequalities on a ledger")
    sp.add_argument("ledger", help="run directory or ledger.csv")
    sp.add_argument("--config", help="diagnostics config file")
    sp.add_argument("--out")
    overrides(sp)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("report", help="figures and summary tables for a sweep directory")
    sp.add_argument("sweep_dir")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("validate", help="run the oracle agreement suite")
    sp.set_defaults(func=cmd_validate)
    return p


def _error(kind: str, message: str, code: int, details: dict | None = None) -> int:
    record = {"error": {"type": kind, "message": message, "exit_code": code}}
    if details:
        record["error"]["details"] = details
    print(json.dumps(record, default=str), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except CliError as exc:
        return _error(exc.kind, str(exc), exc.code, exc.details)
    except SchemaError as exc:
        return _error("schema-mismatch", str(exc), EXIT_CONFIG)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    except BlowUpError as exc:
        return _error("blow-up", str(exc), EXIT_BLOWUP, {"t": exc.t, "sup_norm": exc.value, "config": exc.config})
    except FileNotFoundError as exc:
        return _error("missing-input", str(exc), EXIT_MISSING)
    except (ValueError, KeyError) as exc:
        return _error("invalid-input", str(exc), EXIT_FAILURE)


if __name__ == "__main__":
    sys.exit(main())
