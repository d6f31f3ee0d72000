"""Command-line entry point: benchmark runs and self-verification."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .bench import ExperimentConfig, run_experiment, write_report
from .experiments import experiment_names
from .verify import run_verify

USAGE_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layered-ocp",
        description="Layered optimal-control benchmarks: consensus solver vs vanilla iLQR.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one benchmark experiment and write a report")
    run.add_argument("experiment", help=f"one of: {', '.join(experiment_names())}")
    run.add_argument("--trials", type=int, default=None, help="number of seeded trials (default 20)")
    run.add_argument("--seed", type=int, default=None, help="base RNG seed (default 0)")
    run.add_argument("--horizon", type=int, default=None, help="override the horizon length")
    run.add_argument("--out", default=None, help="report path (default <experiment>_report.<fmt>)")
    run.add_argument("--format", choices=("csv", "json"), default=None, help="report format (default json)")
    run.add_argument("--rho", type=float, default=None, help="override the initial penalty")
    run.add_argument("--max-outer", type=int, default=None, help="override the outer iteration cap")
    run.add_argument("--eps-primal", type=float, default=None, help="override the primal tolerance (on residual^2)")
    run.add_argument("--config", default=None, help="JSON file of defaults; explicit flags win")

    sub.add_parser("verify", help="run the oracle-equivalence checks")
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """Config-file values fill in; command-line flags override."""
    merged = {
        "trials": 20, "seed": 0, "horizon": None, "out": None,
        "format": "json", "rho": None, "max_outer": None, "eps_primal": None,
    }
    if args.config is not None:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {args.config} must hold a JSON object")
        unknown = set(loaded) - set(merged) - {"experiment"}
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update(loaded)
    for key in ("trials", "seed", "horizon", "out", "format", "rho", "max_outer", "eps_primal"):
        val = getattr(args, key)
        if val is not None:
            merged[key] = val
    return merged


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        merged = _merge_config(args)
        cfg = ExperimentConfig(
            experiment=args.experiment,
            trials=merged["trials"],
            seed=merged["seed"],
            horizon=merged["horizon"],
            rho=merged["rho"],
            max_outer=merged["max_outer"],
            eps_primal=merged["eps_primal"],
        )
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR

    report = run_experiment(cfg)
    fmt = merged["format"]
    out = merged["out"] or f"{cfg.experiment.replace('-', '_')}_report.{fmt}"
    try:
        write_report(report, out, fmt)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    agg = report.aggregates
    print(f"experiment: {report.experiment} (trials={cfg.trials}, seed={cfg.seed}, horizon={cfg.resolved_horizon})")
    print(f"  consensus success rate: {agg['admm_success_rate']:.1f}%"
          f"  iterations: {agg['admm_iterations_mean']:.1f} +/- {agg['admm_iterations_std']:.1f}")
    if "baseline_success_rate" in agg:
        print(f"  baseline  success rate: {agg['baseline_success_rate']:.1f}%"
              f"  iterations: {agg['baseline_iterations_mean']:.1f} +/- {agg['baseline_iterations_std']:.1f}")
    print(f"  report written to {out}")

    failed_checks = [
        t.trial for t in report.trials
        if t.admm.oracle_match is not None and not t.admm.oracle_match
    ]
    if failed_checks:
        print(f"embedded oracle check FAILED on trials {failed_checks}", file=sys.stderr)
        return 1
    return 0


def _cmd_verify() -> int:
    results = run_verify()
    failed = 0
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail}")
        failed += 0 if ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_verify()


if __name__ == "__main__":
    sys.exit(main())
