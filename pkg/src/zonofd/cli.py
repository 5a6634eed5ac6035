"""Command line entry point.

Subcommands: ``run`` (single scenario), ``grid`` (constant-input grid),
``compare`` (joint design vs a PFD input grid).  Exit codes: 0 success,
2 scenario-schema error, 3 solver hard failure, 4 soundness-audit violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .qfp import SolverError
from .scenario import ScenarioError, grid_values, load_scenario

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_SOLVER = 3
EXIT_SOUNDNESS = 4


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="trace format")
    p.add_argument("--m", type=int, default=None, help="override the relaxation segment count")
    p.add_argument("--eps", type=float, default=None, help="override the bisection precision")
    p.add_argument("--reduction-order", type=int, default=None, help="override the zonotope order cap")
    p.add_argument("--parallel", type=int, default=1, help="worker processes for grid cells")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zonofd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, descr in (
        ("run", "simulate one scenario and write its trace"),
        ("grid", "detection steps over a constant-input grid"),
        ("compare", "joint gain-and-input design vs a PFD input grid"),
    ):
        _add_common(sub.add_parser(name, help=descr))
    return parser


def _load(args):
    scenario = load_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.m is not None:
        overrides["m"] = args.m
    if args.eps is not None:
        overrides["eps_bisect"] = args.eps
    if args.reduction_order is not None:
        overrides["reduction_order"] = args.reduction_order
    return scenario.with_overrides(**overrides) if overrides else scenario


def _cmd_run(args) -> int:
    scenario = _load(args)
    out = Path(args.out)
    record = harness.run_scenario(scenario, collect_polygons=scenario.plant.n_y == 2)
    harness.write_trace(record, out / ("trace.csv" if args.format == "csv" else "trace.json"),
                        fmt=args.format)
    if record.polygons:
        harness.write_polygons(record, out / "polygons")
    harness.write_scenario_echo(scenario, record.summary(), out / "scenario-echo.json")
    print(f"detection step: {record.detection_step}  isolation step: {record.isolation_step} "
          f"(mode {record.isolated_mode})")
    if not record.sound:
        print("soundness audit FAILED:", "; ".join(record.violations), file=sys.stderr)
        return EXIT_SOUNDNESS
    return EXIT_OK


def _cmd_grid(args) -> int:
    scenario = _load(args)
    axis = grid_values(scenario)
    methods = scenario.grid.get("methods", [scenario.design])
    result = harness.run_input_grid(scenario, axis, methods, parallel=args.parallel)
    out = Path(args.out)
    harness.write_grid(result, out / "grid.csv")
    summary = {
        "methods": methods,
        "horizon": result.horizon,
        "sentinel": result.horizon + 1,
        "bin_counts": {m: result.bin_counts(m) for m in methods},
    }
    harness.write_scenario_echo(scenario, summary, out / "scenario-echo.json")
    for m in methods:
        print(f"{m}: bins {summary['bin_counts'][m]}")
    if not result.sound:
        print("soundness audit FAILED in at least one cell", file=sys.stderr)
        return EXIT_SOUNDNESS
    return EXIT_OK


def _cmd_compare(args) -> int:
    scenario = _load(args)
    axis = grid_values(scenario)
    result = harness.run_afd_vs_pfd(scenario, axis, horizon=scenario.compare_horizon,
                                    parallel=args.parallel)
    out = Path(args.out)
    harness.write_compare(result, out / "compare.csv")
    counts = result.category_counts()
    summary = {
        "horizon": result.horizon,
        "sentinel": result.horizon + 1,
        "afd_isolation_step": result.afd_step,
        "category_counts": counts,
        "afd_faster_or_equal_fraction": result.afd_faster_or_equal_fraction(),
    }
    harness.write_scenario_echo(scenario, summary, out / "scenario-echo.json")
    print(json.dumps(summary))
    if not result.sound:
        print("soundness audit FAILED in at least one cell", file=sys.stderr)
        return EXIT_SOUNDNESS
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "grid":
            return _cmd_grid(args)
        return _cmd_compare(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
