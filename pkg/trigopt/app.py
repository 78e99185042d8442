#!/usr/bin/env python3
"""
Trigopt Command Line - Solve, compare and export logic-triggered OCP runs

Subcommands:
- solve: build a scenario, run a solver, write the results record
- compare: side-by-side table of two or more records of one scenario
- plot-data: CSV series (trajectory, thrust, angles, indicators) of a run

Usage:
    python -m trigopt.app solve --scenario ugv --formulation mpvc --solver homotopy
    python -m trigopt.app solve --scenario pdg --formulation minlp --solver bnb \\
        --override N=30 --override bnb.workers=4 --trace
    python -m trigopt.app compare --inputs results/ugv-minlp-bnb results/ugv-mpvc-homotopy
    python -m trigopt.app plot-data --input results/pdg-mpvc-homotopy

Exit codes:
    0 solved (or feasible), 2 infeasible, 3 solver failure, 4 configuration error
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from trigopt import __version__
from trigopt.bench.compare import COMPARISON_FILE, compare
from trigopt.bench.config import FORMULATIONS, SCENARIOS, SOLVERS, RunConfig, split_overrides
from trigopt.bench.plot_data import emit_plot_data
from trigopt.bench.records import load_record, resolve_record_path
from trigopt.bench.runner import build_scenario, load_solution, run
from trigopt.console import print_error, print_header, print_info, print_success, print_table, print_warning
from trigopt.errors import SolverError, TrigoptError
from trigopt.settings import apply_overrides, configure_logging, load_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_SOLVER_FAILURE = 3
EXIT_CONFIG_ERROR = 4


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with the solve, compare and plot-data subcommands."""
    parser = argparse.ArgumentParser(
        prog="trigopt",
        description="Logic-triggered optimal control: MINLP and MPVC solvers on the bench scenarios",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, default=None, help="config.yaml to use instead of config/config.yaml")
    subparsers = parser.add_subparsers(dest="command", required=True)

    solve = subparsers.add_parser("solve", help="Solve one scenario configuration")
    solve.add_argument("--scenario", required=True, choices=SCENARIOS)
    solve.add_argument("--formulation", required=True, choices=FORMULATIONS)
    solve.add_argument("--solver", required=True, choices=SOLVERS)
    solve.add_argument("--params", type=Path, default=None, help="Scenario parameter file")
    solve.add_argument("--regions", type=str, default=None, help="Region file, or 'none'")
    solve.add_argument("--out", type=Path, default=None, help="Output directory")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Scenario parameter (N=30) or dotted setting (nlp.tol=1e-8); repeatable",
    )
    solve.add_argument("--trace", action="store_true", help="Write the branch-and-bound node log")

    comparison = subparsers.add_parser("compare", help="Compare results records")
    comparison.add_argument("--inputs", nargs="+", required=True, type=Path, help="Run directories or record files")
    comparison.add_argument("--out", type=Path, default=None, help="Directory for comparison.csv")

    plot = subparsers.add_parser("plot-data", help="Export plot series of a solved run")
    plot.add_argument("--input", required=True, type=Path, help="Run directory or record file")
    plot.add_argument("--out", type=Path, default=None, help="Directory for the CSV series")
    return parser


def cmd_solve(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    scenario_overrides, dotted = split_overrides(args.override)
    out_dir = args.out or Path(settings.get("output", {}).get("directory", "results"))
    config = RunConfig(
        scenario=args.scenario,
        formulation=args.formulation,
        solver=args.solver,
        params_path=args.params,
        regions_path=args.regions,
        out_dir=out_dir,
        seed=args.seed,
        overrides=scenario_overrides,
        settings_overrides=dotted,
        trace=args.trace,
    )
    print_header(f"Solving {config.name}")
    print_info(f"Parameters: {config.params_path}")
    print_info(f"Regions:    {config.regions_path or 'none'}")

    try:
        record = run(config, settings)
    except SolverError as exc:
        print_error(f"Solver failure: {exc}")
        print_info(f"Partial trace and record in {config.run_dir}")
        return EXIT_SOLVER_FAILURE

    if record.status == "infeasible":
        print_error(f"No feasible point found ({record.solver_status})")
        return EXIT_INFEASIBLE
    if record.status == "solver_failure":
        print_error(f"Solver stopped without a solution ({record.solver_status})")
        return EXIT_SOLVER_FAILURE

    if record.status == "feasible":
        print_warning(f"Feasible point, optimality not confirmed ({record.solver_status})")
    else:
        print_success(f"Solved ({record.solver_status})")
    print_info(f"Objective:  {record.objective:.6f}")
    for label, value in record.objective_terms.items():
        print_info(f"  {label:<16}{value:.6f}")
    print_info(f"Sum delta:  {record.indicator_total:.4f}")
    if record.final_mass is not None:
        print_info(f"Final mass: {record.final_mass:.2f} kg")
    print_info(f"Runtime:    {record.runtime:.2f} s")
    print_info(f"Record:     {config.run_dir}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    records = [load_record(path) for path in args.inputs]
    table = compare(records)
    print_header(f"Comparison - {table.scenario}")
    print_table(table.format())
    out_dir = args.out or resolve_record_path(args.inputs[0]).parent.parent
    path = table.to_csv(Path(out_dir) / COMPARISON_FILE)
    print("")
    print_success(f"Wrote {path}")
    return EXIT_OK


def cmd_plot_data(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    record_path = resolve_record_path(args.input)
    run_dir = record_path.parent
    record = load_record(record_path)
    config = RunConfig.from_dict(record.run_config, out_dir=run_dir.parent)
    problem = build_scenario(config)
    x = load_solution(record, run_dir)
    written = emit_plot_data(config.scenario, problem.transcribed, x, args.out or run_dir / "plot_data", problem.params)
    print_header(f"Plot data - {config.name}")
    for name, path in written.items():
        print_success(f"{name}: {path}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "compare": cmd_compare,
    "plot-data": cmd_plot_data,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args.config)
        dotted = split_overrides(getattr(args, "override", []))[1]
        configure_logging(apply_overrides(settings, dotted))
        return COMMANDS[args.command](args, settings)
    except SolverError as exc:
        print_error(str(exc))
        return EXIT_SOLVER_FAILURE
    except TrigoptError as exc:
        print_error(f"Configuration error: {exc}")
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
