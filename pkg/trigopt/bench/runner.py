"""
Bench Runner - Build a scenario, solve it and persist the outcome

``run`` turns a RunConfig into a ResultsRecord:
- load solver settings (config.yaml, .env, dotted overrides)
- build the scenario parameters, regions and transcribed problem
- dispatch to branch-and-bound, enumeration or the homotopy loop
- write the solution vector, the trace or node log and the record
"""

import dataclasses
import logging
import math
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from trigopt.bench.config import RunConfig
from trigopt.bench.records import ResultsRecord, write_record
from trigopt.errors import ConfigError, SolverError
from trigopt.logic.postprocess import polish_indicators
from trigopt.nlp.ipm import NlpOptions
from trigopt.nlp.problem import evaluate
from trigopt.ocp.shooting import TranscribedNlp
from trigopt.scenarios.docking import DockingParams, build_docking_ocp, docking_initial_guess
from trigopt.scenarios.lander import LanderParams, build_pdg_ocp, pdg_initial_guess
from trigopt.scenarios.polytope import Polytope, load_polytopes
from trigopt.scenarios.ugv import UgvParams, build_ugv_ocp, ugv_initial_guess
from trigopt.settings import apply_overrides, load_settings
from trigopt.solvers.bnb import BnbOptions, MinlpSolution, MinlpStatus, solve_bnb
from trigopt.solvers.enumerate import enumerate_exhaustive
from trigopt.solvers.homotopy import HomotopyParams, HomotopyStatus, HomotopyTrace, solve_homotopy

logger = logging.getLogger(__name__)

SOLUTION_FILE = "solution.npy"
TRACE_FILE = "homotopy_trace.csv"
NODE_LOG_FILE = "nodes.jsonl"

PARAMS_TYPES = {
    "ugv": UgvParams,
    "pdg": LanderParams,
    "docking": DockingParams,
}


@dataclasses.dataclass
class ScenarioProblem:
    """A built scenario: parameters, regions, transcription and start point."""

    params: Any
    regions: List[Polytope]
    transcribed: TranscribedNlp
    initial_guess: np.ndarray


def resolve_settings(config: RunConfig, settings: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Defaults (or the given settings) with the run's dotted overrides applied."""
    base = load_settings() if settings is None else settings
    return apply_overrides(base, config.settings_overrides)


def build_scenario(config: RunConfig) -> ScenarioProblem:
    """
    Load parameters and regions and transcribe the scenario.

    Raises:
        ConfigError: On invalid parameters or an unknown formulation
        PolytopeFormatError: On a malformed region file
    """
    params = PARAMS_TYPES[config.scenario].from_yaml(config.params_path, config.overrides)
    regions = load_polytopes(config.regions_path) if config.regions_path is not None else []

    if config.scenario == "ugv":
        transcribed = build_ugv_ocp(params, regions, config.formulation)
        guess = ugv_initial_guess(transcribed)
    elif config.scenario == "pdg":
        transcribed = build_pdg_ocp(params, regions, config.formulation)
        guess = pdg_initial_guess(transcribed, params)
    else:
        transcribed = build_docking_ocp(params, config.formulation)
        guess = docking_initial_guess(transcribed)
    return ScenarioProblem(params=params, regions=regions, transcribed=transcribed, initial_guess=guess)


def _minlp_status(solution: MinlpSolution) -> str:
    if not solution.found:
        return "infeasible" if solution.status == MinlpStatus.INFEASIBLE else "solver_failure"
    if solution.status == MinlpStatus.OPTIMAL_WITHIN_TREE:
        return "solved"
    return "feasible"


def _homotopy_status(trace: HomotopyTrace) -> str:
    if trace.status in (HomotopyStatus.CONVERGED, HomotopyStatus.STOPPED_EARLY):
        return "solved"
    return "feasible"


def summarize(
    transcribed: TranscribedNlp, x: Optional[np.ndarray]
) -> Dict[str, Any]:
    """Objective, decomposition, final state and indicator sums of a point."""
    if x is None:
        return {}
    terms = {label: float(value) for label, value in sorted(transcribed.objective_terms(x).items())}
    objective = float(evaluate(transcribed.nlp, x)[0])
    indicators = {name: float(np.sum(values)) for name, values in transcribed.indicators(x).items()}
    final_state = transcribed.states(x)[-1]
    return {
        "objective": objective,
        "objective_terms": terms,
        "final_state": [float(v) for v in final_state],
        "indicator_total": math.fsum(indicators.values()),
        "indicator_per_region": indicators,
    }


def _solve_minlp(
    config: RunConfig, problem: ScenarioProblem, settings: Dict[str, Any], run_dir: Path
) -> Tuple[Optional[np.ndarray], Dict[str, Any], Dict[str, str]]:
    options = BnbOptions.from_config(settings.get("bnb"), settings.get("nlp"))
    files: Dict[str, str] = {}
    if config.solver == "enumerate":
        solution = enumerate_exhaustive(
            problem.transcribed,
            problem.initial_guess,
            options.nlp,
            feasibility_tol=options.feasibility_tol,
        )
    else:
        node_log = run_dir / NODE_LOG_FILE if config.trace else None
        solution = solve_bnb(problem.transcribed, problem.initial_guess, options, node_log=node_log)
        if node_log is not None:
            files["node_log"] = NODE_LOG_FILE
    info = {
        "status": _minlp_status(solution),
        "solver_status": solution.status.value,
        "runtime": solution.runtime,
        "node_count": solution.node_count,
    }
    return solution.x, info, files


def _solve_mpvc(
    config: RunConfig, problem: ScenarioProblem, settings: Dict[str, Any], run_dir: Path
) -> Tuple[Optional[np.ndarray], Dict[str, Any], Dict[str, str]]:
    params = HomotopyParams.from_config(settings.get("homotopy"))
    # scenario files carry their own target relaxation
    params = dataclasses.replace(params, tau_min=float(getattr(problem.params, "tau_min", params.tau_min)))
    options = NlpOptions.from_config(settings.get("nlp"))
    try:
        solution, trace = solve_homotopy(problem.transcribed, problem.initial_guess, params, options)
    except SolverError as exc:
        if isinstance(exc.trace, HomotopyTrace):
            exc.trace.to_csv(run_dir / TRACE_FILE)
        raise
    trace.to_csv(run_dir / TRACE_FILE)
    x = polish_indicators(solution.x, problem.transcribed.bindings)
    info = {
        "status": _homotopy_status(trace),
        "solver_status": trace.status.value,
        "runtime": trace.runtime,
        "homotopy_iterations": len(trace),
        "final_tau": trace.final_tau,
    }
    return x, info, {"trace": TRACE_FILE}


def run(config: RunConfig, settings: Optional[Dict[str, Any]] = None) -> ResultsRecord:
    """
    Solve one configuration and persist the record.

    Args:
        config: What to solve and where to write
        settings: Solver settings (loaded from config.yaml when None)

    Returns:
        The written ResultsRecord

    Raises:
        ConfigError: On invalid parameters, regions or settings
        SolverError: If the homotopy loop accepted no solution; the partial
            trace and a solver_failure record are written first
    """
    settings = resolve_settings(config, settings)
    problem = build_scenario(config)
    run_dir = config.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    config_hash = config.config_hash(settings)
    logger.info("Running %s (config %s)", config.name, config_hash[:12])

    base = {
        "scenario": config.scenario,
        "formulation": config.formulation,
        "solver": config.solver,
        "config_hash": config_hash,
        "run_config": config.as_dict(),
    }

    try:
        if config.formulation == "minlp":
            x, info, files = _solve_minlp(config, problem, settings, run_dir)
        else:
            x, info, files = _solve_mpvc(config, problem, settings, run_dir)
    except SolverError as exc:
        trace = exc.trace
        record = ResultsRecord(
            status="solver_failure",
            solver_status=str(trace.status.value) if isinstance(trace, HomotopyTrace) and trace.status else "failed",
            runtime=trace.runtime if isinstance(trace, HomotopyTrace) else 0.0,
            homotopy_iterations=len(trace) if isinstance(trace, HomotopyTrace) else None,
            files={"trace": TRACE_FILE} if isinstance(trace, HomotopyTrace) else {},
            created_at=time.time(),
            **base,
        )
        write_record(record, run_dir, config.out_dir)
        raise

    if x is not None:
        np.save(run_dir / SOLUTION_FILE, np.asarray(x, dtype=float))
        files["solution"] = SOLUTION_FILE
    summary = summarize(problem.transcribed, x)
    if config.scenario == "pdg" and x is not None:
        summary["final_mass"] = summary["final_state"][6]

    record = ResultsRecord(files=files, created_at=time.time(), **base, **info, **summary)
    write_record(record, run_dir, config.out_dir)
    logger.info(
        "%s finished %s (objective %s)",
        config.name,
        record.status,
        "n/a" if record.objective is None else f"{record.objective:.6g}",
    )
    return record


def load_solution(record: ResultsRecord, run_dir: Path) -> np.ndarray:
    """Solution vector stored next to a record."""
    name = record.files.get("solution")
    if name is None:
        raise ConfigError(f"Run in {run_dir} has no stored solution ({record.status})")
    return np.load(Path(run_dir) / name)
