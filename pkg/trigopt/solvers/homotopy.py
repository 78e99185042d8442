"""
Homotopy Solver - Relaxation path for vanishing and complementarity constraints

Relaxable product rows P(z) <= 0 are solved as P(z) <= tau while tau is
driven towards tau_min:
- attempt tau = min(eps * tau_star, tau0), warm-started from the last accepted point
- success with tau < tau_star: accept, tau_star = tau, eps = eps / kappa1
- local infeasibility (or max_iter): eps = kappa0 * eps and retry
- stop once tau_star <= tau_min, after max_failures consecutive failures,
  or after max_outer attempts
- a numerically failed NLP solve ends the run with SolverError

Each attempt is recorded in a HomotopyTrace that can be written as CSV.
"""

import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from trigopt.errors import ConfigError, SolverError
from trigopt.nlp.ipm import NlpOptions, NlpSolution, NlpStatus, solve_nlp
from trigopt.nlp.problem import NlpProblem, evaluate
from trigopt.ocp.shooting import TranscribedNlp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HomotopyParams:
    """
    Schedule parameters of the homotopy loop.

    Attributes:
        tau0: Initial relaxation (> 1)
        eps0: Initial reduction factor, in (0, 1)
        tau_min: Target relaxation, in (0, 1)
        kappa0: Backoff growth of eps after a failure (> 1)
        kappa1: Shrink of eps after a success (> 1)
        max_outer: Maximum number of NLP attempts
        max_failures: Consecutive failures before the loop stalls
        tau_stop_override: Stop as soon as an accepted tau falls below this
    """

    tau0: float = 100.0
    eps0: float = 0.6
    tau_min: float = 1e-3
    kappa0: float = 1.6
    kappa1: float = 1.2
    max_outer: int = 50
    max_failures: int = 10
    tau_stop_override: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.tau0 > 1.0:
            raise ConfigError(f"tau0 must be > 1, got {self.tau0}")
        if not 0.0 < self.eps0 < 1.0:
            raise ConfigError(f"eps0 must be in (0, 1), got {self.eps0}")
        if not 0.0 < self.tau_min < 1.0:
            raise ConfigError(f"tau_min must be in (0, 1), got {self.tau_min}")
        if not self.kappa0 > 1.0 or not self.kappa1 > 1.0:
            raise ConfigError(f"kappa0 and kappa1 must be > 1, got {self.kappa0}, {self.kappa1}")
        if self.max_outer < 1 or self.max_failures < 1:
            raise ConfigError("max_outer and max_failures must be at least 1")
        if self.tau_stop_override is not None and self.tau_stop_override <= 0.0:
            raise ConfigError(f"tau_stop_override must be positive, got {self.tau_stop_override}")

    @property
    def tau_stop(self) -> float:
        return self.tau_min if self.tau_stop_override is None else max(self.tau_min, self.tau_stop_override)

    @classmethod
    def from_config(cls, section: Optional[Dict[str, Any]]) -> "HomotopyParams":
        """Build parameters from the ``homotopy`` section of config.yaml."""
        section = dict(section or {})
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(section) - names
        if unknown:
            raise ConfigError(f"Unknown homotopy parameter(s): {', '.join(sorted(unknown))}")
        values: Dict[str, Any] = {}
        for key, value in section.items():
            if key in ("max_outer", "max_failures"):
                values[key] = int(value)
            elif value is None:
                values[key] = None
            else:
                values[key] = float(value)
        return cls(**values)


class HomotopyStatus(str, Enum):
    CONVERGED = "converged"
    STOPPED_EARLY = "stopped_early"
    STALLED = "stalled"
    MAX_OUTER = "max_outer"
    NLP_FAILURE = "nlp_failure"


@dataclass(frozen=True)
class HomotopyIteration:
    """One NLP attempt of the homotopy loop."""

    iteration: int
    tau: float
    epsilon: float
    tau_star: float
    status: str
    accepted: bool
    objective: Optional[float]
    vanishing_violation: Optional[float]
    fractionality: Optional[float]
    nlp_iterations: int

    def as_row(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass
class HomotopyTrace:
    """
    Record of a homotopy run.

    Attributes:
        iterations: One entry per NLP attempt
        status: Why the loop ended
        final_tau: Relaxation of the returned solution
        runtime: Wall-clock seconds
    """

    iterations: List[HomotopyIteration] = field(default_factory=list)
    status: Optional[HomotopyStatus] = None
    final_tau: float = math.inf
    runtime: float = 0.0

    def __len__(self) -> int:
        return len(self.iterations)

    @property
    def attempted_taus(self) -> List[float]:
        return [it.tau for it in self.iterations]

    @property
    def accepted_taus(self) -> List[float]:
        return [it.tau for it in self.iterations if it.accepted]

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write one row per attempt."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fieldnames = [f.name for f in dataclasses.fields(HomotopyIteration)]
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=fieldnames)
            writer.writeheader()
            for iteration in self.iterations:
                writer.writerow(iteration.as_row())
        return path


def relax_vanishing(problem: Union[TranscribedNlp, NlpProblem], tau: float) -> NlpProblem:
    """
    Shift every relaxable row from P(z) <= 0 to P(z) <= tau.

    Args:
        problem: Transcribed problem or NlpProblem
        tau: Relaxation (0 restores the original rows)

    Returns:
        Relaxed NlpProblem; rows without the relaxable flag are unchanged

    Raises:
        ConfigError: If tau is negative
    """
    if tau < 0.0:
        raise ConfigError(f"Relaxation must be non-negative, got {tau}")
    nlp = problem.nlp if isinstance(problem, TranscribedNlp) else problem
    return dataclasses.replace(nlp, relaxation=float(tau))


def schedule_preview(params: HomotopyParams, outcomes: Sequence[bool]) -> List[float]:
    """
    Attempted tau sequence for a given pattern of NLP successes and failures.

    Args:
        params: Schedule parameters
        outcomes: True for a successful solve, False for a failed one

    Returns:
        Attempted relaxations, one per outcome
    """
    tau_star = params.tau0
    epsilon = params.eps0
    attempted = []
    for success in outcomes:
        tau = min(epsilon * tau_star, params.tau0)
        attempted.append(tau)
        if success:
            if tau < tau_star:
                tau_star = tau
            epsilon /= params.kappa1
        else:
            epsilon *= params.kappa0
    return attempted


def vanishing_violation(problem: NlpProblem, point: np.ndarray) -> float:
    """Largest positive value of a relaxable row at tau = 0."""
    if problem.n_relaxable == 0:
        return 0.0
    _, _, h = evaluate(dataclasses.replace(problem, relaxation=0.0), point)
    return float(max(np.max(h[problem.relaxable]), 0.0))


def _max_fractionality(point: np.ndarray, delta_indices: np.ndarray) -> Optional[float]:
    if delta_indices.size == 0:
        return None
    values = point[delta_indices]
    return float(np.max(np.minimum(values, 1.0 - values)))


def solve_homotopy(
    problem: Union[TranscribedNlp, NlpProblem],
    initial_guess: np.ndarray,
    params: Optional[HomotopyParams] = None,
    options: Optional[NlpOptions] = None,
    delta_indices: Optional[Sequence[int]] = None,
) -> Tuple[NlpSolution, HomotopyTrace]:
    """
    Run the homotopy loop.

    Args:
        problem: Transcribed problem or NlpProblem with relaxable rows
        initial_guess: Starting point of the first solve
        params: Schedule parameters
        options: NLP options of every solve
        delta_indices: Indicator variables whose fractionality is traced
            (taken from the transcription when omitted)

    Returns:
        (last accepted solution, trace)

    Raises:
        SolverError: If no attempt was accepted or an NLP solve broke down
            numerically; ``trace`` is attached
    """
    params = params or HomotopyParams()
    options = options or NlpOptions()
    nlp = problem.nlp if isinstance(problem, TranscribedNlp) else problem
    if delta_indices is None:
        deltas = problem.delta_indices if isinstance(problem, TranscribedNlp) else np.zeros(0, dtype=np.int64)
    else:
        deltas = np.asarray(delta_indices, dtype=np.int64)
    started = time.perf_counter()
    trace = HomotopyTrace()

    if nlp.n_relaxable == 0:
        solution = solve_nlp(nlp, initial_guess, options)
        trace.iterations.append(_record(0, 0.0, 0.0, 0.0, solution, solution.success, nlp, deltas))
        trace.runtime = time.perf_counter() - started
        if not solution.success:
            trace.status = HomotopyStatus.STALLED
            raise SolverError(f"NLP without relaxable rows failed: {solution.status.value}", trace)
        trace.status = HomotopyStatus.CONVERGED
        trace.final_tau = 0.0
        return solution, trace

    tau_star = params.tau0
    epsilon = params.eps0
    accepted: Optional[NlpSolution] = None
    warm = np.asarray(initial_guess, dtype=float)
    failures = 0
    status = HomotopyStatus.MAX_OUTER

    for iteration in range(params.max_outer):
        tau = min(epsilon * tau_star, params.tau0)
        relaxed = relax_vanishing(nlp, tau)
        solution = solve_nlp(relaxed, warm, options)
        ok = solution.status == NlpStatus.OPTIMAL
        take = ok and tau < tau_star
        trace.iterations.append(_record(iteration, tau, epsilon, tau_star, solution, take, nlp, deltas))
        logger.info(
            "Homotopy %d: tau=%.6g eps=%.4g -> %s%s",
            iteration,
            tau,
            epsilon,
            solution.status.value,
            " (accepted)" if take else "",
        )

        if solution.status == NlpStatus.NUMERIC_FAILURE:
            # only infeasibility and iteration caps feed the backoff
            status = HomotopyStatus.NLP_FAILURE
            break

        if ok:
            failures = 0
            if take:
                accepted = solution
                warm = solution.x
                tau_star = tau
            epsilon /= params.kappa1
        else:
            failures += 1
            epsilon *= params.kappa0
            if failures >= params.max_failures:
                status = HomotopyStatus.STALLED
                break

        if accepted is not None and tau_star <= params.tau_min:
            status = HomotopyStatus.CONVERGED
            break
        if accepted is not None and params.tau_stop_override is not None and tau_star < params.tau_stop:
            status = HomotopyStatus.STOPPED_EARLY
            break

    trace.status = status
    trace.runtime = time.perf_counter() - started
    if status == HomotopyStatus.NLP_FAILURE:
        raise SolverError(f"NLP solve failed numerically at tau={tau:.6g}", trace)
    if accepted is None:
        raise SolverError(f"Homotopy accepted no solution ({status.value})", trace)
    trace.final_tau = tau_star
    if status != HomotopyStatus.CONVERGED:
        logger.warning("Homotopy ended %s at tau=%.6g", status.value, tau_star)
    return accepted, trace


def _record(
    iteration: int,
    tau: float,
    epsilon: float,
    tau_star: float,
    solution: NlpSolution,
    accepted: bool,
    nlp: NlpProblem,
    deltas: np.ndarray,
) -> HomotopyIteration:
    feasible = solution.status == NlpStatus.OPTIMAL
    return HomotopyIteration(
        iteration=iteration,
        tau=float(tau),
        epsilon=float(epsilon),
        tau_star=float(tau_star),
        status=solution.status.value,
        accepted=bool(accepted),
        objective=float(solution.objective) if feasible else None,
        vanishing_violation=vanishing_violation(nlp, solution.x) if feasible else None,
        fractionality=_max_fractionality(solution.x, deltas) if feasible else None,
        nlp_iterations=int(solution.iterations),
    )
