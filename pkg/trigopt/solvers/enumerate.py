"""
Exhaustive Enumeration - Reference solver for small binary problems

Solves the continuous NLP for every assignment in {0, 1}^n_bin and keeps
the best feasible one. Used to cross-check branch-and-bound.
"""

import itertools
import logging
import math
import time
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from trigopt.errors import ConfigError
from trigopt.nlp.ipm import NlpOptions, NlpStatus, solve_nlp
from trigopt.nlp.problem import NlpProblem, constraint_violation, evaluate
from trigopt.ocp.shooting import TranscribedNlp
from trigopt.solvers.bnb import MinlpSolution, MinlpStatus, fix_binaries, unpack_problem

logger = logging.getLogger(__name__)

MAX_ENUMERATED_BINARIES = 16


def enumerate_exhaustive(
    problem: Union[TranscribedNlp, NlpProblem],
    initial_guess: np.ndarray,
    options: Optional[NlpOptions] = None,
    integer_indices: Optional[Sequence[int]] = None,
    cap: int = MAX_ENUMERATED_BINARIES,
    feasibility_tol: float = 1e-6,
) -> MinlpSolution:
    """
    Solve every binary assignment and return the best.

    Args:
        problem: Transcribed problem or NlpProblem with ``integer_indices``
        initial_guess: Starting point for every fixed-binary solve
        options: NLP options
        integer_indices: Binary variable indices (overrides the marks)
        cap: Largest number of binaries accepted
        feasibility_tol: Max constraint violation of an accepted point

    Returns:
        MinlpSolution with ``optimal_within_tree`` or ``infeasible`` status

    Raises:
        ConfigError: If there are more binaries than ``cap``
    """
    nlp, indices = unpack_problem(problem, integer_indices)
    if indices.size > cap:
        raise ConfigError(f"Enumeration limited to {cap} binaries, problem has {indices.size}")
    options = options or NlpOptions()
    start = np.asarray(initial_guess, dtype=float)
    started = time.perf_counter()

    best_x: Optional[np.ndarray] = None
    best_objective = math.inf
    history: List[Tuple[int, float]] = []
    records = []
    count = 0
    for count, assignment in enumerate(itertools.product((0, 1), repeat=int(indices.size)), start=1):
        fixings = {int(i): int(v) for i, v in zip(indices, assignment)}
        fixed = fix_binaries(nlp, fixings)
        solution = solve_nlp(fixed, np.clip(start, fixed.lb, fixed.ub), options)
        objective = None
        if solution.status == NlpStatus.OPTIMAL and constraint_violation(nlp, solution.x) <= feasibility_tol:
            objective = float(evaluate(nlp, solution.x)[0])
            if objective < best_objective:
                best_objective = objective
                best_x = solution.x.copy()
                history.append((count - 1, objective))
        records.append(
            {
                "seq": count - 1,
                "assignment": list(assignment),
                "status": solution.status.value,
                "objective": objective,
            }
        )
        logger.debug("Assignment %s: %s %s", assignment, solution.status.value, objective)

    status = MinlpStatus.OPTIMAL_WITHIN_TREE if best_x is not None else MinlpStatus.INFEASIBLE
    logger.info("Enumerated %d assignments: %s", count, status.value)
    return MinlpSolution(
        x=best_x,
        assignment=np.round(best_x[indices]) if best_x is not None else np.zeros(0),
        objective=best_objective,
        status=status,
        incumbent_history=history,
        node_count=count,
        nlp_solves=count,
        runtime=time.perf_counter() - started,
        node_log=records,
    )
