"""Post-processing of indicator values: rounding of relaxations and polishing."""

import logging
from typing import Iterable

import numpy as np

from trigopt.logic.implication import ImplicationBinding, ImplicationMode

logger = logging.getLogger(__name__)

INTEGRALITY_TOL = 1e-5
POLISH_TOL = 1e-9


def round_relaxed(values, tol: float = INTEGRALITY_TOL) -> np.ndarray:
    """
    Round relaxed big-M indicators down unless they are already one.

    A component becomes 1 only when it equals 1 within ``tol``; every
    fractional value goes to 0. Since G <= M (1 - delta) only tightens as
    delta grows, the rounded point stays feasible for the big-M problem.

    Args:
        values: Indicator values in [0, 1]
        tol: Integrality tolerance

    Returns:
        Float array of zeros and ones with the input's shape
    """
    values = np.asarray(values, dtype=float)
    if np.any(values < -tol) or np.any(values > 1.0 + tol):
        raise ValueError("Relaxed indicators must lie in [0, 1]")
    return np.where(values >= 1.0 - tol, 1.0, 0.0)


def polish_indicators(point, bindings: Iterable[ImplicationBinding], tol: float = POLISH_TOL) -> np.ndarray:
    """
    Raise delta to one wherever its consequence already holds.

    Applies to indicator-mode implications with positive weight: when
    max_j G_j(z) <= tol at a node and delta < 1, setting delta = 1 keeps every
    constraint satisfied and lowers the cost by w (1 - delta). Trigger
    modes are left untouched since their delta is tied to the sign of H.

    Args:
        point: Global point of the transcribed problem
        bindings: Implication bindings of that problem
        tol: Slack allowed on G

    Returns:
        Polished copy of the point
    """
    z = np.array(point, dtype=float, copy=True)
    raised = 0
    for binding in bindings:
        spec = binding.spec
        if binding.delta_index is None or spec.weight <= 0:
            continue
        if spec.mode not in (ImplicationMode.INDICATOR_BIG_M, ImplicationMode.INDICATOR_VANISHING):
            continue
        satisfied = binding.consequence_values(z).max(axis=1) <= tol
        active = satisfied & (binding.weights > 0)
        targets = binding.delta_index[active]
        below = z[targets] < 1.0
        raised += int(np.count_nonzero(below))
        z[targets] = 1.0
    if raised:
        logger.debug("Polishing raised %d indicator(s) to one", raised)
    return z
