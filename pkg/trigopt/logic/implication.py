"""
Implication Types - Logical constraints H(z) >= 0 => G(z) <= 0 and their compiled form

An ImplicationSpec states what should hold; a mode says how it is encoded:
- indicator_bigM: binary delta with G <= M (1 - delta)
- indicator_vanishing: continuous delta in [0, 1] with delta * G <= 0
- trigger_eps_bigM: binary delta linked to the sign of H with a margin epsilon
- trigger_mpcc: auxiliary y = max(H, 0) through a complementarity pair, y * G <= 0

Indicator modes have no trigger expression; delta itself is the trigger and
the cost term -w * delta rewards activating it.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from trigopt.errors import ConfigError, InvalidBigMError
from trigopt.nlp.expr import Expr, interval_bounds
from trigopt.nlp.problem import ExprBlock

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3
DEFAULT_BETA = 10.0


class ImplicationMode(str, Enum):
    INDICATOR_BIG_M = "indicator_bigM"
    INDICATOR_VANISHING = "indicator_vanishing"
    TRIGGER_EPS_BIG_M = "trigger_eps_bigM"
    TRIGGER_MPCC = "trigger_mpcc"

    @property
    def has_trigger(self) -> bool:
        return self in (ImplicationMode.TRIGGER_EPS_BIG_M, ImplicationMode.TRIGGER_MPCC)


class HeavisideRepr(str, Enum):
    """How the Heaviside step of the trigger enters the cost."""

    DELTA_VARIABLE = "delta_variable"
    SIGMOID = "sigmoid"
    KKT_LP = "kkt_lp"


class Classification(str, Enum):
    NLP = "NLP"
    MINLP = "MINLP"
    MPVC = "MPVC"
    MPCC = "MPCC"


@dataclass(frozen=True, eq=False)
class ImplicationSpec:
    """
    One logical implication with its encoding.

    Expressions are written over a stage layout: variables 0..n_x-1 are the
    state, n_x..n_x+n_u-1 the control of the stage where the implication is
    imposed.

    Attributes:
        consequence: Components of G; all must be <= 0 when triggered
        mode: Encoding of the implication
        trigger: H (trigger modes only)
        big_m: Upper bound M on G (and on H for trigger_eps_bigM);
            derived from the variable box when None
        lower_m: Bound m with H >= -m (trigger_eps_bigM); derived when None
        epsilon: Margin separating H = 0 from activation (trigger_eps_bigM)
        weight: Reward w >= 0; the cost term is -w * delta
        heaviside: Representation of the reward for trigger_mpcc
        beta: Sigmoid steepness
        name: Label used in bindings and results
    """

    consequence: Tuple[Expr, ...]
    mode: ImplicationMode
    trigger: Optional[Expr] = None
    big_m: Optional[float] = None
    lower_m: Optional[float] = None
    epsilon: float = DEFAULT_EPSILON
    weight: float = 0.0
    heaviside: HeavisideRepr = HeavisideRepr.DELTA_VARIABLE
    beta: float = DEFAULT_BETA
    name: str = ""

    def __post_init__(self) -> None:
        consequence = tuple(self.consequence) if not isinstance(self.consequence, Expr) else (self.consequence,)
        object.__setattr__(self, "consequence", consequence)
        object.__setattr__(self, "mode", ImplicationMode(self.mode))
        object.__setattr__(self, "heaviside", HeavisideRepr(self.heaviside))

        if not consequence:
            raise ConfigError(f"Implication {self.name!r} has an empty consequence")
        if not all(isinstance(g, Expr) for g in consequence):
            raise ConfigError(f"Implication {self.name!r}: consequence entries must be expressions")
        if self.mode.has_trigger and self.trigger is None:
            raise ConfigError(f"Implication {self.name!r}: mode {self.mode.value} needs a trigger")
        if not self.mode.has_trigger and self.trigger is not None:
            raise ConfigError(f"Implication {self.name!r}: mode {self.mode.value} takes no trigger")
        if self.weight < 0:
            raise ConfigError(f"Implication {self.name!r}: weight must be >= 0, got {self.weight}")
        if self.big_m is not None and not self.big_m > 0:
            raise InvalidBigMError(f"Implication {self.name!r}: big_m must be positive, got {self.big_m}")
        if self.lower_m is not None and not self.lower_m > 0:
            raise InvalidBigMError(f"Implication {self.name!r}: lower_m must be positive, got {self.lower_m}")
        if self.mode == ImplicationMode.TRIGGER_EPS_BIG_M and not self.epsilon > 0:
            raise InvalidBigMError(f"Implication {self.name!r}: epsilon must be positive, got {self.epsilon}")
        if self.beta <= 0:
            raise ConfigError(f"Implication {self.name!r}: beta must be positive, got {self.beta}")

        if self.mode != ImplicationMode.TRIGGER_MPCC and self.heaviside != HeavisideRepr.DELTA_VARIABLE:
            raise ConfigError(
                f"Implication {self.name!r}: {self.heaviside.value} cost only applies to trigger_mpcc"
            )
        if (
            self.mode == ImplicationMode.TRIGGER_MPCC
            and self.heaviside == HeavisideRepr.DELTA_VARIABLE
            and self.weight > 0
        ):
            raise ConfigError(
                f"Implication {self.name!r}: trigger_mpcc has no delta variable; "
                "use heaviside 'sigmoid' or 'kkt_lp' for a positive weight"
            )

    @property
    def classification(self) -> Classification:
        if self.mode in (ImplicationMode.INDICATOR_BIG_M, ImplicationMode.TRIGGER_EPS_BIG_M):
            return Classification.MINLP
        if self.mode == ImplicationMode.INDICATOR_VANISHING:
            return Classification.MPVC
        return Classification.MPCC

    @property
    def has_delta(self) -> bool:
        """True when the encoding carries an indicator variable delta."""
        return self.mode != ImplicationMode.TRIGGER_MPCC or self.heaviside == HeavisideRepr.KKT_LP


@dataclass(frozen=True)
class AuxVariable:
    """A variable introduced by a reformulation."""

    role: str
    lower: float
    upper: float
    integer: bool = False
    initial: float = 0.0


@dataclass(frozen=True, eq=False)
class CompiledConstraint:
    """
    A constraint produced by a reformulation.

    Attributes:
        expr: Constraint function over the stage layout followed by the
            auxiliary variables
        kind: "ineq" (expr <= 0) or "eq" (expr = 0)
        relaxable: Tagged for homotopy relaxation expr <= tau
        label: Short description
    """

    expr: Expr
    kind: str = "ineq"
    relaxable: bool = False
    label: str = ""


@dataclass(frozen=True, eq=False)
class ReformulationOutput:
    """Variables, constraints and cost term produced by compiling one ImplicationSpec."""

    variables: Tuple[AuxVariable, ...]
    constraints: Tuple[CompiledConstraint, ...]
    cost: Optional[Expr]
    classification: Classification

    def __post_init__(self) -> None:
        integer = any(v.integer for v in self.variables)
        if integer != (self.classification == Classification.MINLP):
            raise ValueError("Integrality marks must be present exactly for MINLP reformulations")

    @property
    def relaxable_count(self) -> int:
        return sum(1 for c in self.constraints if c.relaxable)


@dataclass(frozen=True, eq=False)
class ImplicationBinding:
    """
    An implication placed on a transcribed problem.

    Attributes:
        name: Implication name
        spec: The implication as written over the stage layout
        nodes: Grid nodes where it is imposed
        delta_index: Global index of delta per node (None without delta)
        aux_index: Global index of every auxiliary per node, (nodes, n_aux)
        weights: Cost weight multiplier per node
        consequence: Batched block evaluating G per node at a global point
        trigger: Batched block evaluating H per node (trigger modes)
    """

    name: str
    spec: ImplicationSpec
    nodes: np.ndarray
    delta_index: Optional[np.ndarray]
    aux_index: np.ndarray
    weights: np.ndarray
    consequence: ExprBlock
    trigger: Optional[ExprBlock] = None

    def consequence_values(self, z: np.ndarray) -> np.ndarray:
        """G per node and component, shape (nodes, len(consequence))."""
        jets = self.consequence.jets(np.asarray(z, dtype=float), degree=0)
        return np.column_stack([value for value, _, _ in jets])

    def trigger_values(self, z: np.ndarray) -> Optional[np.ndarray]:
        if self.trigger is None:
            return None
        (value, _, _), = self.trigger.jets(np.asarray(z, dtype=float), degree=0)
        return value


def normalize_weight(weight: float, name: str = "") -> float:
    """
    Convert a signed indicator weight to the stored w >= 0 convention.

    Scenario tables that add +w * sum(delta) with w < 0 describe the same
    reward as -|w| * sum(delta).
    """
    if weight < 0:
        logger.debug("Indicator weight %s of %r stored as %s", weight, name, -weight)
    return abs(float(weight))


def auxiliary_variables(spec: ImplicationSpec, integer: Optional[bool] = None) -> Tuple[AuxVariable, ...]:
    """
    Variables the encoding of ``spec`` introduces, in compilation order.

    Args:
        spec: Implication
        integer: Override the integrality of delta (e.g. False for the
            continuous relaxation); defaults to the mode's own rule

    Returns:
        Tuple of AuxVariable; delta first when present
    """
    mode = spec.mode
    if mode in (ImplicationMode.INDICATOR_BIG_M, ImplicationMode.TRIGGER_EPS_BIG_M):
        binary = True if integer is None else integer
        return (AuxVariable("delta", 0.0, 1.0, integer=binary, initial=1.0),)
    if mode == ImplicationMode.INDICATOR_VANISHING:
        return (AuxVariable("delta", 0.0, 1.0, integer=False, initial=1.0),)
    variables = [AuxVariable("y", 0.0, np.inf, initial=0.0)]
    if spec.heaviside == HeavisideRepr.KKT_LP:
        variables += [
            AuxVariable("delta", 0.0, 1.0, initial=1.0),
            AuxVariable("lambda1", 0.0, np.inf, initial=0.0),
            AuxVariable("lambda2", 0.0, np.inf, initial=0.0),
        ]
    return tuple(variables)


def validate_big_m(
    spec: ImplicationSpec,
    box: Optional[Tuple[Sequence[float], Sequence[float]]],
) -> Tuple[Optional[float], Optional[float]]:
    """
    Check or derive M (and m) against a variable box.

    Args:
        spec: Implication
        box: (lower, upper) over the stage layout, or None to skip the check

    Returns:
        (M, m) to use; m is None outside trigger_eps_bigM

    Raises:
        InvalidBigMError: If a supplied M or m does not bound the expressions
            on the box, or none is supplied and the box bound is not finite
    """
    needs_lower = spec.mode == ImplicationMode.TRIGGER_EPS_BIG_M
    bounded = list(spec.consequence)
    if needs_lower:
        bounded.append(spec.trigger)

    if box is None:
        if spec.big_m is None or (needs_lower and spec.lower_m is None):
            raise InvalidBigMError(f"Implication {spec.name!r}: no big-M given and no variable box to derive it")
        return spec.big_m, spec.lower_m if needs_lower else None

    lower, upper = box
    highest = max(interval_bounds(expr, lower, upper)[1] for expr in bounded)
    if spec.big_m is None:
        if not np.isfinite(highest):
            raise InvalidBigMError(f"Implication {spec.name!r}: box gives no finite bound for M")
        big_m = max(highest, 0.0) + 1.0
    else:
        if highest > spec.big_m:
            raise InvalidBigMError(
                f"Implication {spec.name!r}: M={spec.big_m} is below the box bound {highest:.6g}"
            )
        big_m = spec.big_m

    lower_m = None
    if needs_lower:
        lowest = interval_bounds(spec.trigger, lower, upper)[0]
        if spec.lower_m is None:
            if not np.isfinite(lowest):
                raise InvalidBigMError(f"Implication {spec.name!r}: box gives no finite bound for m")
            lower_m = max(-lowest, 0.0) + spec.epsilon + 1.0
        else:
            if -lowest > spec.lower_m - spec.epsilon:
                raise InvalidBigMError(
                    f"Implication {spec.name!r}: m={spec.lower_m} does not cover -H up to {-lowest:.6g} plus epsilon"
                )
            lower_m = spec.lower_m
    return big_m, lower_m
