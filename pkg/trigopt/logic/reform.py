"""
Reformulations - Compile ImplicationSpecs into smooth constraints

Each compiler returns CompiledConstraints whose expressions are written over
the stage layout of the OcpSpec followed by the auxiliary variables handed in
as expressions (usually ``var(offset + j)``). Product constraints are tagged
relaxable so the homotopy solver can shift them to <= tau.
"""

from typing import List, Optional, Sequence, Tuple

from trigopt.errors import DimensionError
from trigopt.logic.implication import (
    Classification,
    CompiledConstraint,
    HeavisideRepr,
    ImplicationMode,
    ImplicationSpec,
    ReformulationOutput,
    auxiliary_variables,
    validate_big_m,
)
from trigopt.nlp.expr import Expr, exp

Box = Tuple[Sequence[float], Sequence[float]]


def big_m_indicator(spec: ImplicationSpec, delta: Expr, box: Optional[Box] = None) -> List[CompiledConstraint]:
    """
    G_j - M (1 - delta) <= 0 for every consequence component.

    Args:
        spec: Implication in indicator mode
        delta: Indicator variable (binary, or boxed [0, 1] when relaxed)
        box: Stage-layout variable box used to validate M

    Returns:
        One inequality per component of G

    Raises:
        InvalidBigMError: If M does not bound G on the box
    """
    big_m, _ = validate_big_m(spec, box)
    return [
        CompiledConstraint(expr=g - big_m * (1.0 - delta), label=f"{spec.name}:bigM[{j}]")
        for j, g in enumerate(spec.consequence)
    ]


def vanishing_indicator(spec: ImplicationSpec, delta: Expr) -> List[CompiledConstraint]:
    """delta * G_j <= 0, tagged relaxable."""
    return [
        CompiledConstraint(expr=delta * g, relaxable=True, label=f"{spec.name}:vanishing[{j}]")
        for j, g in enumerate(spec.consequence)
    ]


def eps_big_m_trigger(spec: ImplicationSpec, delta: Expr, box: Optional[Box] = None) -> List[CompiledConstraint]:
    """
    Link a binary delta to the sign of H with margin epsilon.

    Compiles H <= M delta, H >= -m (1 - delta) + epsilon and
    G_j <= M (1 - delta). With delta = 1 this forces H >= epsilon and G <= 0;
    with delta = 0 it forces H <= 0, so H = 0 only admits delta = 0.
    """
    big_m, lower_m = validate_big_m(spec, box)
    h = spec.trigger
    constraints = [
        CompiledConstraint(expr=h - big_m * delta, label=f"{spec.name}:trigger_upper"),
        CompiledConstraint(expr=-h - lower_m * (1.0 - delta) + spec.epsilon, label=f"{spec.name}:trigger_lower"),
    ]
    constraints += [
        CompiledConstraint(expr=g - big_m * (1.0 - delta), label=f"{spec.name}:bigM[{j}]")
        for j, g in enumerate(spec.consequence)
    ]
    return constraints


def mpcc_trigger(spec: ImplicationSpec, y: Expr) -> List[CompiledConstraint]:
    """
    0 <= y complementary to y - H >= 0, plus y * G_j <= 0.

    y >= 0 is left to the variable bound; the pair is compiled as
    H - y <= 0 and y (y - H) <= 0, so y = max(H, 0) at tau = 0.
    """
    h = spec.trigger
    constraints = [
        CompiledConstraint(expr=h - y, label=f"{spec.name}:y_above_trigger"),
        CompiledConstraint(expr=y * (y - h), relaxable=True, label=f"{spec.name}:complementarity"),
    ]
    constraints += [
        CompiledConstraint(expr=y * g, relaxable=True, label=f"{spec.name}:vanishing[{j}]")
        for j, g in enumerate(spec.consequence)
    ]
    return constraints


def heaviside_cost(
    spec: ImplicationSpec,
    delta: Optional[Expr] = None,
    lambda1: Optional[Expr] = None,
    lambda2: Optional[Expr] = None,
) -> Tuple[Optional[Expr], List[CompiledConstraint]]:
    """
    Reward term -w * sigma(H) in the representation chosen by the ImplicationSpec.

    Args:
        spec: Implication
        delta: Indicator variable (delta_variable and kkt_lp)
        lambda1: Multiplier of delta <= 1 (kkt_lp)
        lambda2: Multiplier of delta >= 0 (kkt_lp)

    Returns:
        (cost expression or None when w = 0, extra constraints)
    """
    w = spec.weight
    if spec.heaviside == HeavisideRepr.SIGMOID:
        if w == 0:
            return None, []
        return -w / (1.0 + exp(-spec.beta * spec.trigger)), []

    if spec.heaviside == HeavisideRepr.KKT_LP:
        if delta is None or lambda1 is None or lambda2 is None:
            raise DimensionError(f"Implication {spec.name!r}: kkt_lp needs delta, lambda1 and lambda2")
        constraints = [
            CompiledConstraint(expr=spec.trigger - lambda1 + lambda2, kind="eq", label=f"{spec.name}:lp_stationarity"),
            CompiledConstraint(expr=lambda1 * (1.0 - delta), relaxable=True, label=f"{spec.name}:lp_upper"),
            CompiledConstraint(expr=lambda2 * delta, relaxable=True, label=f"{spec.name}:lp_lower"),
        ]
        return (-w * delta if w else None), constraints

    if w == 0:
        return None, []
    if delta is None:
        raise DimensionError(f"Implication {spec.name!r}: delta_variable cost needs a delta variable")
    return -w * delta, []


def reformulate(
    spec: ImplicationSpec,
    aux: Sequence[Expr],
    box: Optional[Box] = None,
    integer: Optional[bool] = None,
) -> ReformulationOutput:
    """
    Compile a spec into variables, constraints and a cost term.

    Args:
        spec: Implication
        aux: One expression per auxiliary_variables(spec) entry, in order
        box: Stage-layout variable box for the big-M checks
        integer: Integrality override for delta (False gives the relaxation)

    Returns:
        ReformulationOutput

    Raises:
        DimensionError: If ``aux`` does not match the auxiliary variables
        InvalidBigMError: If M or m fails the interval check
    """
    variables = auxiliary_variables(spec, integer)
    if len(aux) != len(variables):
        raise DimensionError(
            f"Implication {spec.name!r} needs {len(variables)} auxiliary variables, got {len(aux)}"
        )
    named = {v.role: expr for v, expr in zip(variables, aux)}
    mode = spec.mode

    if mode == ImplicationMode.INDICATOR_BIG_M:
        constraints = big_m_indicator(spec, named["delta"], box)
    elif mode == ImplicationMode.INDICATOR_VANISHING:
        constraints = vanishing_indicator(spec, named["delta"])
    elif mode == ImplicationMode.TRIGGER_EPS_BIG_M:
        constraints = eps_big_m_trigger(spec, named["delta"], box)
    else:
        constraints = mpcc_trigger(spec, named["y"])

    cost, extra = heaviside_cost(spec, named.get("delta"), named.get("lambda1"), named.get("lambda2"))
    constraints = constraints + extra

    if any(v.integer for v in variables):
        classification = Classification.MINLP
    elif mode == ImplicationMode.INDICATOR_VANISHING:
        classification = Classification.MPVC
    elif mode == ImplicationMode.TRIGGER_MPCC:
        classification = Classification.MPCC
    else:
        classification = Classification.NLP
    return ReformulationOutput(
        variables=variables,
        constraints=tuple(constraints),
        cost=cost,
        classification=classification,
    )
