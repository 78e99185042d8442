"""
Truth Table - Which (sign of H, sign of G) combinations an encoding admits

Signs are '-', '0' or '+'. The reference column is the implication
H >= 0 => G <= 0 (Heaviside convention sigma(0) = 1); the bare product
H * G <= 0 is the naive encoding it is compared against. Compiled modes are
checked by searching a finite candidate set for auxiliary values that satisfy
every compiled constraint at tau = 0.

In indicator modes delta plays the role of the trigger: sign '+' or '0'
means delta = 1, '-' means delta = 0.
"""

import itertools
from typing import Dict, List, Tuple, Union

from trigopt.errors import ConfigError
from trigopt.logic.implication import ImplicationMode, ImplicationSpec, auxiliary_variables
from trigopt.logic.reform import reformulate
from trigopt.nlp.expr import evaluate_expr, var

SIGN_VALUES: Dict[str, float] = {"-": -1.0, "0": 0.0, "+": 1.0}
FEASIBILITY_TOL = 1e-12
TABLE_BOX = ([-1.0, -1.0], [1.0, 1.0])
TABLE_BIG_M = 2.0

REFERENCE_FORMS = ("implication", "product")


def _sign_value(sign: str) -> float:
    if sign not in SIGN_VALUES:
        raise ConfigError(f"Sign must be one of '-', '0', '+', got {sign!r}")
    return SIGN_VALUES[sign]


def _candidates(role: str, h: float) -> List[float]:
    if role == "delta":
        return [0.0, 1.0]
    if role == "y":
        return sorted({0.0, max(h, 0.0), abs(h), 1.0})
    return sorted({0.0, abs(h), 1.0})


def check_truth_table(h_sign: str, g_sign: str, form: Union[str, ImplicationMode]) -> bool:
    """
    Report whether an encoding admits the given sign combination.

    Args:
        h_sign: Sign of the trigger H (or of delta's trigger in indicator modes)
        g_sign: Sign of the consequence G
        form: "implication", "product", or an ImplicationMode value

    Returns:
        True when some choice of auxiliary values satisfies the encoding
    """
    h = _sign_value(h_sign)
    g = _sign_value(g_sign)

    if form == "implication":
        return not (h >= 0.0 and g > 0.0)
    if form == "product":
        return h * g <= 0.0

    try:
        mode = ImplicationMode(form)
    except ValueError as exc:
        raise ConfigError(f"Unknown truth-table form {form!r}") from exc

    trigger = var(0) if mode.has_trigger else None
    spec = ImplicationSpec(
        consequence=(var(1),),
        mode=mode,
        trigger=trigger,
        big_m=TABLE_BIG_M,
        lower_m=TABLE_BIG_M if mode == ImplicationMode.TRIGGER_EPS_BIG_M else None,
        name="truth_table",
    )
    aux_vars = auxiliary_variables(spec)
    compiled = reformulate(spec, [var(2 + j) for j in range(len(aux_vars))], box=TABLE_BOX)

    choices = []
    for aux in aux_vars:
        if aux.role == "delta" and not mode.has_trigger:
            choices.append([1.0 if h >= 0.0 else 0.0])
        else:
            choices.append(_candidates(aux.role, h))

    for values in itertools.product(*choices):
        if any(v < a.lower or v > a.upper for v, a in zip(values, aux_vars)):
            continue
        point = [h, g, *values]
        ok = True
        for constraint in compiled.constraints:
            residual = evaluate_expr(constraint.expr, point)
            if constraint.kind == "eq":
                ok = abs(residual) <= FEASIBILITY_TOL
            else:
                ok = residual <= FEASIBILITY_TOL
            if not ok:
                break
        if ok:
            return True
    return False


def truth_row(a: int, b: int) -> Tuple[str, str]:
    """
    Representative signs of a truth-table row.

    Args:
        a: 1 when the trigger is active (H > 0), else 0 (H < 0)
        b: 1 when the consequence holds (G < 0), else 0 (G > 0)

    Returns:
        (h_sign, g_sign)
    """
    if a not in (0, 1) or b not in (0, 1):
        raise ConfigError(f"Truth-table entries must be 0 or 1, got ({a}, {b})")
    return ("+" if a else "-"), ("-" if b else "+")


def truth_table(form: Union[str, ImplicationMode]) -> Dict[Tuple[int, int], bool]:
    """Admission of the four strict rows (a, b) for one form."""
    return {(a, b): check_truth_table(*truth_row(a, b), form) for a in (0, 1) for b in (0, 1)}
