"""Logical implications and their smooth or mixed-integer reformulations."""

from trigopt.logic.implication import (
    AuxVariable,
    Classification,
    CompiledConstraint,
    HeavisideRepr,
    ImplicationBinding,
    ImplicationMode,
    ImplicationSpec,
    ReformulationOutput,
    auxiliary_variables,
    normalize_weight,
    validate_big_m,
)
from trigopt.logic.postprocess import polish_indicators, round_relaxed
from trigopt.logic.reform import (
    big_m_indicator,
    eps_big_m_trigger,
    heaviside_cost,
    mpcc_trigger,
    reformulate,
    vanishing_indicator,
)
from trigopt.logic.truth_table import check_truth_table, truth_row, truth_table

__all__ = [
    "AuxVariable",
    "Classification",
    "CompiledConstraint",
    "HeavisideRepr",
    "ImplicationBinding",
    "ImplicationMode",
    "ImplicationSpec",
    "ReformulationOutput",
    "auxiliary_variables",
    "big_m_indicator",
    "check_truth_table",
    "eps_big_m_trigger",
    "heaviside_cost",
    "mpcc_trigger",
    "normalize_weight",
    "polish_indicators",
    "reformulate",
    "round_relaxed",
    "truth_row",
    "truth_table",
    "validate_big_m",
    "vanishing_indicator",
]
