"""Expression graphs, NLP containers and the interior-point solver."""

from trigopt.nlp.expr import (
    Expr,
    const,
    cos,
    dot,
    evaluate_expr,
    exp,
    interval_bounds,
    norm2,
    param,
    sin,
    sqrt,
    substitute,
    sum_exprs,
    sumsq,
    tan,
    value_and_derivatives,
    var,
    variables,
)
from trigopt.nlp.ipm import (
    InfeasibilityCertificate,
    InteriorPointSolver,
    NlpOptions,
    NlpSolution,
    NlpStatus,
    kkt_residual,
    solve_nlp,
)
from trigopt.nlp.problem import (
    Derivatives,
    ExprBlock,
    NlpProblem,
    constraint_violation,
    derivatives,
    evaluate,
    evaluate_with_derivatives,
    objective_terms,
)

__all__ = [
    "Expr",
    "ExprBlock",
    "Derivatives",
    "InfeasibilityCertificate",
    "InteriorPointSolver",
    "NlpOptions",
    "NlpProblem",
    "NlpSolution",
    "NlpStatus",
    "const",
    "constraint_violation",
    "cos",
    "derivatives",
    "dot",
    "evaluate",
    "evaluate_expr",
    "evaluate_with_derivatives",
    "exp",
    "interval_bounds",
    "kkt_residual",
    "norm2",
    "objective_terms",
    "param",
    "sin",
    "solve_nlp",
    "sqrt",
    "substitute",
    "sum_exprs",
    "sumsq",
    "tan",
    "value_and_derivatives",
    "var",
    "variables",
]
