"""Mixed-integer and homotopy solution paths on top of the NLP solver."""

from trigopt.solvers.bnb import (
    BnbNode,
    BnbOptions,
    BranchAndBound,
    MinlpSolution,
    MinlpStatus,
    fix_binaries,
    select_branch_variable,
    solve_bnb,
)
from trigopt.solvers.enumerate import MAX_ENUMERATED_BINARIES, enumerate_exhaustive
from trigopt.solvers.homotopy import (
    HomotopyIteration,
    HomotopyParams,
    HomotopyStatus,
    HomotopyTrace,
    relax_vanishing,
    schedule_preview,
    solve_homotopy,
    vanishing_violation,
)

__all__ = [
    "BnbNode",
    "BnbOptions",
    "BranchAndBound",
    "HomotopyIteration",
    "HomotopyParams",
    "HomotopyStatus",
    "HomotopyTrace",
    "MAX_ENUMERATED_BINARIES",
    "MinlpSolution",
    "MinlpStatus",
    "enumerate_exhaustive",
    "fix_binaries",
    "relax_vanishing",
    "schedule_preview",
    "solve_bnb",
    "vanishing_violation",
]
