"""
NLP Container - Smooth nonlinear programs assembled from expression blocks

A problem is

    minimize f(z)  subject to  g(z) = 0,  h(z) <= 0,  lb <= z <= ub

where f, g and h are sums of contributions from ExprBlocks. A block holds a
template of output expressions over k local variables together with a table
mapping each of its B instances to global variables (and, for constraints,
to rows). Several blocks may add into the same row.

Inequality rows may be tagged relaxable; ``relaxation`` shifts exactly those
rows, giving h_i(z) - tau <= 0 for the homotopy solver.
"""

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from trigopt.errors import DimensionError, DomainError
from trigopt.nlp.expr import (
    Expr,
    Jet,
    forward,
    referenced_parameters,
    referenced_variables,
    substitute,
    topological_order,
    var,
)


@dataclass(frozen=True, eq=False)
class ExprBlock:
    """
    A batched group of expressions sharing one template.

    Attributes:
        outputs: Template expressions over local variables 0..k-1
        var_index: Global variable index per instance and local variable, (B, k)
        row_index: Constraint row per instance and output, (B, len(outputs));
            unused for objective blocks
        params: Per-instance parameter table, (B, p)
        label: Name used when reporting objective contributions
    """

    outputs: Tuple[Expr, ...]
    var_index: np.ndarray
    row_index: Optional[np.ndarray] = None
    params: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self) -> None:
        outputs = tuple(self.outputs)
        var_index = np.atleast_2d(np.asarray(self.var_index, dtype=np.int64))
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "var_index", var_index)
        batch, width = var_index.shape

        used = referenced_variables(outputs)
        if used and used[-1] >= width:
            raise DimensionError(
                f"Block template references local variable {used[-1]} but only {width} are mapped"
            )

        if self.row_index is not None:
            row_index = np.asarray(self.row_index, dtype=np.int64).reshape(batch, len(outputs))
            object.__setattr__(self, "row_index", row_index)

        used_params = referenced_parameters(outputs)
        if self.params is not None:
            params = np.asarray(self.params, dtype=float).reshape(batch, -1)
            object.__setattr__(self, "params", params)
            if used_params and used_params[-1] >= params.shape[1]:
                raise DimensionError(f"Block template references parameter {used_params[-1]}")
        elif used_params:
            raise DimensionError("Block template references parameters but none were supplied")

    @property
    def batch(self) -> int:
        return int(self.var_index.shape[0])

    @property
    def width(self) -> int:
        return int(self.var_index.shape[1])

    @cached_property
    def nodes(self) -> List[Expr]:
        return topological_order(self.outputs)

    def jets(self, z: np.ndarray, degree: int) -> List[Jet]:
        """Evaluate the template for every instance at the global point z."""
        x = z[self.var_index] if self.width else np.zeros((self.batch, 0))
        return forward(self.nodes, self.outputs, x, self.params, degree)


@dataclass(frozen=True, eq=False)
class NlpProblem:
    """
    Smooth NLP with exact derivatives.

    Attributes:
        n: Number of variables
        lb: Variable lower bounds (may be -inf)
        ub: Variable upper bounds (may be +inf)
        objective: Blocks whose outputs are summed into f
        equalities: Blocks adding into the rows of g
        inequalities: Blocks adding into the rows of h
        m_eq: Number of equality rows
        m_ineq: Number of inequality rows
        relaxable: Mask of inequality rows shifted by ``relaxation``
        relaxation: Homotopy parameter tau (0 means unrelaxed)
    """

    n: int
    lb: np.ndarray
    ub: np.ndarray
    objective: Tuple[ExprBlock, ...] = ()
    equalities: Tuple[ExprBlock, ...] = ()
    inequalities: Tuple[ExprBlock, ...] = ()
    m_eq: int = 0
    m_ineq: int = 0
    relaxable: Optional[np.ndarray] = None
    relaxation: float = 0.0

    def __post_init__(self) -> None:
        lb = np.asarray(self.lb, dtype=float).reshape(-1)
        ub = np.asarray(self.ub, dtype=float).reshape(-1)
        if lb.size != self.n or ub.size != self.n:
            raise DimensionError(f"Bounds have sizes {lb.size}/{ub.size}, expected {self.n}")
        if np.any(np.isnan(lb)) or np.any(np.isnan(ub)):
            raise DimensionError("Variable bounds contain NaN")
        if np.any(lb > ub):
            bad = int(np.argmax(lb > ub))
            raise ValueError(f"Variable {bad} has lb={lb[bad]} > ub={ub[bad]}")
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)
        object.__setattr__(self, "objective", tuple(self.objective))
        object.__setattr__(self, "equalities", tuple(self.equalities))
        object.__setattr__(self, "inequalities", tuple(self.inequalities))

        relaxable = (
            np.zeros(self.m_ineq, dtype=bool)
            if self.relaxable is None
            else np.asarray(self.relaxable, dtype=bool).reshape(-1)
        )
        if relaxable.size != self.m_ineq:
            raise DimensionError(f"Relaxable mask has size {relaxable.size}, expected {self.m_ineq}")
        object.__setattr__(self, "relaxable", relaxable)
        if self.relaxation < 0.0:
            raise ValueError(f"Relaxation must be non-negative, got {self.relaxation}")

        for block in self.objective + self.equalities + self.inequalities:
            if block.width and (block.var_index.min() < 0 or block.var_index.max() >= self.n):
                raise DimensionError(f"Block {block.label!r} maps outside 0..{self.n - 1}")
        for blocks, rows in ((self.equalities, self.m_eq), (self.inequalities, self.m_ineq)):
            for block in blocks:
                if block.row_index is None:
                    raise DimensionError("Constraint block without row_index")
                if block.row_index.size and (block.row_index.min() < 0 or block.row_index.max() >= rows):
                    raise DimensionError(f"Constraint block {block.label!r} maps outside 0..{rows - 1}")

    @classmethod
    def from_exprs(
        cls,
        n: int,
        objective: Optional[Expr] = None,
        equalities: Sequence[Expr] = (),
        inequalities: Sequence[Expr] = (),
        lb: Optional[Sequence[float]] = None,
        ub: Optional[Sequence[float]] = None,
        relaxable: Optional[Sequence[bool]] = None,
    ) -> "NlpProblem":
        """
        Build a problem from expressions written over global variable indices.

        Args:
            n: Number of variables
            objective: Objective expression (zero when omitted)
            equalities: Expressions constrained to = 0
            inequalities: Expressions constrained to <= 0
            lb: Lower bounds (default -inf)
            ub: Upper bounds (default +inf)
            relaxable: Relaxable flag per inequality

        Returns:
            Problem with one single-instance block per expression
        """
        objective_blocks = () if objective is None else (_global_block(objective, None, "objective"),)
        eq_blocks = tuple(_global_block(e, i, "eq") for i, e in enumerate(equalities))
        ineq_blocks = tuple(_global_block(e, i, "ineq") for i, e in enumerate(inequalities))
        return cls(
            n=n,
            lb=np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float),
            ub=np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float),
            objective=objective_blocks,
            equalities=eq_blocks,
            inequalities=ineq_blocks,
            m_eq=len(eq_blocks),
            m_ineq=len(ineq_blocks),
            relaxable=None if relaxable is None else np.asarray(relaxable, dtype=bool),
        )

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "NlpProblem":
        """Copy of the problem with new variable bounds."""
        return dataclasses.replace(self, lb=np.asarray(lb, dtype=float), ub=np.asarray(ub, dtype=float))

    @property
    def n_relaxable(self) -> int:
        return int(np.count_nonzero(self.relaxable))

    @cached_property
    def jacobian_structure(self) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
        """Declared (row, col) nonzero pattern of the equality and inequality Jacobians."""
        return {
            "eq": _constraint_structure(self.equalities),
            "ineq": _constraint_structure(self.inequalities),
        }

    @cached_property
    def hessian_structure(self) -> Tuple[np.ndarray, np.ndarray]:
        """Declared (row, col) nonzero pattern of the Lagrangian Hessian (both triangles)."""
        pairs = set()
        for block in self.objective + self.equalities + self.inequalities:
            for instance in block.var_index:
                for i in instance:
                    for j in instance:
                        pairs.add((int(i), int(j)))
        if not pairs:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        rows, cols = zip(*sorted(pairs))
        return np.asarray(rows), np.asarray(cols)


@dataclass(frozen=True, eq=False)
class Derivatives:
    """First and second derivatives of an NlpProblem at a point."""

    gradient: np.ndarray
    jac_eq: sparse.csr_matrix
    jac_ineq: sparse.csr_matrix
    hessian: sparse.csr_matrix


@dataclass(frozen=True, eq=False)
class _Evaluation:
    objective: float
    g: np.ndarray
    h: np.ndarray
    derivatives: Optional[Derivatives] = None
    terms: Dict[str, float] = field(default_factory=dict)


def _global_block(expr: Expr, row: Optional[int], label: str) -> ExprBlock:
    used = referenced_variables(expr)
    (local,) = substitute([expr], {g: var(i) for i, g in enumerate(used)})
    return ExprBlock(
        outputs=(local,),
        var_index=np.asarray([used], dtype=np.int64).reshape(1, len(used)),
        row_index=None if row is None else np.asarray([[row]]),
        label=label,
    )


def _constraint_structure(blocks: Sequence[ExprBlock]) -> Tuple[np.ndarray, np.ndarray]:
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    for block in blocks:
        for j in range(len(block.outputs)):
            rows.append(np.repeat(block.row_index[:, j], block.width))
            cols.append(block.var_index.reshape(-1))
    all_rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    if all_rows.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    pairs = np.unique(np.stack([all_rows, np.concatenate(cols)]), axis=1)
    return pairs[0], pairs[1]


def _check_point(problem: NlpProblem, point: np.ndarray) -> np.ndarray:
    z = np.asarray(point, dtype=float).reshape(-1)
    if z.size != problem.n:
        raise DimensionError(f"Point has size {z.size}, problem has {problem.n} variables")
    return z


def _evaluate(
    problem: NlpProblem,
    z: np.ndarray,
    degree: int,
    y_eq: Optional[np.ndarray] = None,
    y_ineq: Optional[np.ndarray] = None,
    objective_factor: float = 1.0,
) -> _Evaluation:
    n = problem.n
    objective = 0.0
    terms: Dict[str, float] = {}
    grad = np.zeros(n)
    g = np.zeros(problem.m_eq)
    h = np.zeros(problem.m_ineq)
    h_rows: List[np.ndarray] = []
    h_cols: List[np.ndarray] = []
    h_data: List[np.ndarray] = []

    def add_hessian(block: ExprBlock, hess: Optional[np.ndarray], weight: np.ndarray) -> None:
        if hess is None or degree < 2:
            return
        k = block.width
        rows = np.broadcast_to(block.var_index[:, :, None], (block.batch, k, k))
        cols = np.broadcast_to(block.var_index[:, None, :], (block.batch, k, k))
        h_rows.append(rows.reshape(-1))
        h_cols.append(cols.reshape(-1))
        h_data.append((weight[:, None, None] * hess).reshape(-1))

    for block in problem.objective:
        jets = block.jets(z, degree)
        for value, gradient, hess in jets:
            contribution = float(np.sum(value))
            objective += contribution
            terms[block.label] = terms.get(block.label, 0.0) + contribution
            if degree > 0 and gradient is not None:
                np.add.at(grad, block.var_index.reshape(-1), gradient.reshape(-1))
            add_hessian(block, hess, np.full(block.batch, objective_factor))

    jacobians = []
    for blocks, values, multipliers, rows_total in (
        (problem.equalities, g, y_eq, problem.m_eq),
        (problem.inequalities, h, y_ineq, problem.m_ineq),
    ):
        j_rows: List[np.ndarray] = []
        j_cols: List[np.ndarray] = []
        j_data: List[np.ndarray] = []
        for block in blocks:
            jets = block.jets(z, degree)
            for j, (value, gradient, hess) in enumerate(jets):
                rows = block.row_index[:, j]
                np.add.at(values, rows, value)
                if degree > 0 and gradient is not None:
                    j_rows.append(np.repeat(rows, block.width))
                    j_cols.append(block.var_index.reshape(-1))
                    j_data.append(gradient.reshape(-1))
                if multipliers is not None:
                    add_hessian(block, hess, multipliers[rows])
        if degree > 0:
            jacobians.append(_csr(j_rows, j_cols, j_data, (rows_total, n)))

    if problem.m_ineq and problem.relaxation:
        h = h - problem.relaxation * problem.relaxable

    if not (np.isfinite(objective) and np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
        raise DomainError("Non-finite function value")

    derivatives = None
    if degree > 0:
        hessian = _csr(h_rows, h_cols, h_data, (n, n))
        derivatives = Derivatives(
            gradient=grad, jac_eq=jacobians[0], jac_ineq=jacobians[1], hessian=hessian
        )
    return _Evaluation(objective=objective, g=g, h=h, derivatives=derivatives, terms=terms)


def _csr(rows, cols, data, shape) -> sparse.csr_matrix:
    if not rows:
        return sparse.csr_matrix(shape)
    return sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=shape
    ).tocsr()


def evaluate(problem: NlpProblem, point: Sequence[float]) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Evaluate objective and constraints.

    Args:
        problem: The NLP
        point: Point of dimension n

    Returns:
        (objective, g values, h values) with h including any relaxation shift

    Raises:
        DimensionError: If the point has the wrong size
        DomainError: If an expression is evaluated outside its domain
    """
    result = _evaluate(problem, _check_point(problem, point), degree=0)
    return result.objective, result.g, result.h


def derivatives(
    problem: NlpProblem,
    point: Sequence[float],
    y_eq: Optional[Sequence[float]] = None,
    y_ineq: Optional[Sequence[float]] = None,
    objective_factor: float = 1.0,
) -> Derivatives:
    """
    Exact gradient, constraint Jacobians and Lagrangian Hessian.

    The Hessian is of objective_factor * f + y_eq^T g + y_ineq^T h; missing
    multipliers count as zero.

    Args:
        problem: The NLP
        point: Point of dimension n
        y_eq: Equality multipliers
        y_ineq: Inequality multipliers
        objective_factor: Weight of the objective Hessian

    Returns:
        Derivatives with sparse (CSR) matrices
    """
    z = _check_point(problem, point)
    y_eq_arr = np.zeros(problem.m_eq) if y_eq is None else np.asarray(y_eq, dtype=float)
    y_ineq_arr = np.zeros(problem.m_ineq) if y_ineq is None else np.asarray(y_ineq, dtype=float)
    if y_eq_arr.size != problem.m_eq or y_ineq_arr.size != problem.m_ineq:
        raise DimensionError("Multiplier sizes do not match the constraint counts")
    result = _evaluate(problem, z, 2, y_eq_arr, y_ineq_arr, objective_factor)
    return result.derivatives


def evaluate_with_derivatives(
    problem: NlpProblem,
    point: np.ndarray,
    y_eq: np.ndarray,
    y_ineq: np.ndarray,
    objective_factor: float = 1.0,
    degree: int = 2,
) -> Tuple[float, np.ndarray, np.ndarray, Derivatives]:
    """Values and derivatives from a single sweep (used by the solvers)."""
    result = _evaluate(problem, _check_point(problem, point), degree, y_eq, y_ineq, objective_factor)
    return result.objective, result.g, result.h, result.derivatives


def objective_terms(problem: NlpProblem, point: Sequence[float]) -> Dict[str, float]:
    """Objective contribution per block label."""
    return dict(_evaluate(problem, _check_point(problem, point), degree=0).terms)


def constraint_violation(problem: NlpProblem, point: Sequence[float]) -> float:
    """Max-norm violation of equalities, inequalities and bounds."""
    z = _check_point(problem, point)
    _, g, h = evaluate(problem, z)
    parts = [0.0]
    if g.size:
        parts.append(float(np.max(np.abs(g))))
    if h.size:
        parts.append(float(np.max(h)))
    parts.append(float(np.max(problem.lb - z, initial=0.0)))
    parts.append(float(np.max(z - problem.ub, initial=0.0)))
    return max(parts)
