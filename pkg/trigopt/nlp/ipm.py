"""
Interior-Point Solver - Primal-dual barrier method for NlpProblem

Method outline:
- inequalities receive slacks, h(z) + s = 0 with s >= 0
- variables with lb == ub are removed and kept at their value
- objective and constraint rows are scaled by their gradient size at the start
- Fiacco-McCormick barrier reduction with a filter line search
- sparse symmetric indefinite factorization (diagonally pivoted SuperLU) with
  inertia correction
- l1 feasibility restoration; a restoration optimum with positive violation
  is reported as locally infeasible together with its certificate

The termination test and ``kkt_residual`` share one residual routine, so any
solution returned as optimal passes ``kkt_residual(problem, solution) <= tol``.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import SuperLU, splu

from trigopt.errors import ConfigError, DimensionError, DomainError
from trigopt.nlp.expr import param, var
from trigopt.nlp.problem import (
    ExprBlock,
    NlpProblem,
    evaluate,
    evaluate_with_derivatives,
)
from trigopt.nlp.quasi_newton import DampedBfgs

logger = logging.getLogger(__name__)

# Barrier and step rules
KAPPA_MU = 0.2
THETA_MU = 1.5
KAPPA_EPS = 10.0
KAPPA_SIGMA = 1e10
BOUND_PUSH = 1e-2
SCALE_MAX = 100.0
# Filter line search
GAMMA_THETA = 1e-5
GAMMA_PHI = 1e-5
GAMMA_ALPHA = 0.05
S_PHI = 2.3
S_THETA = 1.1
ETA_PHI = 1e-4
DELTA_SWITCH = 1.0
# Inertia correction
DELTA_W_FIRST = 1e-4
DELTA_W_MIN = 1e-20
DELTA_W_MAX = 1e40
DELTA_C_BAR = 1e-8
KAPPA_C = 0.25
KAPPA_W_MINUS = 1.0 / 3.0
KAPPA_W_PLUS = 8.0
KAPPA_W_PLUS_BAR = 100.0
ZERO_PIVOT = 1e-14
# Restoration
RESTORATION_ROUNDS = 5
RESTORATION_PROGRESS = 0.9


class NlpStatus(str, Enum):
    """Outcome of an NLP solve."""

    OPTIMAL = "optimal"
    LOCALLY_INFEASIBLE = "locally_infeasible"
    MAX_ITER = "max_iter"
    NUMERIC_FAILURE = "numeric_failure"


@dataclass(frozen=True)
class NlpOptions:
    """
    Tolerances and switches of the interior-point solver.

    Attributes:
        tol: Scaled stationarity and complementarity tolerance
        constr_viol_tol: Unscaled primal feasibility tolerance
        max_iter: Iteration cap (restoration iterations included)
        mu_init: Initial barrier parameter
        hessian: "exact" (second-order AD) or "bfgs"
        bfgs_retry: Re-solve with damped BFGS after a numeric failure
        restoration: Enable the feasibility restoration phase
        scaling: Enable gradient-based problem scaling
        restoration_penalty: l1 weight of the restoration problem
    """

    tol: float = 1e-6
    constr_viol_tol: float = 1e-6
    max_iter: int = 3000
    mu_init: float = 0.1
    hessian: str = "exact"
    bfgs_retry: bool = True
    restoration: bool = True
    scaling: bool = True
    restoration_penalty: float = 1000.0

    def __post_init__(self) -> None:
        if self.tol <= 0 or self.constr_viol_tol <= 0:
            raise ConfigError(f"Tolerances must be positive (tol={self.tol}, constr_viol_tol={self.constr_viol_tol})")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.mu_init <= 0:
            raise ConfigError(f"mu_init must be positive, got {self.mu_init}")
        if self.hessian not in ("exact", "bfgs"):
            raise ConfigError(f"hessian must be 'exact' or 'bfgs', got {self.hessian!r}")

    @classmethod
    def from_config(cls, section: Optional[Dict[str, Any]]) -> "NlpOptions":
        """Build options from the ``nlp`` section of config.yaml."""
        section = dict(section or {})
        known = {name for name in cls.__dataclass_fields__}
        unknown = set(section) - known
        if unknown:
            raise ConfigError(f"Unknown nlp option(s): {', '.join(sorted(unknown))}")
        converters = {"max_iter": int, "hessian": str, "bfgs_retry": bool, "restoration": bool, "scaling": bool}
        return cls(**{k: converters.get(k, float)(v) for k, v in section.items()})


@dataclass(frozen=True, eq=False)
class InfeasibilityCertificate:
    """
    Evidence of local infeasibility.

    Attributes:
        violation: Max-norm constraint violation at the restoration optimum
        stationarity: KKT residual of the l1 restoration problem there
    """

    violation: float
    stationarity: float


@dataclass(frozen=True, eq=False)
class NlpSolution:
    """
    Primal-dual point returned by solve_nlp.

    Multipliers follow the Lagrangian f + y_eq^T g + y_ineq^T h
    - z_lower^T (z - lb) + z_upper^T (z - ub), with y_ineq, z_lower,
    z_upper >= 0.
    """

    x: np.ndarray
    y_eq: np.ndarray
    y_ineq: np.ndarray
    z_lower: np.ndarray
    z_upper: np.ndarray
    objective: float
    status: NlpStatus
    iterations: int = 0
    stationarity: float = math.inf
    primal_feasibility: float = math.inf
    complementarity: float = math.inf
    objective_scale: float = 1.0
    eq_scale: Optional[np.ndarray] = None
    ineq_scale: Optional[np.ndarray] = None
    certificate: Optional[InfeasibilityCertificate] = None
    hessian: str = "exact"

    @property
    def kkt_error(self) -> float:
        return max(self.stationarity, self.primal_feasibility, self.complementarity)

    @property
    def success(self) -> bool:
        return self.status == NlpStatus.OPTIMAL


@dataclass(frozen=True)
class _Residual:
    stationarity: float
    feasibility: float
    complementarity: float

    @property
    def total(self) -> float:
        return max(self.stationarity, self.feasibility, self.complementarity)


def _residual(
    grad_hat: np.ndarray,
    jac_eq_hat: sparse.spmatrix,
    jac_in_hat: sparse.spmatrix,
    y_eq_hat: np.ndarray,
    y_in_hat: np.ndarray,
    zl_hat: np.ndarray,
    zu_hat: np.ndarray,
    x: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    h_hat: np.ndarray,
) -> _Residual:
    """KKT residual of the scaled problem on the free variables; feasibility unscaled."""
    s_max = 100.0
    finite_lb = np.isfinite(lb)
    finite_ub = np.isfinite(ub)
    r = grad_hat - zl_hat + zu_hat
    if y_eq_hat.size:
        r = r + jac_eq_hat.T @ y_eq_hat
    if y_in_hat.size:
        r = r + jac_in_hat.T @ y_in_hat

    dual_norm = np.abs(y_eq_hat).sum() + 2.0 * np.abs(y_in_hat).sum()
    bound_norm = np.abs(zl_hat).sum() + np.abs(zu_hat).sum() + np.abs(y_in_hat).sum()
    count = y_eq_hat.size + 2 * y_in_hat.size + x.size
    n_bounds = int(finite_lb.sum() + finite_ub.sum()) + y_in_hat.size
    s_d = max(s_max, (dual_norm + bound_norm) / max(count, 1)) / s_max
    s_c = max(s_max, bound_norm / max(n_bounds, 1)) / s_max

    stationarity = float(np.max(np.abs(r), initial=0.0))
    stationarity = max(stationarity, float(np.max(-y_in_hat, initial=0.0)))
    stationarity /= s_d

    feasibility = max(
        float(np.max(np.abs(g), initial=0.0)),
        float(np.max(h, initial=0.0)),
        float(np.max(lb - x, initial=0.0)),
        float(np.max(x - ub, initial=0.0)),
    )

    comp = [float(np.max(np.abs(y_in_hat * h_hat), initial=0.0))]
    if finite_lb.any():
        comp.append(float(np.max(np.abs(zl_hat[finite_lb] * (x[finite_lb] - lb[finite_lb])))))
    if finite_ub.any():
        comp.append(float(np.max(np.abs(zu_hat[finite_ub] * (ub[finite_ub] - x[finite_ub])))))
    complementarity = max(comp) / s_c
    return _Residual(stationarity, feasibility, complementarity)


def _scale_rows(scale: np.ndarray, matrix: sparse.spmatrix) -> sparse.csr_matrix:
    matrix = sparse.csr_matrix(matrix)
    if matrix.shape[0] == 0:
        return matrix
    return sparse.csr_matrix(matrix.multiply(scale.reshape(-1, 1)))


def _fixed_mask(problem: NlpProblem) -> np.ndarray:
    """Variables whose finite bounds coincide; infinite bounds never fix a variable."""
    lb, ub = problem.lb, problem.ub
    finite = np.isfinite(lb) & np.isfinite(ub)
    fixed = np.zeros(lb.shape, dtype=bool)
    fixed[finite] = ub[finite] - lb[finite] <= 1e-12 * np.maximum(1.0, np.abs(lb[finite]))
    return fixed


def kkt_residual(problem: NlpProblem, solution: NlpSolution) -> float:
    """
    Max of the stationarity, primal feasibility and complementarity residuals.

    Stationarity and complementarity are measured on the problem scaled with
    the factors recorded in the solution; feasibility is unscaled.

    Args:
        problem: The NLP that was solved
        solution: Primal-dual point

    Returns:
        Residual in max-norm; 0 at an exact KKT point
    """
    if solution.y_eq.size != problem.m_eq or solution.y_ineq.size != problem.m_ineq:
        raise DimensionError("Multiplier sizes do not match the constraint counts")
    z = np.asarray(solution.x, dtype=float)
    _, g, h, derivs = evaluate_with_derivatives(
        problem, z, solution.y_eq, solution.y_ineq, degree=1
    )
    free = ~_fixed_mask(problem)
    sf = solution.objective_scale
    sc_eq = np.ones(problem.m_eq) if solution.eq_scale is None else solution.eq_scale
    sc_in = np.ones(problem.m_ineq) if solution.ineq_scale is None else solution.ineq_scale
    residual = _residual(
        grad_hat=sf * derivs.gradient[free],
        jac_eq_hat=_scale_rows(sc_eq, derivs.jac_eq[:, np.flatnonzero(free)]),
        jac_in_hat=_scale_rows(sc_in, derivs.jac_ineq[:, np.flatnonzero(free)]),
        y_eq_hat=sf * solution.y_eq / sc_eq,
        y_in_hat=sf * solution.y_ineq / sc_in,
        zl_hat=sf * solution.z_lower[free],
        zu_hat=sf * solution.z_upper[free],
        x=z[free],
        lb=problem.lb[free],
        ub=problem.ub[free],
        g=g,
        h=h,
        h_hat=sc_in * h,
    )
    return residual.total


class _ScaledModel:
    """Scaled evaluation of an NlpProblem restricted to its free variables."""

    def __init__(self, problem: NlpProblem, base: np.ndarray, free: np.ndarray) -> None:
        self.problem = problem
        self.base = base
        self.free = free
        self.free_idx = np.flatnonzero(free)
        self.lb = problem.lb[free]
        self.ub = problem.ub[free]
        self.sf = 1.0
        self.sc_eq = np.ones(problem.m_eq)
        self.sc_in = np.ones(problem.m_ineq)

    def full(self, x: np.ndarray) -> np.ndarray:
        z = self.base.copy()
        z[self.free_idx] = x
        return z

    def values(self, x: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        f, g, h = evaluate(self.problem, self.full(x))
        return self.sf * f, self.sc_eq * g, self.sc_in * h, g, h

    def derivatives(self, x: np.ndarray, y_eq_hat: np.ndarray, y_in_hat: np.ndarray, degree: int):
        f, g, h, d = evaluate_with_derivatives(
            self.problem,
            self.full(x),
            y_eq_hat * self.sc_eq,
            y_in_hat * self.sc_in,
            objective_factor=self.sf,
            degree=degree,
        )
        grad = self.sf * d.gradient[self.free_idx]
        jac_eq = _scale_rows(self.sc_eq, d.jac_eq[:, self.free_idx])
        jac_in = _scale_rows(self.sc_in, d.jac_ineq[:, self.free_idx])
        hess = d.hessian[self.free_idx][:, self.free_idx] if degree > 1 else None
        return _Point(
            f=self.sf * f,
            g_hat=self.sc_eq * g,
            h_hat=self.sc_in * h,
            g=g,
            h=h,
            grad=grad,
            jac_eq=sparse.csr_matrix(jac_eq),
            jac_in=sparse.csr_matrix(jac_in),
            hess=hess,
            raw_gradient=d.gradient,
            raw_jac_eq=d.jac_eq,
            raw_jac_in=d.jac_ineq,
        )

    def compute_scaling(self, point: "_Point") -> None:
        grad_max = float(np.max(np.abs(point.grad), initial=0.0))
        self.sf = min(1.0, SCALE_MAX / grad_max) if grad_max > 0 else 1.0
        for jac, attr in ((point.jac_eq, "sc_eq"), (point.jac_in, "sc_in")):
            if jac.shape[0] == 0:
                continue
            row_max = np.asarray(abs(jac).max(axis=1).todense()).reshape(-1)
            scales = np.ones(jac.shape[0])
            big = row_max > SCALE_MAX
            scales[big] = SCALE_MAX / row_max[big]
            setattr(self, attr, scales)


@dataclass
class _Point:
    f: float
    g_hat: np.ndarray
    h_hat: np.ndarray
    g: np.ndarray
    h: np.ndarray
    grad: np.ndarray
    jac_eq: sparse.csr_matrix
    jac_in: sparse.csr_matrix
    hess: Optional[sparse.csr_matrix]
    raw_gradient: np.ndarray
    raw_jac_eq: sparse.csr_matrix
    raw_jac_in: sparse.csr_matrix


@dataclass
class _Iterate:
    x: np.ndarray
    s: np.ndarray
    y_eq: np.ndarray
    y_in: np.ndarray
    zl: np.ndarray
    zu: np.ndarray
    vs: np.ndarray


@dataclass
class _Step:
    dx: np.ndarray
    ds: np.ndarray
    dy_eq: np.ndarray
    dy_in: np.ndarray
    dzl: np.ndarray
    dzu: np.ndarray
    dvs: np.ndarray


class _Factor:
    """Sparse symmetric factorization P K P^T = L D L^T read off a diagonally pivoted LU."""

    def __init__(self, lu: SuperLU) -> None:
        self.lu = lu

    @property
    def symmetric(self) -> bool:
        """True when every pivot was taken on the diagonal."""
        return bool(np.array_equal(self.lu.perm_r, self.lu.perm_c))

    @property
    def pivots(self) -> np.ndarray:
        return self.lu.U.diagonal()

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.lu.solve(rhs)


def _inertia(factor: _Factor) -> Tuple[int, int, int]:
    """
    (positive, negative, zero) eigenvalue counts of the factored matrix.

    With diagonal pivots U = D L^T, so the signs of the U diagonal are the
    inertia. An off-diagonal pivot means a zero pivot was met and is reported
    as one zero eigenvalue.
    """
    pivots = factor.pivots
    zero = int(np.count_nonzero(np.abs(pivots) <= ZERO_PIVOT))
    pos = int(np.count_nonzero(pivots > ZERO_PIVOT))
    neg = int(np.count_nonzero(pivots < -ZERO_PIVOT))
    if not factor.symmetric:
        zero = max(zero, 1)
    return pos, neg, zero


def _factorize(matrix: sparse.spmatrix) -> Optional[Tuple[_Factor, Tuple[int, int, int]]]:
    matrix = sparse.csc_matrix(matrix)
    if not np.all(np.isfinite(matrix.data)):
        return None
    try:
        lu = splu(
            matrix,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except (RuntimeError, ValueError):
        return None
    factor = _Factor(lu)
    return factor, _inertia(factor)


def _fraction_to_boundary(distance: np.ndarray, rate: np.ndarray, tau: float) -> float:
    """Largest alpha in (0, 1] keeping distance + alpha * rate >= (1 - tau) * distance."""
    shrinking = rate < 0
    if not np.any(shrinking):
        return 1.0
    return float(min(1.0, np.min(-tau * distance[shrinking] / rate[shrinking])))


def _push_into_bounds(x: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    x = x.copy()
    width = ub - lb
    # an infinite width leaves the relative push in charge
    push_l = BOUND_PUSH * np.minimum(np.maximum(1.0, np.abs(lb)), width)
    push_u = BOUND_PUSH * np.minimum(np.maximum(1.0, np.abs(ub)), width)
    has_lb = np.isfinite(lb)
    has_ub = np.isfinite(ub)
    x[has_lb] = np.maximum(x[has_lb], lb[has_lb] + push_l[has_lb])
    x[has_ub] = np.minimum(x[has_ub], ub[has_ub] - push_u[has_ub])
    return x


class InteriorPointSolver:
    """
    Primal-dual interior-point method with filter line search.

    Args:
        problem: Problem to solve
        options: Solver options
    """

    def __init__(self, problem: NlpProblem, options: Optional[NlpOptions] = None) -> None:
        self.problem = problem
        self.options = options or NlpOptions()
        self.iterations = 0

    # Public -----------------------------------------------------------------

    def solve(self, initial_guess: np.ndarray) -> NlpSolution:
        """
        Run the method from an initial guess.

        Args:
            initial_guess: Finite point of dimension n (clipped into bounds)

        Returns:
            NlpSolution with status and residuals
        """
        problem = self.problem
        z0 = np.asarray(initial_guess, dtype=float).reshape(-1)
        if z0.size != problem.n:
            raise DimensionError(f"Initial guess has size {z0.size}, problem has {problem.n}")
        if not np.all(np.isfinite(z0)):
            raise ValueError("Initial guess must be finite")

        fixed = _fixed_mask(problem)
        base = np.clip(z0, problem.lb, problem.ub)
        base[fixed] = problem.lb[fixed]
        self.model = _ScaledModel(problem, base, ~fixed)
        self.lb = self.model.lb
        self.ub = self.model.ub
        self.has_lb = np.isfinite(self.lb)
        self.has_ub = np.isfinite(self.ub)

        x = _push_into_bounds(base[~fixed], self.lb, self.ub)
        m_eq, m_in = problem.m_eq, problem.m_ineq
        try:
            point = self.model.derivatives(x, np.zeros(m_eq), np.zeros(m_in), degree=1)
            if self.options.scaling:
                self.model.compute_scaling(point)
                point = self.model.derivatives(x, np.zeros(m_eq), np.zeros(m_in), degree=1)
        except DomainError as exc:
            logger.warning("Initial point outside the expression domain: %s", exc)
            return self._failure(base, NlpStatus.NUMERIC_FAILURE)

        s = np.maximum(-point.h_hat, BOUND_PUSH)
        it = _Iterate(
            x=x,
            s=s,
            y_eq=np.zeros(m_eq),
            y_in=np.zeros(m_in),
            zl=np.where(self.has_lb, 1.0, 0.0),
            zu=np.where(self.has_ub, 1.0, 0.0),
            vs=np.ones(m_in),
        )
        self._initialize_multipliers(it, point)
        return self._run(it)

    # Main loop --------------------------------------------------------------

    def _run(self, it: _Iterate) -> NlpSolution:
        opts = self.options
        mu = opts.mu_init
        bfgs = DampedBfgs(it.x.size) if opts.hessian == "bfgs" else None
        degree = 1 if bfgs is not None else 2
        self.last_delta_w = 0.0

        try:
            point = self.model.derivatives(it.x, it.y_eq, it.y_in, degree)
        except DomainError:
            return self._package(it, None, NlpStatus.NUMERIC_FAILURE)

        theta0 = self._theta(point, it.s)
        theta_max = 1e4 * max(1.0, theta0)
        theta_min = 1e-4 * max(1.0, theta0)
        filter_entries: List[Tuple[float, float]] = []

        while True:
            residual = self._termination_residual(it, point)
            if (
                residual.stationarity <= opts.tol
                and residual.complementarity <= opts.tol
                and residual.feasibility <= opts.constr_viol_tol
            ):
                return self._package(it, point, NlpStatus.OPTIMAL)
            if self.iterations >= opts.max_iter:
                return self._package(it, point, NlpStatus.MAX_ITER)

            while self._barrier_error(it, point, mu) <= KAPPA_EPS * mu and mu > opts.tol / 10.0:
                mu = max(opts.tol / 10.0, min(KAPPA_MU * mu, mu**THETA_MU))
                filter_entries = []

            tau = max(0.99, 1.0 - mu)
            hessian = bfgs.matrix if bfgs is not None else point.hess
            step = self._newton_step(it, point, hessian, mu)
            if step is None:
                logger.debug("KKT system could not be regularized")
                return self._package(it, point, NlpStatus.NUMERIC_FAILURE)

            alpha_primal = min(
                _fraction_to_boundary(it.x[self.has_lb] - self.lb[self.has_lb], step.dx[self.has_lb], tau),
                _fraction_to_boundary(self.ub[self.has_ub] - it.x[self.has_ub], -step.dx[self.has_ub], tau),
                _fraction_to_boundary(it.s, step.ds, tau),
            )
            alpha_dual = min(
                _fraction_to_boundary(it.zl[self.has_lb], step.dzl[self.has_lb], tau),
                _fraction_to_boundary(it.zu[self.has_ub], step.dzu[self.has_ub], tau),
                _fraction_to_boundary(it.vs, step.dvs, tau),
            )

            accepted = self._line_search(it, point, step, mu, alpha_primal, filter_entries, theta_max, theta_min)
            if accepted is None:
                if not opts.restoration:
                    return self._package(it, point, NlpStatus.NUMERIC_FAILURE)
                outcome = self._restore(it, point, mu)
                if isinstance(outcome, NlpSolution):
                    return outcome
                it = outcome
                filter_entries = []
                try:
                    point = self.model.derivatives(it.x, it.y_eq, it.y_in, 1)
                    self._initialize_multipliers(it, point)
                    point = self.model.derivatives(it.x, it.y_eq, it.y_in, degree)
                except DomainError:
                    return self._package(it, None, NlpStatus.NUMERIC_FAILURE)
                if bfgs is not None:
                    bfgs = DampedBfgs(it.x.size)
                self.iterations += 1
                continue

            alpha = accepted
            previous_x = it.x
            previous_lagrangian_grad = None
            it.x = it.x + alpha * step.dx
            it.s = it.s + alpha * step.ds
            it.y_eq = it.y_eq + alpha * step.dy_eq
            it.y_in = it.y_in + alpha * step.dy_in
            if bfgs is not None:
                previous_lagrangian_grad = self._lagrangian_gradient(point, it)
            it.zl = it.zl + alpha_dual * step.dzl
            it.zu = it.zu + alpha_dual * step.dzu
            it.vs = it.vs + alpha_dual * step.dvs
            self._safeguard_bound_multipliers(it, mu)

            try:
                point = self.model.derivatives(it.x, it.y_eq, it.y_in, degree)
            except DomainError:
                return self._package(it, None, NlpStatus.NUMERIC_FAILURE)
            if bfgs is not None and previous_lagrangian_grad is not None:
                bfgs.update(it.x - previous_x, self._lagrangian_gradient(point, it) - previous_lagrangian_grad)

            self.iterations += 1
            if logger.isEnabledFor(logging.DEBUG):
                logger.debug(
                    "iter %4d  obj %.8e  inf_pr %.2e  mu %.1e  alpha %.2e",
                    self.iterations,
                    point.f / self.model.sf,
                    self._theta(point, it.s),
                    mu,
                    alpha,
                )

    # Linear algebra ----------------------------------------------------------

    def _assemble(
        self,
        it: _Iterate,
        point: _Point,
        hessian,
        delta_w: float,
        delta_c: float,
        sigma_x: np.ndarray,
        sigma_s: np.ndarray,
    ):
        n = it.x.size
        m_eq = it.y_eq.size
        d_s = sigma_s + delta_w
        e = 1.0 / d_s + delta_c
        k = sparse.csr_matrix(hessian) + sparse.diags(sigma_x + delta_w)
        if it.y_in.size:
            jin = point.jac_in
            k = k + jin.T @ sparse.diags(1.0 / e) @ jin
        if m_eq:
            jeq = point.jac_eq
            matrix = sparse.bmat([[k, jeq.T], [jeq, sparse.diags(np.full(m_eq, -delta_c))]], format="csc")
        else:
            matrix = sparse.csc_matrix(k)
        return matrix, d_s, e

    def _newton_step(self, it: _Iterate, point: _Point, hessian, mu: float) -> Optional[_Step]:
        n = it.x.size
        m_eq = it.y_eq.size
        dl = np.where(self.has_lb, it.x - self.lb, 1.0)
        du = np.where(self.has_ub, self.ub - it.x, 1.0)
        sigma_l = np.where(self.has_lb, it.zl / dl, 0.0)
        sigma_u = np.where(self.has_ub, it.zu / du, 0.0)
        sigma_x = sigma_l + sigma_u
        sigma_s = it.vs / it.s

        barrier_grad = point.grad - np.where(self.has_lb, mu / dl, 0.0) + np.where(self.has_ub, mu / du, 0.0)
        r_x = -(barrier_grad + point.jac_eq.T @ it.y_eq + point.jac_in.T @ it.y_in)
        r_s = mu / it.s - it.y_in
        r_eq = -point.g_hat
        r_in = -(point.h_hat + it.s)

        delta_w = 0.0
        delta_c = 0.0
        while True:
            matrix, d_s, e = self._assemble(it, point, hessian, delta_w, delta_c, sigma_x, sigma_s)
            factored = _factorize(matrix)
            if factored is not None:
                factor, (pos, neg, zero) = factored
                if zero == 0 and pos == n and neg == m_eq:
                    rhs = np.concatenate([r_x - point.jac_in.T @ ((r_s / d_s - r_in) / e), r_eq])
                    try:
                        solution = factor.solve(rhs)
                    except (RuntimeError, ValueError):
                        solution = None
                    if solution is not None and np.all(np.isfinite(solution)):
                        break
            # constraint block is regularized before the Hessian block
            if delta_c == 0.0 and m_eq:
                delta_c = DELTA_C_BAR * mu**KAPPA_C
                continue
            if delta_w == 0.0:
                if self.last_delta_w == 0.0:
                    delta_w = DELTA_W_FIRST
                else:
                    delta_w = max(DELTA_W_MIN, KAPPA_W_MINUS * self.last_delta_w)
            else:
                delta_w *= KAPPA_W_PLUS_BAR if self.last_delta_w == 0.0 else KAPPA_W_PLUS
            if delta_w > DELTA_W_MAX:
                return None

        if delta_w > 0.0:
            self.last_delta_w = delta_w

        dx = solution[:n]
        dy_eq = solution[n:]
        dy_in = (point.jac_in @ dx + r_s / d_s - r_in) / e if it.y_in.size else np.zeros(0)
        ds = (r_s - dy_in) / d_s if it.y_in.size else np.zeros(0)
        dzl = np.where(self.has_lb, mu / dl - it.zl - sigma_l * dx, 0.0)
        dzu = np.where(self.has_ub, mu / du - it.zu + sigma_u * dx, 0.0)
        dvs = mu / it.s - it.vs - sigma_s * ds if it.y_in.size else np.zeros(0)
        return _Step(dx=dx, ds=ds, dy_eq=dy_eq, dy_in=dy_in, dzl=dzl, dzu=dzu, dvs=dvs)

    def _initialize_multipliers(self, it: _Iterate, point: _Point) -> None:
        """Least-squares estimate of the constraint multipliers."""
        n = it.x.size
        m_eq = it.y_eq.size
        m_in = it.y_in.size
        if m_eq + m_in == 0:
            return
        identity = sparse.identity(n, format="csr")
        matrix, d_s, e = self._assemble(it, point, identity, 0.0, 0.0, np.zeros(n), np.ones(m_in))
        r_x = -(point.grad - it.zl + it.zu)
        r_s = it.vs.copy()
        if m_in:
            r_x = r_x - point.jac_in.T @ ((r_s / d_s) / e)
        rhs = np.concatenate([r_x, np.zeros(m_eq)])
        factored = _factorize(matrix)
        if factored is None:
            return
        try:
            solution = factored[0].solve(rhs)
        except (RuntimeError, ValueError):
            return
        if not np.all(np.isfinite(solution)):
            return
        y_eq = solution[n:]
        y_in = (point.jac_in @ solution[:n] + r_s / d_s) / e if m_in else np.zeros(0)
        estimate = np.concatenate([y_eq, y_in])
        if estimate.size and np.max(np.abs(estimate)) > 1e3:
            return
        it.y_eq = y_eq
        it.y_in = y_in

    # Line search -------------------------------------------------------------

    def _theta(self, point: _Point, s: np.ndarray) -> float:
        return float(np.abs(point.g_hat).sum() + np.abs(point.h_hat + s).sum())

    def _barrier(self, f: float, x: np.ndarray, s: np.ndarray, mu: float) -> float:
        value = f
        if self.has_lb.any():
            value -= mu * float(np.sum(np.log(x[self.has_lb] - self.lb[self.has_lb])))
        if self.has_ub.any():
            value -= mu * float(np.sum(np.log(self.ub[self.has_ub] - x[self.has_ub])))
        if s.size:
            value -= mu * float(np.sum(np.log(s)))
        return value

    def _line_search(
        self,
        it: _Iterate,
        point: _Point,
        step: _Step,
        mu: float,
        alpha_max: float,
        filter_entries: List[Tuple[float, float]],
        theta_max: float,
        theta_min: float,
    ) -> Optional[float]:
        theta = self._theta(point, it.s)
        phi = self._barrier(point.f, it.x, it.s, mu)
        dl = np.where(self.has_lb, it.x - self.lb, 1.0)
        du = np.where(self.has_ub, self.ub - it.x, 1.0)
        grad_phi_x = point.grad - np.where(self.has_lb, mu / dl, 0.0) + np.where(self.has_ub, mu / du, 0.0)
        slope = float(grad_phi_x @ step.dx)
        if it.s.size:
            slope -= mu * float(np.sum(step.ds / it.s))

        scale = max(
            float(np.max(np.abs(step.dx) / (1.0 + np.abs(it.x)), initial=0.0)),
            float(np.max(np.abs(step.ds) / (1.0 + np.abs(it.s)), initial=0.0)),
        )
        if scale < 10.0 * np.finfo(float).eps:
            return alpha_max

        if slope < 0:
            alpha_min = min(GAMMA_THETA, GAMMA_PHI * theta / -slope)
            if theta <= theta_min:
                alpha_min = min(alpha_min, DELTA_SWITCH * theta**S_THETA / (-slope) ** S_PHI)
        else:
            alpha_min = GAMMA_THETA
        alpha_min = max(GAMMA_ALPHA * alpha_min, 1e-14)

        alpha = alpha_max
        while alpha >= alpha_min:
            x_trial = it.x + alpha * step.dx
            s_trial = it.s + alpha * step.ds
            try:
                f_trial, g_hat, h_hat, _, _ = self.model.values(x_trial)
            except DomainError:
                alpha *= 0.5
                continue
            theta_trial = float(np.abs(g_hat).sum() + np.abs(h_hat + s_trial).sum())
            phi_trial = self._barrier(f_trial, x_trial, s_trial, mu)
            if not math.isfinite(phi_trial) or theta_trial >= theta_max:
                alpha *= 0.5
                continue
            if any(theta_trial >= t and phi_trial >= p for t, p in filter_entries):
                alpha *= 0.5
                continue

            switching = slope < 0 and alpha * (-slope) ** S_PHI > DELTA_SWITCH * theta**S_THETA
            if theta <= theta_min and switching:
                if phi_trial <= phi + ETA_PHI * alpha * slope:
                    return alpha
            elif theta_trial <= (1.0 - GAMMA_THETA) * theta or phi_trial <= phi - GAMMA_PHI * theta:
                filter_entries.append(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta))
                return alpha
            alpha *= 0.5
        return None

    def _safeguard_bound_multipliers(self, it: _Iterate, mu: float) -> None:
        if self.has_lb.any():
            dist = it.x[self.has_lb] - self.lb[self.has_lb]
            it.zl[self.has_lb] = np.clip(it.zl[self.has_lb], mu / (KAPPA_SIGMA * dist), KAPPA_SIGMA * mu / dist)
        if self.has_ub.any():
            dist = self.ub[self.has_ub] - it.x[self.has_ub]
            it.zu[self.has_ub] = np.clip(it.zu[self.has_ub], mu / (KAPPA_SIGMA * dist), KAPPA_SIGMA * mu / dist)
        if it.s.size:
            it.vs = np.clip(it.vs, mu / (KAPPA_SIGMA * it.s), KAPPA_SIGMA * mu / it.s)

    def _lagrangian_gradient(self, point: _Point, it: _Iterate) -> np.ndarray:
        return point.grad + point.jac_eq.T @ it.y_eq + point.jac_in.T @ it.y_in

    # Error measures ------------------------------------------------------------

    def _termination_residual(self, it: _Iterate, point: _Point) -> _Residual:
        return _residual(
            grad_hat=point.grad,
            jac_eq_hat=point.jac_eq,
            jac_in_hat=point.jac_in,
            y_eq_hat=it.y_eq,
            y_in_hat=it.y_in,
            zl_hat=it.zl,
            zu_hat=it.zu,
            x=it.x,
            lb=self.lb,
            ub=self.ub,
            g=point.g,
            h=point.h,
            h_hat=point.h_hat,
        )

    def _barrier_error(self, it: _Iterate, point: _Point, mu: float) -> float:
        r_x = point.grad + point.jac_eq.T @ it.y_eq + point.jac_in.T @ it.y_in - it.zl + it.zu
        r_s = it.y_in - it.vs
        stationarity = max(float(np.max(np.abs(r_x), initial=0.0)), float(np.max(np.abs(r_s), initial=0.0)))
        feasibility = max(
            float(np.max(np.abs(point.g_hat), initial=0.0)),
            float(np.max(np.abs(point.h_hat + it.s), initial=0.0)),
        )
        comp = [float(np.max(np.abs(it.vs * it.s - mu), initial=0.0))]
        if self.has_lb.any():
            comp.append(float(np.max(np.abs(it.zl[self.has_lb] * (it.x[self.has_lb] - self.lb[self.has_lb]) - mu))))
        if self.has_ub.any():
            comp.append(float(np.max(np.abs(it.zu[self.has_ub] * (self.ub[self.has_ub] - it.x[self.has_ub]) - mu))))
        s_max = 100.0
        bound_norm = np.abs(it.zl).sum() + np.abs(it.zu).sum() + np.abs(it.vs).sum()
        count = it.y_eq.size + 2 * it.y_in.size + it.x.size
        n_bounds = int(self.has_lb.sum() + self.has_ub.sum()) + it.s.size
        s_d = max(s_max, (np.abs(it.y_eq).sum() + np.abs(it.y_in).sum() + bound_norm) / max(count, 1)) / s_max
        s_c = max(s_max, bound_norm / max(n_bounds, 1)) / s_max
        return max(stationarity / s_d, feasibility, max(comp) / s_c)

    # Restoration ---------------------------------------------------------------

    def _restore(self, it: _Iterate, point: _Point, mu: float):
        """
        Minimize the l1 constraint violation near the current point.

        Returns a new iterate to continue from, or a terminal NlpSolution
        (locally infeasible or failure).
        """
        opts = self.options
        problem = self.problem
        current = self.model.full(it.x)
        violation = _violation(point.g, point.h)
        for round_index in range(RESTORATION_ROUNDS):
            remaining = opts.max_iter - self.iterations
            if remaining <= 0:
                return self._package(it, point, NlpStatus.MAX_ITER)
            elastic = build_restoration_problem(problem, current, math.sqrt(mu), opts.restoration_penalty)
            inner_options = NlpOptions(
                tol=opts.tol,
                constr_viol_tol=opts.constr_viol_tol,
                max_iter=remaining,
                mu_init=max(mu, opts.tol),
                hessian=opts.hessian,
                bfgs_retry=False,
                restoration=False,
                scaling=opts.scaling,
                restoration_penalty=opts.restoration_penalty,
            )
            inner_guess = restoration_initial_guess(problem, current)
            inner = InteriorPointSolver(elastic, inner_options)
            result = inner.solve(inner_guess)
            self.iterations += inner.iterations
            logger.debug(
                "restoration round %d: status %s, %d iterations",
                round_index,
                result.status.value,
                inner.iterations,
            )
            if result.status == NlpStatus.MAX_ITER:
                return self._package(it, point, NlpStatus.MAX_ITER)
            if result.status != NlpStatus.OPTIMAL:
                return self._package(it, point, NlpStatus.NUMERIC_FAILURE)

            candidate = result.x[: problem.n]
            try:
                _, g, h = evaluate(problem, candidate)
            except DomainError:
                return self._package(it, point, NlpStatus.NUMERIC_FAILURE)
            new_violation = _violation(g, h)
            if new_violation <= opts.constr_viol_tol:
                x = candidate[self.model.free_idx]
                x = np.clip(x, self.lb, self.ub)
                h_hat = self.model.sc_in * h
                return _Iterate(
                    x=_push_into_bounds(x, self.lb, self.ub) if self._at_bound(x) else x,
                    s=np.maximum(-h_hat, mu),
                    y_eq=np.zeros(problem.m_eq),
                    y_in=np.zeros(problem.m_ineq),
                    zl=np.where(self.has_lb, 1.0, 0.0),
                    zu=np.where(self.has_ub, 1.0, 0.0),
                    vs=np.ones(problem.m_ineq),
                )
            if new_violation > RESTORATION_PROGRESS * violation:
                certificate = InfeasibilityCertificate(violation=new_violation, stationarity=result.kkt_error)
                logger.info(
                    "Locally infeasible: violation %.3e, restoration stationarity %.2e",
                    new_violation,
                    certificate.stationarity,
                )
                return self._package_point(candidate, NlpStatus.LOCALLY_INFEASIBLE, certificate)
            current = candidate
            violation = new_violation

        certificate = InfeasibilityCertificate(violation=violation, stationarity=result.kkt_error)
        return self._package_point(current, NlpStatus.LOCALLY_INFEASIBLE, certificate)

    def _at_bound(self, x: np.ndarray) -> bool:
        return bool(np.any(x[self.has_lb] <= self.lb[self.has_lb]) or np.any(x[self.has_ub] >= self.ub[self.has_ub]))

    # Packaging -------------------------------------------------------------------

    def _failure(self, z: np.ndarray, status: NlpStatus) -> NlpSolution:
        problem = self.problem
        try:
            objective = evaluate(problem, z)[0]
        except DomainError:
            objective = math.nan
        return NlpSolution(
            x=z.copy(),
            y_eq=np.zeros(problem.m_eq),
            y_ineq=np.zeros(problem.m_ineq),
            z_lower=np.zeros(problem.n),
            z_upper=np.zeros(problem.n),
            objective=objective,
            status=status,
            iterations=self.iterations,
            hessian=self.options.hessian,
        )

    def _package_point(
        self, z: np.ndarray, status: NlpStatus, certificate: Optional[InfeasibilityCertificate] = None
    ) -> NlpSolution:
        solution = self._failure(z, status)
        try:
            _, g, h = evaluate(self.problem, z)
            feasibility = _violation(g, h)
        except DomainError:
            feasibility = math.inf
        return NlpSolution(
            x=solution.x,
            y_eq=solution.y_eq,
            y_ineq=solution.y_ineq,
            z_lower=solution.z_lower,
            z_upper=solution.z_upper,
            objective=solution.objective,
            status=status,
            iterations=self.iterations,
            primal_feasibility=feasibility,
            objective_scale=self.model.sf,
            eq_scale=self.model.sc_eq.copy(),
            ineq_scale=self.model.sc_in.copy(),
            certificate=certificate,
            hessian=self.options.hessian,
        )

    def _package(self, it: _Iterate, point: Optional[_Point], status: NlpStatus) -> NlpSolution:
        model = self.model
        problem = self.problem
        z = model.full(it.x)
        if point is None:
            return self._package_point(z, status)
        sf = model.sf
        y_eq = it.y_eq * model.sc_eq / sf
        y_in = it.y_in * model.sc_in / sf
        z_lower = np.zeros(problem.n)
        z_upper = np.zeros(problem.n)
        z_lower[model.free_idx] = it.zl / sf
        z_upper[model.free_idx] = it.zu / sf

        fixed_idx = np.flatnonzero(~model.free)
        if fixed_idx.size:
            reduced = point.raw_gradient + point.raw_jac_eq.T @ y_eq + point.raw_jac_in.T @ y_in
            z_lower[fixed_idx] = np.maximum(reduced[fixed_idx], 0.0)
            z_upper[fixed_idx] = np.maximum(-reduced[fixed_idx], 0.0)

        residual = self._termination_residual(it, point)
        return NlpSolution(
            x=z,
            y_eq=y_eq,
            y_ineq=y_in,
            z_lower=z_lower,
            z_upper=z_upper,
            objective=point.f / sf,
            status=status,
            iterations=self.iterations,
            stationarity=residual.stationarity,
            primal_feasibility=residual.feasibility,
            complementarity=residual.complementarity,
            objective_scale=sf,
            eq_scale=model.sc_eq.copy(),
            ineq_scale=model.sc_in.copy(),
            hessian=self.options.hessian,
        )


def _violation(g: np.ndarray, h: np.ndarray) -> float:
    return max(float(np.max(np.abs(g), initial=0.0)), float(np.max(h, initial=0.0)))


def build_restoration_problem(
    problem: NlpProblem, reference: np.ndarray, proximal_weight: float, penalty: float
) -> NlpProblem:
    """
    Elastic l1 problem used by the restoration phase.

    Variables are (z, p_eq, n_eq, p_ineq) with

        min  penalty * (sum p_eq + sum n_eq + sum p_ineq)
             + proximal_weight / 2 * || D (z - reference) ||^2
        s.t. g(z) - p_eq + n_eq = 0,  h(z) - p_ineq <= 0,  p, n >= 0

    where D = diag(min(1, 1 / |reference|)) on the free variables.
    """
    n, m_eq, m_in = problem.n, problem.m_eq, problem.m_ineq
    n_total = n + 2 * m_eq + m_in
    free_idx = np.flatnonzero(~_fixed_mask(problem))
    elastic_idx = np.arange(n, n_total)

    objective = [
        ExprBlock(outputs=(penalty * var(0),), var_index=elastic_idx.reshape(-1, 1), label="penalty"),
    ]
    if free_idx.size:
        weights = np.minimum(1.0, 1.0 / np.maximum(np.abs(reference[free_idx]), 1e-300))
        objective.append(
            ExprBlock(
                outputs=(0.5 * proximal_weight * param(1) * param(1) * (var(0) - param(0)) ** 2,),
                var_index=free_idx.reshape(-1, 1),
                params=np.column_stack([reference[free_idx], weights]),
                label="proximal",
            )
        )

    equalities = list(problem.equalities)
    if m_eq:
        p_eq = np.arange(n, n + m_eq)
        n_eq = np.arange(n + m_eq, n + 2 * m_eq)
        equalities.append(
            ExprBlock(
                outputs=(var(1) - var(0),),
                var_index=np.column_stack([p_eq, n_eq]),
                row_index=np.arange(m_eq).reshape(-1, 1),
                label="elastic",
            )
        )
    inequalities = list(problem.inequalities)
    if m_in:
        inequalities.append(
            ExprBlock(
                outputs=(-var(0),),
                var_index=np.arange(n + 2 * m_eq, n_total).reshape(-1, 1),
                row_index=np.arange(m_in).reshape(-1, 1),
                label="elastic",
            )
        )

    lb = np.concatenate([problem.lb, np.zeros(n_total - n)])
    ub = np.concatenate([problem.ub, np.full(n_total - n, np.inf)])
    return NlpProblem(
        n=n_total,
        lb=lb,
        ub=ub,
        objective=tuple(objective),
        equalities=tuple(equalities),
        inequalities=tuple(inequalities),
        m_eq=m_eq,
        m_ineq=m_in,
        relaxable=problem.relaxable,
        relaxation=problem.relaxation,
    )


def restoration_initial_guess(problem: NlpProblem, reference: np.ndarray) -> np.ndarray:
    """Start of the elastic problem: reference point with consistent elastic variables."""
    _, g, h = evaluate(problem, reference)
    margin = 1e-3
    p_eq = np.maximum(g, 0.0) + margin
    n_eq = np.maximum(-g, 0.0) + margin
    p_in = np.maximum(h, 0.0) + margin
    return np.concatenate([reference, p_eq, n_eq, p_in])


def solve_nlp(
    problem: NlpProblem, initial_guess: np.ndarray, options: Optional[NlpOptions] = None
) -> NlpSolution:
    """
    Solve an NLP with the interior-point method.

    Deterministic for fixed (problem, initial_guess, options). On a numeric
    failure with exact Hessians and ``bfgs_retry`` set, the solve is repeated
    once with a damped BFGS Hessian.

    Args:
        problem: The NLP
        initial_guess: Finite starting point of dimension n
        options: Solver options (defaults when omitted)

    Returns:
        NlpSolution
    """
    options = options or NlpOptions()
    solver = InteriorPointSolver(problem, options)
    solution = solver.solve(initial_guess)
    logger.debug(
        "NLP finished: status %s after %d iterations, objective %.8e",
        solution.status.value,
        solution.iterations,
        solution.objective,
    )
    if solution.status == NlpStatus.NUMERIC_FAILURE and options.bfgs_retry and options.hessian == "exact":
        logger.info("Numeric failure with exact Hessian; retrying with damped BFGS")
        retry_options = NlpOptions(
            tol=options.tol,
            constr_viol_tol=options.constr_viol_tol,
            max_iter=options.max_iter,
            mu_init=options.mu_init,
            hessian="bfgs",
            bfgs_retry=False,
            restoration=options.restoration,
            scaling=options.scaling,
            restoration_penalty=options.restoration_penalty,
        )
        retry = InteriorPointSolver(problem, retry_options).solve(initial_guess)
        if retry.status != NlpStatus.NUMERIC_FAILURE:
            return retry
    return solution
