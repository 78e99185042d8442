"""
Direct Multiple Shooting - Transcribe an OcpSpec into an NlpProblem

Variables are ordered stage-major:

    x_0, u_0, aux_0, x_1, u_1, aux_1, ..., x_N, aux_N, s, [t_f]

where aux_k holds the auxiliary variables (delta, y, lambda) of every
implication placed at node k. States and controls are optimized in scaled
units x / x_scale and u / u_scale; model callbacks always see physical
values. Each interval contributes one batched instance of the shooting gap
F(x_k, u_k, t_d) / x_scale - x_{k+1} = 0, with F from fixed-step RK4.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from trigopt.errors import ConfigError
from trigopt.logic.implication import (
    Classification,
    ImplicationBinding,
    auxiliary_variables,
)
from trigopt.logic.reform import reformulate
from trigopt.nlp.expr import Expr, const, param, substitute, var
from trigopt.nlp.problem import ExprBlock, NlpProblem, objective_terms
from trigopt.ocp.integrators import integrate
from trigopt.ocp.spec import OcpSpec, StageImplication

logger = logging.getLogger(__name__)

INDICATOR_LABEL = "indicator"


@dataclass(frozen=True, eq=False)
class TranscribedNlp:
    """
    NlpProblem together with the maps back to the OCP.

    Attributes:
        nlp: The transcribed problem
        ocp: Source OCP template
        steps_per_interval: RK4 sub-steps per shooting interval
        state_index: Global index of x_k[i], shape (N + 1, n_x)
        control_index: Global index of u_k[j], shape (N, n_u)
        slack_index: Global index of the terminal slacks
        final_time_index: Global index of t_f when it is free
        aux_index: Per implication, global index of its auxiliaries, (nodes, n_aux)
        bindings: Placed implications (used for polishing and reporting)
        integer_mask: Variables marked binary
        classification: NLP, MINLP, MPVC or MPCC
    """

    nlp: NlpProblem
    ocp: OcpSpec
    steps_per_interval: int
    state_index: np.ndarray
    control_index: np.ndarray
    slack_index: np.ndarray
    final_time_index: Optional[int]
    aux_index: Dict[str, np.ndarray]
    bindings: Tuple[ImplicationBinding, ...]
    integer_mask: np.ndarray
    classification: Classification

    @property
    def horizon(self) -> int:
        return self.ocp.horizon

    @property
    def t_d(self) -> Optional[float]:
        """Interval length, None when the final time is free."""
        if self.ocp.final_time is None:
            return None
        return self.ocp.final_time / self.ocp.horizon

    @property
    def integer_indices(self) -> np.ndarray:
        return np.flatnonzero(self.integer_mask)

    @property
    def delta_indices(self) -> np.ndarray:
        """Global indices of every indicator variable, binding by binding."""
        parts = [b.delta_index for b in self.bindings if b.delta_index is not None]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    def states(self, z) -> np.ndarray:
        """Physical states, shape (N + 1, n_x)."""
        z = np.asarray(z, dtype=float)
        return z[self.state_index] * self.ocp.x_scale

    def controls(self, z) -> np.ndarray:
        """Physical controls, shape (N, n_u)."""
        z = np.asarray(z, dtype=float)
        return z[self.control_index] * self.ocp.u_scale

    def slacks(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float)[self.slack_index]

    def final_time(self, z) -> float:
        if self.final_time_index is None:
            return float(self.ocp.final_time)
        return float(np.asarray(z, dtype=float)[self.final_time_index])

    def indicators(self, z) -> Dict[str, np.ndarray]:
        """Delta values per implication name, one entry per placed node."""
        z = np.asarray(z, dtype=float)
        return {b.name: z[b.delta_index] for b in self.bindings if b.delta_index is not None}

    def objective_terms(self, z) -> Dict[str, float]:
        """Objective contribution per cost label."""
        return objective_terms(self.nlp, z)

    def with_problem(self, nlp: NlpProblem) -> "TranscribedNlp":
        """Copy sharing the index maps but holding a modified NlpProblem."""
        return dataclasses.replace(self, nlp=nlp)


def _as_expr(value) -> Expr:
    return value if isinstance(value, Expr) else const(float(value))


def _cost_terms(terms) -> Dict[str, Expr]:
    if terms is None:
        return {}
    if isinstance(terms, dict):
        return {label: _as_expr(term) for label, term in terms.items()}
    return {"stage_cost": _as_expr(terms)}


class _Builder:
    """Accumulates variables, blocks and rows while transcribing."""

    def __init__(self) -> None:
        self.n = 0
        self.lb: List[float] = []
        self.ub: List[float] = []
        self.integer: List[bool] = []
        self.objective: List[ExprBlock] = []
        self.equalities: List[ExprBlock] = []
        self.inequalities: List[ExprBlock] = []
        self.m_eq = 0
        self.m_ineq = 0
        self.relaxable: List[bool] = []

    def add_variables(self, lower: Sequence[float], upper: Sequence[float], integer: Sequence[bool] = ()) -> np.ndarray:
        count = len(lower)
        index = np.arange(self.n, self.n + count)
        self.n += count
        self.lb.extend(float(v) for v in lower)
        self.ub.extend(float(v) for v in upper)
        self.integer.extend(list(integer) if integer else [False] * count)
        return index

    def add_constraints(
        self,
        outputs: Sequence[Expr],
        var_index: np.ndarray,
        kind: str,
        label: str,
        relaxable: Optional[Sequence[bool]] = None,
        params: Optional[np.ndarray] = None,
    ) -> None:
        outputs = [_as_expr(o) for o in outputs]
        if not outputs:
            return
        var_index = np.atleast_2d(var_index)
        batch = var_index.shape[0]
        if batch == 0:
            return
        width = len(outputs)
        start = self.m_eq if kind == "eq" else self.m_ineq
        rows = start + np.arange(batch * width).reshape(batch, width)
        block = ExprBlock(outputs=tuple(outputs), var_index=var_index, row_index=rows, params=params, label=label)
        if kind == "eq":
            self.equalities.append(block)
            self.m_eq += batch * width
        else:
            self.inequalities.append(block)
            self.m_ineq += batch * width
            flags = [False] * width if relaxable is None else list(relaxable)
            self.relaxable.extend(flags * batch)

    def add_objective(self, expr: Expr, var_index: np.ndarray, label: str, params: Optional[np.ndarray] = None) -> None:
        var_index = np.atleast_2d(var_index)
        if var_index.shape[0] == 0:
            return
        self.objective.append(
            ExprBlock(outputs=(_as_expr(expr),), var_index=var_index, params=params, label=label)
        )

    def problem(self) -> NlpProblem:
        return NlpProblem(
            n=self.n,
            lb=np.asarray(self.lb),
            ub=np.asarray(self.ub),
            objective=tuple(self.objective),
            equalities=tuple(self.equalities),
            inequalities=tuple(self.inequalities),
            m_eq=self.m_eq,
            m_ineq=self.m_ineq,
            relaxable=np.asarray(self.relaxable, dtype=bool),
        )


def transcribe(ocp: OcpSpec, steps_per_interval: int = 1) -> TranscribedNlp:
    """
    Direct multiple shooting transcription.

    Args:
        ocp: OCP template
        steps_per_interval: RK4 sub-steps per shooting interval

    Returns:
        TranscribedNlp

    Raises:
        ConfigError: If steps_per_interval < 1
        DimensionError: If callbacks return inconsistent sizes
        InvalidBigMError: If an implication's M fails the interval check
    """
    if steps_per_interval < 1:
        raise ConfigError(f"steps_per_interval must be at least 1, got {steps_per_interval}")

    n_x, n_u, horizon = ocp.n_x, ocp.n_u, ocp.horizon
    xs, us = ocp.x_scale, ocp.u_scale
    builder = _Builder()

    # Variables ---------------------------------------------------------------
    placed: Dict[int, List[StageImplication]] = {k: [] for k in range(horizon + 1)}
    for implication in ocp.implications:
        for k in implication.nodes:
            placed[k].append(implication)
    aux_specs = {imp.name: auxiliary_variables(imp.spec) for imp in ocp.implications}
    aux_rows: Dict[str, List[np.ndarray]] = {imp.name: [] for imp in ocp.implications}

    state_index = np.zeros((horizon + 1, n_x), dtype=np.int64)
    control_index = np.zeros((horizon, n_u), dtype=np.int64)
    state_lb = ocp.state_lower / xs
    state_ub = ocp.state_upper / xs
    for k in range(horizon + 1):
        lower = state_lb.copy()
        upper = state_ub.copy()
        fixed = ocp.initial_state if k == 0 else (ocp.final_state if k == horizon else None)
        if fixed is not None:
            known = ~np.isnan(fixed)
            lower[known] = fixed[known] / xs[known]
            upper[known] = fixed[known] / xs[known]
        state_index[k] = builder.add_variables(lower, upper)
        if k < horizon:
            control_index[k] = builder.add_variables(ocp.control_lower / us, ocp.control_upper / us)
        for implication in placed[k]:
            aux = aux_specs[implication.name]
            index = builder.add_variables(
                [a.lower for a in aux], [a.upper for a in aux], [a.integer for a in aux]
            )
            aux_rows[implication.name].append(index)

    slack_index = builder.add_variables(ocp.slack_lower, ocp.slack_upper)
    final_time_index = None
    if ocp.free_final_time:
        lo, hi = ocp.final_time_bounds
        final_time_index = int(builder.add_variables([lo], [hi])[0])

    # Local layouts -----------------------------------------------------------
    x_loc = [xs[i] * var(i) for i in range(n_x)]
    u_loc = [us[j] * var(n_x + j) for j in range(n_u)]
    stage_width = n_x + n_u
    if ocp.free_final_time:
        t_f_loc = var(stage_width)
        t_d_loc = t_f_loc * (1.0 / horizon)
    else:
        t_f_loc = ocp.final_time
        t_d_loc = ocp.final_time / horizon

    def stage_vars(k: int, with_tf: bool) -> np.ndarray:
        row = [state_index[k], control_index[k]]
        if with_tf and final_time_index is not None:
            row.append([final_time_index])
        return np.concatenate(row)

    # Shooting gaps -----------------------------------------------------------
    if ocp.free_final_time:
        gap_t_loc = var(stage_width + n_x)
        interval = gap_t_loc * (1.0 / horizon)
    else:
        interval = t_d_loc
    next_state = integrate(ocp.dynamics, x_loc, u_loc, interval, steps_per_interval)
    if len(next_state) != n_x:
        raise ConfigError(f"Dynamics returned {len(next_state)} components, expected {n_x}")
    gaps = [_as_expr(next_state[i]) * (1.0 / xs[i]) - var(stage_width + i) for i in range(n_x)]
    gap_index = np.vstack(
        [
            np.concatenate(
                [state_index[k], control_index[k], state_index[k + 1]]
                + ([np.array([final_time_index])] if final_time_index is not None else [])
            )
            for k in range(horizon)
        ]
    )
    builder.add_constraints(gaps, gap_index, "eq", "shooting_gap")

    stage_index = np.vstack([stage_vars(k, with_tf=True) for k in range(horizon)])

    # Stage cost and path constraints ----------------------------------------
    if ocp.stage_cost is not None:
        for label, term in _cost_terms(ocp.stage_cost(x_loc, u_loc, t_d_loc)).items():
            builder.add_objective(term, stage_index, label)
    if ocp.path_constraints is not None:
        rows = list(ocp.path_constraints(x_loc, u_loc))
        builder.add_constraints(rows, stage_index, "ineq", "path")
    if ocp.control_constraints is not None and n_u:
        u_only = [us[j] * var(j) for j in range(n_u)]
        rows = list(ocp.control_constraints(u_only))
        builder.add_constraints(rows, control_index, "ineq", "control")
    if ocp.state_constraints is not None:
        rows = list(ocp.state_constraints(x_loc))
        builder.add_constraints(rows, state_index, "ineq", "state")

    # Terminal cost and constraints --------------------------------------------
    n_s = ocp.n_slack
    s_loc = [var(n_x + i) for i in range(n_s)]
    terminal_index = np.concatenate([state_index[horizon], slack_index]).reshape(1, -1)
    if final_time_index is not None:
        terminal_t_f = var(n_x + n_s)
        terminal_index = np.concatenate([terminal_index, [[final_time_index]]], axis=1)
    else:
        terminal_t_f = t_f_loc
    if ocp.terminal_cost is not None:
        for label, term in _cost_terms(ocp.terminal_cost(x_loc, s_loc, terminal_t_f)).items():
            builder.add_objective(term, terminal_index, label)
    if ocp.terminal_constraints is not None:
        builder.add_constraints(list(ocp.terminal_constraints(x_loc, s_loc)), terminal_index, "ineq", "terminal")
    if ocp.terminal_equalities is not None:
        builder.add_constraints(list(ocp.terminal_equalities(x_loc, s_loc)), terminal_index, "eq", "terminal")

    # Implications --------------------------------------------------------------
    bindings: List[ImplicationBinding] = []
    classes = set()
    stage_lower = ocp.stage_lower
    stage_upper = ocp.stage_upper
    for implication in ocp.implications:
        spec = implication.spec
        used = implication.referenced_stage_variables()
        uses_u = bool(used) and used[-1] >= n_x
        width = n_x + (n_u if uses_u else 0)
        aux = aux_specs[implication.name]
        aux_index = np.vstack(aux_rows[implication.name]).reshape(len(implication.nodes), len(aux))
        output = reformulate(
            spec,
            [var(width + j) for j in range(len(aux))],
            box=(stage_lower[:width], stage_upper[:width]),
        )
        classes.add(output.classification)

        scaling = {i: xs[i] * var(i) for i in range(n_x) if xs[i] != 1.0}
        if uses_u:
            scaling.update({n_x + j: us[j] * var(n_x + j) for j in range(n_u) if us[j] != 1.0})

        def scaled(exprs: Sequence[Expr]) -> List[Expr]:
            return substitute(list(exprs), scaling) if scaling else list(exprs)

        base_index = np.vstack(
            [
                np.concatenate([state_index[k]] + ([control_index[k]] if uses_u else []))
                for k in implication.nodes
            ]
        )
        full_index = np.hstack([base_index, aux_index])

        ineq = [c for c in output.constraints if c.kind == "ineq"]
        eq = [c for c in output.constraints if c.kind == "eq"]
        builder.add_constraints(
            scaled([c.expr for c in ineq]),
            full_index,
            "ineq",
            f"{implication.name}:implication",
            relaxable=[c.relaxable for c in ineq],
        )
        builder.add_constraints(scaled([c.expr for c in eq]), full_index, "eq", f"{implication.name}:implication")

        weights = implication.weights
        if output.cost is not None:
            (cost,) = scaled([output.cost])
            builder.add_objective(cost * param(0), full_index, INDICATOR_LABEL, params=weights.reshape(-1, 1))

        roles = [a.role for a in aux]
        delta_index = aux_index[:, roles.index("delta")] if "delta" in roles else None
        if implication.min_activations:
            count = len(implication.nodes)
            at_least = const(float(implication.min_activations)) - sum((var(j) for j in range(count)), const(0.0))
            builder.add_constraints([at_least], delta_index.reshape(1, -1), "ineq", f"{implication.name}:activations")

        trigger_block = None
        if spec.trigger is not None:
            (trigger,) = scaled([spec.trigger])
            trigger_block = ExprBlock(outputs=(trigger,), var_index=base_index, label=f"{implication.name}:H")
        bindings.append(
            ImplicationBinding(
                name=implication.name,
                spec=spec,
                nodes=np.asarray(implication.nodes, dtype=np.int64),
                delta_index=delta_index,
                aux_index=aux_index,
                weights=weights,
                consequence=ExprBlock(
                    outputs=tuple(scaled(spec.consequence)), var_index=base_index, label=f"{implication.name}:G"
                ),
                trigger=trigger_block,
            )
        )

    nlp = builder.problem()
    integer_mask = np.asarray(builder.integer, dtype=bool)
    if Classification.MINLP in classes:
        classification = Classification.MINLP
    elif Classification.MPCC in classes:
        classification = Classification.MPCC
    elif Classification.MPVC in classes:
        classification = Classification.MPVC
    else:
        classification = Classification.NLP

    logger.debug(
        "Transcribed %s: %d variables, %d equalities, %d inequalities (%d relaxable), %s",
        ocp.name,
        nlp.n,
        nlp.m_eq,
        nlp.m_ineq,
        nlp.n_relaxable,
        classification.value,
    )
    return TranscribedNlp(
        nlp=nlp,
        ocp=ocp,
        steps_per_interval=steps_per_interval,
        state_index=state_index,
        control_index=control_index,
        slack_index=slack_index,
        final_time_index=final_time_index,
        aux_index={
            name: np.vstack(rows) if rows else np.zeros((0, 0), dtype=np.int64) for name, rows in aux_rows.items()
        },
        bindings=tuple(bindings),
        integer_mask=integer_mask,
        classification=classification,
    )


def initial_guess(
    transcribed: TranscribedNlp,
    target: Optional[Sequence[float]] = None,
    control: Optional[Sequence[float]] = None,
    indicator: float = 1.0,
    slack: float = 0.0,
    final_time: Optional[float] = None,
) -> np.ndarray:
    """
    Straight-line initial guess in scaled variables.

    States are interpolated linearly from x_0 to ``target`` (default: the
    fixed final state); a NaN on one end is filled from the other, and a
    component free at both ends starts at zero. Controls, indicators and
    slacks take constant fill values; every value is clipped into its box.

    Args:
        transcribed: Transcribed problem
        target: Physical state the interpolation heads for
        control: Physical control fill value (default zeros)
        indicator: Fill value for every delta
        slack: Fill value for the terminal slacks
        final_time: Guess for a free final time

    Returns:
        Point of dimension nlp.n
    """
    ocp = transcribed.ocp
    nlp = transcribed.nlp
    n_x, n_u, horizon = ocp.n_x, ocp.n_u, ocp.horizon
    z = np.zeros(nlp.n)

    start = ocp.initial_state.copy()
    end = ocp.final_state.copy() if target is None else np.asarray(target, dtype=float).reshape(n_x)
    start = np.where(np.isnan(start), end, start)
    end = np.where(np.isnan(end), start, end)
    start = np.nan_to_num(start, nan=0.0)
    end = np.nan_to_num(end, nan=0.0)
    for k in range(horizon + 1):
        fraction = k / horizon
        z[transcribed.state_index[k]] = (start + fraction * (end - start)) / ocp.x_scale

    fill = np.zeros(n_u) if control is None else np.asarray(control, dtype=float).reshape(n_u)
    if n_u:
        z[transcribed.control_index] = fill / ocp.u_scale

    for binding in transcribed.bindings:
        aux = auxiliary_variables(binding.spec)
        for j, variable in enumerate(aux):
            value = indicator if variable.role == "delta" else variable.initial
            z[binding.aux_index[:, j]] = value

    z[transcribed.slack_index] = slack
    if transcribed.final_time_index is not None:
        lo, hi = ocp.final_time_bounds
        z[transcribed.final_time_index] = final_time if final_time is not None else 0.5 * (lo + hi)

    return np.clip(z, nlp.lb, nlp.ub)
