"""
OCP Specification - Discrete-time optimal control problem templates

An OcpSpec describes

    min  E(x_N, s, t_f) + sum_k L(x_k, u_k, t_d)
    s.t. x_{k+1} = F(x_k, u_k, t_d)           k = 0..N-1
         c(x_k, u_k) <= 0, c_u(u_k) <= 0       k = 0..N-1
         c_x(x_k) <= 0                         k = 0..N
         c_N(x_N, s) <= 0, c_N^eq(x_N, s) = 0
         logical implications at chosen nodes

with model callbacks that accept expressions or numbers. Cost callbacks may
return a dict of labelled terms so results can report a decomposition.
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from trigopt.errors import ConfigError, DimensionError
from trigopt.logic.implication import ImplicationSpec
from trigopt.nlp.expr import Expr, referenced_variables, sumsq

CostTerms = Union[Expr, float, Dict[str, Union[Expr, float]]]
StateCallback = Callable[[Sequence], Sequence]
StageCallback = Callable[[Sequence, Sequence], Sequence]
TerminalCallback = Callable[[Sequence, Sequence], Sequence]

RATE_PENALTY_LABEL = "rate_penalty"


@dataclass(frozen=True, eq=False)
class StageImplication:
    """
    An implication imposed at a set of grid nodes.

    Attributes:
        spec: Implication over the stage layout (x, u)
        nodes: Grid nodes 0..N where it applies
        node_weights: Multiplier of the cost weight per node (default 1)
        min_activations: Require sum of delta over the nodes >= this count
    """

    spec: ImplicationSpec
    nodes: Tuple[int, ...]
    node_weights: Optional[Tuple[float, ...]] = None
    min_activations: int = 0

    def __post_init__(self) -> None:
        nodes = tuple(int(k) for k in self.nodes)
        if not nodes:
            raise ConfigError(f"Implication {self.spec.name!r} is placed at no node")
        if len(set(nodes)) != len(nodes):
            raise ConfigError(f"Implication {self.spec.name!r} lists a node twice")
        order = sorted(range(len(nodes)), key=nodes.__getitem__)
        object.__setattr__(self, "nodes", tuple(nodes[i] for i in order))
        if self.node_weights is not None:
            weights = tuple(float(w) for w in self.node_weights)
            if len(weights) != len(nodes):
                raise DimensionError(
                    f"Implication {self.spec.name!r}: {len(weights)} node weights for {len(nodes)} nodes"
                )
            if any(w < 0 for w in weights):
                raise ConfigError(f"Implication {self.spec.name!r}: node weights must be >= 0")
            object.__setattr__(self, "node_weights", tuple(weights[i] for i in order))
        nodes = self.nodes
        if self.min_activations < 0 or self.min_activations > len(nodes):
            raise ConfigError(
                f"Implication {self.spec.name!r}: min_activations={self.min_activations} "
                f"outside 0..{len(nodes)}"
            )
        if self.min_activations and not self.spec.has_delta:
            raise ConfigError(f"Implication {self.spec.name!r}: min_activations needs a delta variable")

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def weights(self) -> np.ndarray:
        if self.node_weights is None:
            return np.ones(len(self.nodes))
        return np.asarray(self.node_weights, dtype=float)

    def referenced_stage_variables(self) -> List[int]:
        exprs = list(self.spec.consequence)
        if self.spec.trigger is not None:
            exprs.append(self.spec.trigger)
        return referenced_variables(exprs)


def _vector(values, size: int, fill: float, label: str) -> np.ndarray:
    if values is None:
        return np.full(size, fill)
    array = np.asarray(values, dtype=float).reshape(-1)
    if array.size != size:
        raise DimensionError(f"{label} has {array.size} entries, expected {size}")
    return array


@dataclass(frozen=True, eq=False)
class OcpSpec:
    """
    Template of a discrete-time optimal control problem.

    Attributes:
        n_x: State dimension
        n_u: Control dimension
        dynamics: f(x, u) returning the state derivative
        horizon: Number of shooting intervals N
        initial_state: x_0; NaN entries are left free
        final_time: Fixed t_f, or None for a decision variable
        final_time_bounds: Box of t_f when it is free
        final_state: Fixed x_N components; NaN entries are left free
        stage_cost: L(x, u, t_d) at k < N
        terminal_cost: E(x_N, s, t_f)
        path_constraints: c(x, u) <= 0 at k < N
        control_constraints: c_u(u) <= 0 at k < N
        state_constraints: c_x(x) <= 0 at every node
        terminal_constraints: c_N(x_N, s) <= 0
        terminal_equalities: c_N^eq(x_N, s) = 0
        state_lower, state_upper: State box at every node
        control_lower, control_upper: Control box at k < N
        n_slack: Number of terminal slack variables s
        slack_lower, slack_upper: Slack box
        implications: Implications with their nodes
        x_scale, u_scale: Variables are optimized as x / x_scale, u / u_scale
        rate_augmented: Set by augment_with_rate_control
        name: Label used in logs and results
    """

    n_x: int
    n_u: int
    dynamics: StageCallback
    horizon: int
    initial_state: np.ndarray
    final_time: Optional[float] = None
    final_time_bounds: Tuple[float, float] = (1e-3, 1e4)
    final_state: Optional[np.ndarray] = None
    stage_cost: Optional[Callable[[Sequence, Sequence, object], CostTerms]] = None
    terminal_cost: Optional[Callable[[Sequence, Sequence, object], CostTerms]] = None
    path_constraints: Optional[StageCallback] = None
    control_constraints: Optional[StateCallback] = None
    state_constraints: Optional[StateCallback] = None
    terminal_constraints: Optional[TerminalCallback] = None
    terminal_equalities: Optional[TerminalCallback] = None
    state_lower: Optional[np.ndarray] = None
    state_upper: Optional[np.ndarray] = None
    control_lower: Optional[np.ndarray] = None
    control_upper: Optional[np.ndarray] = None
    n_slack: int = 0
    slack_lower: Optional[np.ndarray] = None
    slack_upper: Optional[np.ndarray] = None
    implications: Tuple[StageImplication, ...] = field(default_factory=tuple)
    x_scale: Optional[np.ndarray] = None
    u_scale: Optional[np.ndarray] = None
    rate_augmented: bool = False
    name: str = "ocp"

    def __post_init__(self) -> None:
        if self.n_x < 1 or self.n_u < 0:
            raise DimensionError(f"Invalid dimensions n_x={self.n_x}, n_u={self.n_u}")
        if self.horizon < 1:
            raise ConfigError(f"Horizon N must be at least 1, got {self.horizon}")
        if self.final_time is not None and not self.final_time > 0:
            raise ConfigError(f"Final time must be positive, got {self.final_time}")
        lo, hi = self.final_time_bounds
        if self.final_time is None and not (0 < lo <= hi):
            raise ConfigError(f"Invalid final time bounds {self.final_time_bounds}")

        n_x, n_u = self.n_x, self.n_u
        object.__setattr__(self, "initial_state", _vector(self.initial_state, n_x, np.nan, "initial_state"))
        object.__setattr__(self, "final_state", _vector(self.final_state, n_x, np.nan, "final_state"))
        object.__setattr__(self, "state_lower", _vector(self.state_lower, n_x, -np.inf, "state_lower"))
        object.__setattr__(self, "state_upper", _vector(self.state_upper, n_x, np.inf, "state_upper"))
        object.__setattr__(self, "control_lower", _vector(self.control_lower, n_u, -np.inf, "control_lower"))
        object.__setattr__(self, "control_upper", _vector(self.control_upper, n_u, np.inf, "control_upper"))
        object.__setattr__(self, "slack_lower", _vector(self.slack_lower, self.n_slack, -np.inf, "slack_lower"))
        object.__setattr__(self, "slack_upper", _vector(self.slack_upper, self.n_slack, np.inf, "slack_upper"))
        object.__setattr__(self, "x_scale", _vector(self.x_scale, n_x, 1.0, "x_scale"))
        object.__setattr__(self, "u_scale", _vector(self.u_scale, n_u, 1.0, "u_scale"))
        object.__setattr__(self, "implications", tuple(self.implications))

        if np.any(self.x_scale <= 0) or np.any(self.u_scale <= 0):
            raise ConfigError("Variable scales must be positive")
        for lower, upper, label in (
            (self.state_lower, self.state_upper, "state"),
            (self.control_lower, self.control_upper, "control"),
            (self.slack_lower, self.slack_upper, "slack"),
        ):
            if np.any(lower > upper):
                raise ConfigError(f"{label} lower bound exceeds upper bound")
        for values, label in ((self.initial_state, "initial_state"), (self.final_state, "final_state")):
            fixed = ~np.isnan(values)
            if np.any(values[fixed] < self.state_lower[fixed]) or np.any(values[fixed] > self.state_upper[fixed]):
                raise ConfigError(f"{label} lies outside the state bounds")

        stage_width = n_x + n_u
        names = set()
        for implication in self.implications:
            if implication.name in names:
                raise ConfigError(f"Duplicate implication name {implication.name!r}")
            names.add(implication.name)
            used = implication.referenced_stage_variables()
            if used and used[-1] >= stage_width:
                raise DimensionError(
                    f"Implication {implication.name!r} references stage variable {used[-1]} "
                    f"beyond the {stage_width} state and control entries"
                )
            if any(k < 0 or k > self.horizon for k in implication.nodes):
                raise DimensionError(f"Implication {implication.name!r} placed outside nodes 0..{self.horizon}")
            if self.horizon in implication.nodes and used and used[-1] >= n_x:
                raise DimensionError(
                    f"Implication {implication.name!r} uses controls but is placed at node N={self.horizon}"
                )

    @property
    def free_final_time(self) -> bool:
        return self.final_time is None

    @property
    def stage_lower(self) -> np.ndarray:
        return np.concatenate([self.state_lower, self.control_lower])

    @property
    def stage_upper(self) -> np.ndarray:
        return np.concatenate([self.state_upper, self.control_upper])

    def with_horizon(self, horizon: int, final_time: Optional[float] = None) -> "OcpSpec":
        """Copy with a different horizon (and optionally final time)."""
        return dataclasses.replace(
            self, horizon=horizon, final_time=self.final_time if final_time is None else final_time
        )


def _merge_costs(base: CostTerms, extra: Dict[str, Union[Expr, float]]) -> Dict[str, Union[Expr, float]]:
    if base is None:
        merged: Dict[str, Union[Expr, float]] = {}
    elif isinstance(base, dict):
        merged = dict(base)
    else:
        merged = {"stage_cost": base}
    for label, term in extra.items():
        merged[label] = merged[label] + term if label in merged else term
    return merged


def augment_with_rate_control(
    ocp: OcpSpec,
    rate_weight: float = 1.0,
    rate_lower: Optional[Sequence[float]] = None,
    rate_upper: Optional[Sequence[float]] = None,
    rate_scale: Optional[Sequence[float]] = None,
) -> OcpSpec:
    """
    Turn the control into a state driven by its rate.

    The new state is (x, u) and the new control is mu = du/dt, so the
    applied control becomes piecewise linear and continuous. Control bounds
    become a state box at every node. Control constraint rows join the path
    constraints and stay at k < N. Path constraints and implications keep
    their stage layout since (x, u) maps onto the augmented state. The
    stage cost gains rate_weight * ||mu||^2.

    Args:
        ocp: Problem to augment
        rate_weight: Weight w2 of the rate penalty
        rate_lower: Lower bound on mu
        rate_upper: Upper bound on mu
        rate_scale: Scale of mu

    Returns:
        Augmented OcpSpec (n_x + n_u states, n_u controls)

    Raises:
        ConfigError: If the problem has no control or is already augmented
    """
    if ocp.rate_augmented:
        raise ConfigError(f"OCP {ocp.name!r} is already rate-augmented")
    if ocp.n_u < 1:
        raise ConfigError(f"OCP {ocp.name!r} has no control to augment")
    if rate_weight < 0:
        raise ConfigError(f"rate_weight must be >= 0, got {rate_weight}")

    n_x, n_u = ocp.n_x, ocp.n_u
    dynamics = ocp.dynamics
    stage_cost = ocp.stage_cost
    path = ocp.path_constraints
    control_constraints = ocp.control_constraints
    state_constraints = ocp.state_constraints
    terminal_cost = ocp.terminal_cost
    terminal_constraints = ocp.terminal_constraints
    terminal_equalities = ocp.terminal_equalities

    def augmented_dynamics(xa, mu):
        xa = list(xa)
        return list(dynamics(xa[:n_x], xa[n_x:])) + list(mu)

    def augmented_stage_cost(xa, mu, t_d):
        xa = list(xa)
        base = stage_cost(xa[:n_x], xa[n_x:], t_d) if stage_cost is not None else None
        return _merge_costs(base, {RATE_PENALTY_LABEL: rate_weight * sumsq(list(mu))})

    def augmented_path(xa, mu):
        xa = list(xa)
        rows = list(path(xa[:n_x], xa[n_x:])) if path is not None else []
        if control_constraints is not None:
            rows += list(control_constraints(xa[n_x:]))
        return rows

    def augmented_state_constraints(xa):
        return list(state_constraints(list(xa)[:n_x]))

    def wrap_terminal(callback):
        if callback is None:
            return None

        def wrapped(xa, *rest):
            return callback(list(xa)[:n_x], *rest)

        return wrapped

    has_path_rows = path is not None or control_constraints is not None
    return dataclasses.replace(
        ocp,
        n_x=n_x + n_u,
        n_u=n_u,
        dynamics=augmented_dynamics,
        initial_state=np.concatenate([ocp.initial_state, np.full(n_u, np.nan)]),
        final_state=np.concatenate([ocp.final_state, np.full(n_u, np.nan)]),
        stage_cost=augmented_stage_cost,
        terminal_cost=wrap_terminal(terminal_cost),
        path_constraints=augmented_path if has_path_rows else None,
        control_constraints=None,
        state_constraints=augmented_state_constraints if state_constraints is not None else None,
        terminal_constraints=wrap_terminal(terminal_constraints),
        terminal_equalities=wrap_terminal(terminal_equalities),
        state_lower=np.concatenate([ocp.state_lower, ocp.control_lower]),
        state_upper=np.concatenate([ocp.state_upper, ocp.control_upper]),
        control_lower=_vector(rate_lower, n_u, -np.inf, "rate_lower"),
        control_upper=_vector(rate_upper, n_u, np.inf, "rate_upper"),
        x_scale=np.concatenate([ocp.x_scale, ocp.u_scale]),
        u_scale=_vector(rate_scale, n_u, 1.0, "rate_scale"),
        rate_augmented=True,
        name=f"{ocp.name}+rate",
    )
