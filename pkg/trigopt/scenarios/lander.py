"""
Powered Descent Scenario - Mars lander rewarded for flying through divert-feasible regions

Translational dynamics with variable mass in a rotating planet frame:

    r' = v
    v' = g e_z + u / m - w x (w x r) - 2 w x v
    m' = -||u|| / (g_earth I_sp)

The thrust is made a state driven by its rate mu (piecewise linear thrust),
the terminal position and velocity are softened by boxed slacks, and every
region contributes one indicator per node. An empty region list gives the
standard divert-free problem used as a baseline.
"""

import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from trigopt.errors import ConfigError, DimensionError
from trigopt.logic.implication import ImplicationMode, ImplicationSpec, normalize_weight
from trigopt.nlp.expr import norm2, sumsq, var
from trigopt.ocp.shooting import TranscribedNlp, initial_guess, transcribe
from trigopt.ocp.spec import OcpSpec, StageImplication, augment_with_rate_control
from trigopt.scenarios.polytope import Polytope
from trigopt.settings import coerce_scalars, load_yaml

logger = logging.getLogger(__name__)

FORMULATIONS = {
    "minlp": ImplicationMode.INDICATOR_BIG_M,
    "mpvc": ImplicationMode.INDICATOR_VANISHING,
}
THRUST_BOUNDS = ("componentwise", "literal")
TERMINAL_MASS_LABEL = "terminal_mass"
SLACK_LABEL = "slack"

_DEGREE_KEYS = ("gamma_gs", "gamma_p")
_VECTOR_KEYS = (
    "omega",
    "e_z",
    "r0",
    "v0_kmh",
    "slack_r_lower",
    "slack_r_upper",
    "slack_v_bound",
    "position_lower",
    "position_upper",
)


@dataclass(frozen=True)
class LanderParams:
    """
    Lander model, constraint and OCP parameters (angles in radians).

    Attributes:
        gamma_gs: Glide-slope angle measured from the vertical
        gamma_p: Maximum thrust pointing angle from the vertical
        omega: Planet angular velocity
        g_mars: Gravity along e_z (negative)
        g_earth: Reference gravity of the specific impulse
        I_sp: Specific impulse
        e_z: Local vertical
        rho_lb, rho_ub: Thrust magnitude range
        m_wet, m_dry: Initial and minimum mass
        r0: Initial position
        v0_kmh: Initial velocity in km/h
        v_max_kmh: Speed limit in km/h
        N: Number of intervals
        t_f: Final time
        w0, w1, w2: Weights of terminal mass, indicators and thrust rate
        tau_min: Homotopy target relaxation
        slack_r_lower, slack_r_upper: Box of the terminal position slack
        slack_v_bound: Symmetric box of the terminal velocity slack
        position_lower, position_upper: Position box (bounds the big-M rows)
        thrust_bounds: "componentwise" boxes every thrust axis by
            [-rho_ub, rho_ub]; "literal" uses [rho_lb, rho_ub] per axis
        region_scale: Divisor of the region membership rows
        rate_augment: Optimize the thrust rate instead of the thrust
        steps_per_interval: RK4 sub-steps per interval
    """

    gamma_gs: float = math.radians(86.0)
    gamma_p: float = math.radians(40.0)
    omega: Tuple[float, ...] = (3.5e-3, 0.0, 2e-3)
    g_mars: float = -3.71
    g_earth: float = 9.807
    I_sp: float = 225.0
    e_z: Tuple[float, ...] = (0.0, 0.0, 1.0)
    rho_lb: float = 4971.0
    rho_ub: float = 13258.0
    m_wet: float = 1905.0
    m_dry: float = 1505.0
    r0: Tuple[float, ...] = (2000.0, 0.0, 1500.0)
    v0_kmh: Tuple[float, ...] = (288.0, 108.0, -270.0)
    v_max_kmh: float = 500.0
    N: int = 50
    t_f: float = 75.0
    w0: float = 1e-3
    w1: float = 1e3
    w2: float = 1e-3
    tau_min: float = 1e-3
    slack_r_lower: Tuple[float, ...] = (-5.0, -5.0, 0.0)
    slack_r_upper: Tuple[float, ...] = (5.0, 5.0, 5.0)
    slack_v_bound: Tuple[float, ...] = (0.01, 0.01, 0.01)
    position_lower: Tuple[float, ...] = (-1000.0, -1500.0, 0.0)
    position_upper: Tuple[float, ...] = (3000.0, 1500.0, 2500.0)
    thrust_bounds: str = "componentwise"
    region_scale: float = 1.0
    rate_augment: bool = True
    steps_per_interval: int = 1

    def __post_init__(self) -> None:
        for key in _VECTOR_KEYS:
            value = tuple(float(v) for v in getattr(self, key))
            if len(value) != 3:
                raise ConfigError(f"Lander parameter {key} needs 3 entries, got {len(value)}")
            object.__setattr__(self, key, value)
        object.__setattr__(self, "w1", normalize_weight(self.w1, "lander"))
        if not 0 < self.rho_lb < self.rho_ub:
            raise ConfigError(f"Thrust range must satisfy 0 < rho_lb < rho_ub, got ({self.rho_lb}, {self.rho_ub})")
        if not 0 < self.m_dry < self.m_wet:
            raise ConfigError(f"Masses must satisfy 0 < m_dry < m_wet, got ({self.m_dry}, {self.m_wet})")
        for name in ("gamma_gs", "gamma_p"):
            if not 0 < getattr(self, name) < math.pi / 2:
                raise ConfigError(f"{name} must lie in (0, 90) degrees")
        if not abs(np.linalg.norm(self.e_z) - 1.0) < 1e-12:
            raise ConfigError(f"e_z must be a unit vector, got {self.e_z}")
        for name in ("g_earth", "I_sp", "v_max_kmh", "t_f", "region_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"Lander parameter {name} must be positive, got {getattr(self, name)}")
        if self.w0 < 0 or self.w2 < 0:
            raise ConfigError("Weights w0 and w2 must be non-negative")
        if self.N < 1 or self.steps_per_interval < 1:
            raise ConfigError("Lander N and steps_per_interval must be at least 1")
        if self.thrust_bounds not in THRUST_BOUNDS:
            raise ConfigError(f"thrust_bounds must be one of {THRUST_BOUNDS}, got {self.thrust_bounds!r}")
        if np.any(np.asarray(self.position_lower) >= np.asarray(self.position_upper)):
            raise ConfigError("Position box is empty")

    @property
    def v0(self) -> np.ndarray:
        return np.asarray(self.v0_kmh) / 3.6

    @property
    def v_max(self) -> float:
        return self.v_max_kmh / 3.6

    @property
    def alpha(self) -> float:
        """Mass flow per unit thrust."""
        return 1.0 / (self.g_earth * self.I_sp)

    @property
    def hover_thrust(self) -> np.ndarray:
        return -self.g_mars * self.m_wet * np.asarray(self.e_z)

    def state_box(self) -> Tuple[np.ndarray, np.ndarray]:
        """Bounds on (r, v, m)."""
        v_max = self.v_max
        lower = np.concatenate([self.position_lower, [-v_max] * 3, [self.m_dry]])
        upper = np.concatenate([self.position_upper, [v_max] * 3, [self.m_wet]])
        return lower, upper

    def thrust_box(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.thrust_bounds == "literal":
            return np.full(3, self.rho_lb), np.full(3, self.rho_ub)
        return np.full(3, -self.rho_ub), np.full(3, self.rho_ub)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LanderParams":
        """Build from a parameter mapping with angles in degrees."""
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown lander parameter(s): {', '.join(sorted(unknown))}")
        data = coerce_scalars(cls, data, "Lander")
        for key in _DEGREE_KEYS:
            if key in data:
                data[key] = math.radians(float(data[key]))
        return cls(**data)

    @classmethod
    def from_yaml(cls, path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> "LanderParams":
        data = load_yaml(Path(path))
        data.update(overrides or {})
        return cls.from_dict(data)


def cross(a: Sequence, b: Sequence) -> List:
    """Cross product of two 3-vectors of numbers or expressions."""
    return [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]


def lander_dynamics(x: Sequence, u: Sequence, params: LanderParams) -> List:
    """
    Translational lander dynamics.

    Args:
        x: (r, v, m), 7 entries
        u: Thrust vector
        params: Model parameters

    Returns:
        (r', v', m')

    Raises:
        DomainError: If ||u|| falls inside the norm guard
    """
    r, v, m = list(x[0:3]), list(x[3:6]), x[6]
    u = list(u)
    omega = list(params.omega)
    e_z = params.e_z
    coriolis = cross(omega, v)
    centripetal = cross(omega, cross(omega, r))
    acceleration = [
        params.g_mars * e_z[i] + u[i] / m - centripetal[i] - 2.0 * coriolis[i] for i in range(3)
    ]
    mass_rate = -params.alpha * norm2(u)
    return v + acceleration + [mass_rate]


def _region_coordinates(region: Polytope) -> List:
    if region.dim == 3:
        return [var(0), var(1), var(2)]
    if region.dim == 6:
        return [var(i) for i in range(6)]
    raise DimensionError(f"Lander region {region.name!r} is {region.dim}-D; expected 3-D or 6-D")


def region_implications(
    params: LanderParams, regions: Sequence[Polytope], formulation: str
) -> List[StageImplication]:
    """Membership implication per region at nodes 0..N, rewarded by w1."""
    if formulation not in FORMULATIONS:
        raise ConfigError(f"Unknown formulation {formulation!r}; expected one of {sorted(FORMULATIONS)}")
    mode = FORMULATIONS[formulation]
    implications = []
    for region in regions:
        spec = ImplicationSpec(
            consequence=tuple(region.rows(_region_coordinates(region), scale=params.region_scale)),
            mode=mode,
            weight=params.w1,
            name=region.name,
        )
        implications.append(StageImplication(spec=spec, nodes=tuple(range(params.N + 1))))
    return implications


def pdg_ocp(params: LanderParams, regions: Sequence[Polytope], formulation: str) -> OcpSpec:
    """OcpSpec of the divert-region landing problem, thrust-rate augmented by default."""
    rho_lb, rho_ub = params.rho_lb, params.rho_ub
    cos_p = math.cos(params.gamma_p)
    cos_gs = math.cos(params.gamma_gs)
    e_z = params.e_z
    v_max = params.v_max
    position_scale = 1000.0

    def dynamics(x, u):
        return lander_dynamics(x, u, params)

    def thrust_constraints(u):
        u = list(u)
        return [
            (sumsq(u) - rho_ub**2) / rho_ub**2,
            (rho_lb**2 - sumsq(u)) / rho_ub**2,
            (cos_p * norm2(u) - sum(e * c for e, c in zip(e_z, u))) / rho_ub,
        ]

    def glide_slope(x, u):
        r = list(x[0:3])
        return [(cos_gs * norm2(r) - sum(e * c for e, c in zip(e_z, r))) / position_scale]

    def speed_limit(x):
        v = list(x[3:6])
        return [(sumsq(v) - v_max**2) / v_max**2]

    def terminal_equalities(x, s):
        x, s = list(x), list(s)
        return [x[i] - s[i] for i in range(6)]

    def terminal_cost(x, s, t_f):
        return {TERMINAL_MASS_LABEL: -params.w0 * x[6], SLACK_LABEL: sumsq(list(s))}

    state_lower, state_upper = params.state_box()
    thrust_lower, thrust_upper = params.thrust_box()
    ocp = OcpSpec(
        n_x=7,
        n_u=3,
        dynamics=dynamics,
        horizon=params.N,
        initial_state=np.concatenate([params.r0, params.v0, [params.m_wet]]),
        final_time=params.t_f,
        terminal_cost=terminal_cost,
        path_constraints=glide_slope,
        control_constraints=thrust_constraints,
        state_constraints=speed_limit,
        terminal_equalities=terminal_equalities,
        state_lower=state_lower,
        state_upper=state_upper,
        control_lower=thrust_lower,
        control_upper=thrust_upper,
        n_slack=6,
        slack_lower=np.concatenate([params.slack_r_lower, -np.asarray(params.slack_v_bound)]),
        slack_upper=np.concatenate([params.slack_r_upper, params.slack_v_bound]),
        x_scale=np.array([1e3, 1e3, 1e3, 1e2, 1e2, 1e2, 1e3]),
        u_scale=np.full(3, 1e4),
        implications=tuple(region_implications(params, regions, formulation)),
        name=f"pdg-{formulation}" if regions else "pdg-baseline",
    )
    if params.rate_augment:
        ocp = augment_with_rate_control(ocp, rate_weight=params.w2, rate_scale=np.full(3, 1e3))
    return ocp


def build_pdg_ocp(
    params: LanderParams, regions: Sequence[Polytope], formulation: str = "minlp"
) -> TranscribedNlp:
    """
    Transcribe the powered-descent problem with divert-feasible regions.

    Args:
        params: Lander parameters
        regions: 3-D (position) or 6-D (position and velocity) polytopes;
            empty for the divert-free baseline
        formulation: "minlp" or "mpvc"

    Returns:
        TranscribedNlp

    Raises:
        ConfigError: On an unknown formulation
        DimensionError: If a region is neither 3-D nor 6-D
    """
    transcribed = transcribe(pdg_ocp(params, regions, formulation), params.steps_per_interval)
    logger.info(
        "PDG %s problem: %d variables, %d regions, %d indicators",
        formulation if regions else "baseline",
        transcribed.nlp.n,
        len(regions),
        transcribed.delta_indices.size,
    )
    return transcribed


def pdg_initial_guess(transcribed: TranscribedNlp, params: LanderParams, indicator: float = 1.0) -> np.ndarray:
    """Straight line to the landing site at constant mass with hover thrust."""
    hover = params.hover_thrust
    target = np.concatenate([np.zeros(6), [params.m_wet]])
    if params.rate_augment:
        target = np.concatenate([target, hover])
        control = np.zeros(3)
    else:
        control = hover
    return initial_guess(transcribed, target=target, control=control, indicator=indicator)
