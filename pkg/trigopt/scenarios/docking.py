"""
Docking Scenario - Approach constraints triggered by distance to the port

Inside the docking radius r of the port p_f the chaser must
- keep its speed below alpha times the remaining distance
- stay in the approach cone of half angle theta_max around the axis e_f

Both conditions are trigger implications with H = r - ||p - p_f|| and are
compiled with the epsilon-big-M encoding (minlp) or the complementarity
encoding (mpvc). The chaser is a 3-D double integrator.
"""

import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from trigopt.errors import ConfigError
from trigopt.logic.implication import DEFAULT_EPSILON, ImplicationMode, ImplicationSpec
from trigopt.nlp.expr import norm2, sumsq, var
from trigopt.ocp.shooting import TranscribedNlp, initial_guess, transcribe
from trigopt.ocp.spec import OcpSpec, StageImplication
from trigopt.settings import coerce_scalars, load_yaml

logger = logging.getLogger(__name__)

FORMULATIONS = {
    "minlp": ImplicationMode.TRIGGER_EPS_BIG_M,
    "mpvc": ImplicationMode.TRIGGER_MPCC,
}
CONTROL_LABEL = "control_effort"


def docking_triggers(
    p_f: Sequence[float],
    r: float,
    alpha: float,
    theta_max_deg: float,
    e_f: Sequence[float],
    mode: Union[str, ImplicationMode] = ImplicationMode.TRIGGER_EPS_BIG_M,
    epsilon: float = DEFAULT_EPSILON,
    big_m: Optional[float] = None,
    lower_m: Optional[float] = None,
) -> List[ImplicationSpec]:
    """
    Speed-reduction and line-of-sight implications.

    Expressions use the layout p = var(0..2), v = var(3..5).

    Args:
        p_f: Docking port position
        r: Radius that activates both constraints
        alpha: Speed per unit distance allowed inside the radius
        theta_max_deg: Approach-cone half angle in degrees
        e_f: Unit approach axis
        mode: trigger_eps_bigM or trigger_mpcc
        epsilon: Activation margin of the epsilon-big-M encoding
        big_m, lower_m: Bounds on G and H; derived from the box when None

    Returns:
        [speed implication, cone implication]

    Raises:
        ConfigError: On non-positive r or alpha, an angle outside (0, 90)
            degrees, a non-unit axis or a non-trigger mode
    """
    p_f = np.asarray(p_f, dtype=float).reshape(3)
    e_f = np.asarray(e_f, dtype=float).reshape(3)
    mode = ImplicationMode(mode)
    if not r > 0 or not alpha > 0:
        raise ConfigError(f"Docking radius and alpha must be positive, got r={r}, alpha={alpha}")
    if not 0.0 < theta_max_deg < 90.0:
        raise ConfigError(f"Approach half angle must be in (0, 90) degrees, got {theta_max_deg}")
    if abs(np.linalg.norm(e_f) - 1.0) > 1e-9:
        raise ConfigError(f"Approach axis must be a unit vector, got {e_f.tolist()}")
    if not mode.has_trigger:
        raise ConfigError(f"Docking constraints need a trigger mode, got {mode.value}")

    offset = [var(i) - p_f[i] for i in range(3)]
    velocity = [var(3 + i) for i in range(3)]
    distance = norm2(offset, guard=False)
    trigger = r - distance
    speed = norm2(velocity, guard=False) - alpha * distance
    cone = math.cos(math.radians(theta_max_deg)) * distance - sum(e_f[i] * offset[i] for i in range(3))
    common = dict(mode=mode, trigger=trigger, epsilon=epsilon, big_m=big_m, lower_m=lower_m, weight=0.0)
    return [
        ImplicationSpec(consequence=(speed,), name="docking_speed", **common),
        ImplicationSpec(consequence=(cone,), name="docking_cone", **common),
    ]


@dataclass(frozen=True)
class DockingParams:
    """
    Chaser approach problem.

    Attributes:
        p0, v0: Initial position and velocity
        p_f: Docking port
        e_f: Approach axis (unit)
        r: Activation radius
        alpha: Speed per unit distance inside the radius
        theta_max: Cone half angle in degrees
        a_max: Acceleration limit per axis
        N: Number of intervals
        t_f: Final time
        position_bound: Symmetric box on every position coordinate
        velocity_bound: Symmetric box on every velocity coordinate
        epsilon: Activation margin of the epsilon-big-M encoding
        steps_per_interval: RK4 sub-steps per interval
    """

    p0: Tuple[float, ...] = (-20.0, 6.0, 4.0)
    v0: Tuple[float, ...] = (0.5, 0.0, 0.0)
    p_f: Tuple[float, ...] = (0.0, 0.0, 0.0)
    e_f: Tuple[float, ...] = (-1.0, 0.0, 0.0)
    r: float = 8.0
    alpha: float = 0.1
    theta_max: float = 30.0
    a_max: float = 0.2
    N: int = 30
    t_f: float = 90.0
    position_bound: float = 40.0
    velocity_bound: float = 2.0
    epsilon: float = DEFAULT_EPSILON
    steps_per_interval: int = 1

    def __post_init__(self) -> None:
        for key in ("p0", "v0", "p_f", "e_f"):
            value = tuple(float(v) for v in getattr(self, key))
            if len(value) != 3:
                raise ConfigError(f"Docking parameter {key} needs 3 entries")
            object.__setattr__(self, key, value)
        for name in ("a_max", "t_f", "position_bound", "velocity_bound"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"Docking parameter {name} must be positive, got {getattr(self, name)}")
        if self.N < 2:
            raise ConfigError(f"Docking horizon must be at least 2, got {self.N}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DockingParams":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown docking parameter(s): {', '.join(sorted(unknown))}")
        data = coerce_scalars(cls, data, "Docking")
        return cls(**data)

    @classmethod
    def from_yaml(cls, path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> "DockingParams":
        data = load_yaml(Path(path))
        data.update(overrides or {})
        return cls.from_dict(data)


def docking_ocp(params: DockingParams, formulation: str) -> OcpSpec:
    if formulation not in FORMULATIONS:
        raise ConfigError(f"Unknown formulation {formulation!r}; expected one of {sorted(FORMULATIONS)}")
    specs = docking_triggers(
        params.p_f,
        params.r,
        params.alpha,
        params.theta_max,
        params.e_f,
        mode=FORMULATIONS[formulation],
        epsilon=params.epsilon,
    )
    # p_N = p_f, so the triggers stop one node short of the port
    nodes = tuple(range(params.N))
    implications = tuple(StageImplication(spec=spec, nodes=nodes) for spec in specs)

    def dynamics(x, u):
        return list(x[3:6]) + list(u)

    def stage_cost(x, u, t_d):
        return {CONTROL_LABEL: sumsq(u)}

    bound = np.concatenate([np.full(3, params.position_bound), np.full(3, params.velocity_bound)])
    return OcpSpec(
        n_x=6,
        n_u=3,
        dynamics=dynamics,
        horizon=params.N,
        initial_state=np.concatenate([params.p0, params.v0]),
        final_time=params.t_f,
        final_state=np.concatenate([params.p_f, np.zeros(3)]),
        stage_cost=stage_cost,
        state_lower=-bound,
        state_upper=bound,
        control_lower=np.full(3, -params.a_max),
        control_upper=np.full(3, params.a_max),
        implications=implications,
        name=f"docking-{formulation}",
    )


def build_docking_ocp(params: DockingParams, formulation: str = "minlp") -> TranscribedNlp:
    """
    Transcribe the docking approach.

    Args:
        params: Approach parameters
        formulation: "minlp" (epsilon-big-M triggers) or "mpvc" (complementarity triggers)

    Returns:
        TranscribedNlp
    """
    transcribed = transcribe(docking_ocp(params, formulation), params.steps_per_interval)
    logger.info("Docking %s problem: %d variables", formulation, transcribed.nlp.n)
    return transcribed


def docking_initial_guess(transcribed: TranscribedNlp) -> np.ndarray:
    """Straight line to the port with zero acceleration."""
    return initial_guess(transcribed, indicator=1.0)
