"""
UGV Scenario - Ground vehicle that must pass through every UAV reachable set

Single-track kinematic model with state (p_x, p_y, theta, v, phi) and
control (a, psi). Each reachable set is a rectangle in the plane; an
indicator per region and node rewards time spent inside, and every region
has to be visited at least once.
"""

import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from trigopt.errors import ConfigError
from trigopt.logic.implication import ImplicationMode, ImplicationSpec, normalize_weight
from trigopt.nlp.expr import cos, sin, sumsq, tan, var
from trigopt.ocp.shooting import TranscribedNlp, initial_guess, transcribe
from trigopt.ocp.spec import OcpSpec, StageImplication
from trigopt.scenarios.polytope import Polytope
from trigopt.settings import coerce_scalars, load_yaml

logger = logging.getLogger(__name__)

FORMULATIONS = {
    "minlp": ImplicationMode.INDICATOR_BIG_M,
    "mpvc": ImplicationMode.INDICATOR_VANISHING,
}
TERMINAL_READINGS = ("sum", "first")
CONTROL_LABEL = "control_effort"

# keys given in degrees (or degrees per second) in parameter files
_DEGREE_KEYS = ("psi_max", "theta_max", "phi_max")


@dataclass(frozen=True)
class UgvParams:
    """
    UGV model and problem parameters (angles in radians).

    Attributes:
        L: Wheelbase
        a_max: Acceleration limit
        psi_max: Steering rate limit
        theta_max: Heading limit
        v_min, v_max: Speed range
        phi_max: Steering angle limit
        t_d: Sampling time
        N: Number of intervals
        x0: Initial state
        xN: Final state
        w: Indicator weight; the table value -38 is read as a reward of 38
        M: Big-M constant of the membership rows
        tau_min: Homotopy target relaxation
        position_box: Bounds on p_x and p_y
        steps_per_interval: RK4 sub-steps per interval
        terminal_indicator_reading: "sum" weights every region at node N,
            "first" only the first region
    """

    L: float = 0.1
    a_max: float = 0.05
    psi_max: float = math.radians(0.5)
    theta_max: float = math.radians(175.0)
    v_min: float = 0.1
    v_max: float = 0.8
    phi_max: float = math.radians(5.0)
    t_d: float = 3.8
    N: int = 20
    x0: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.15, 0.0)
    xN: Tuple[float, ...] = (10.0, 10.0, 0.0, 0.15, 0.0)
    w: float = 38.0
    M: float = 12.0
    tau_min: float = 1e-4
    position_box: Tuple[float, float] = (-2.0, 12.0)
    steps_per_interval: int = 4
    terminal_indicator_reading: str = "sum"

    def __post_init__(self) -> None:
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "xN", tuple(float(v) for v in self.xN))
        object.__setattr__(self, "w", normalize_weight(self.w, "ugv"))
        object.__setattr__(self, "position_box", tuple(float(v) for v in self.position_box))
        for name in ("L", "a_max", "psi_max", "theta_max", "v_max", "phi_max", "t_d", "M"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"UGV parameter {name} must be positive, got {getattr(self, name)}")
        if not 0 < self.v_min < self.v_max:
            raise ConfigError(f"UGV speed range must satisfy 0 < v_min < v_max, got ({self.v_min}, {self.v_max})")
        if not self.phi_max < math.pi / 2:
            raise ConfigError("UGV steering limit must stay below 90 degrees")
        if self.N < 1 or self.steps_per_interval < 1:
            raise ConfigError("UGV N and steps_per_interval must be at least 1")
        if len(self.x0) != 5 or len(self.xN) != 5:
            raise ConfigError("UGV x0 and xN need 5 entries (p_x, p_y, theta, v, phi)")
        if self.position_box[0] >= self.position_box[1]:
            raise ConfigError(f"UGV position box {self.position_box} is empty")
        if self.terminal_indicator_reading not in TERMINAL_READINGS:
            raise ConfigError(
                f"terminal_indicator_reading must be one of {TERMINAL_READINGS}, "
                f"got {self.terminal_indicator_reading!r}"
            )

    @property
    def final_time(self) -> float:
        return self.N * self.t_d

    @property
    def state_lower(self) -> np.ndarray:
        lo = self.position_box[0]
        return np.array([lo, lo, -self.theta_max, self.v_min, -self.phi_max])

    @property
    def state_upper(self) -> np.ndarray:
        hi = self.position_box[1]
        return np.array([hi, hi, self.theta_max, self.v_max, self.phi_max])

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "UgvParams":
        """Build from a parameter mapping with angles in degrees."""
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown UGV parameter(s): {', '.join(sorted(unknown))}")
        data = coerce_scalars(cls, data, "UGV")
        for key in _DEGREE_KEYS:
            if key in data:
                data[key] = math.radians(float(data[key]))
        for key in ("x0", "xN"):
            if key in data:
                values = [float(v) for v in data[key]]
                if len(values) == 5:
                    values[2] = math.radians(values[2])
                    values[4] = math.radians(values[4])
                data[key] = tuple(values)
        return cls(**data)

    @classmethod
    def from_yaml(cls, path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> "UgvParams":
        data = load_yaml(Path(path))
        data.update(overrides or {})
        return cls.from_dict(data)


def ugv_dynamics(x: Sequence, u: Sequence, L: float = 0.1) -> List:
    """
    Single-track kinematics.

    Args:
        x: (p_x, p_y, theta, v, phi)
        u: (a, psi)
        L: Wheelbase

    Returns:
        (v cos(theta), v sin(theta), v tan(phi) / L, a, psi)

    Raises:
        DomainError: If phi sits at a pole of tan (+-90 degrees)
    """
    _, _, theta, v, phi = x
    a, psi = u
    return [v * cos(theta), v * sin(theta), v * tan(phi) / L, a, psi]


def _node_weights(params: UgvParams, region_index: int) -> Tuple[float, ...]:
    weights = [1.0] * (params.N + 1)
    if params.terminal_indicator_reading == "first" and region_index > 0:
        weights[-1] = 0.0
    return tuple(weights)


def region_implications(
    params: UgvParams,
    regions: Sequence[Polytope],
    formulation: str,
) -> List[StageImplication]:
    """Membership implication per region, placed at every node."""
    if formulation not in FORMULATIONS:
        raise ConfigError(f"Unknown formulation {formulation!r}; expected one of {sorted(FORMULATIONS)}")
    mode = FORMULATIONS[formulation]
    position = [var(0), var(1)]
    implications = []
    for i, region in enumerate(regions):
        if region.dim != 2:
            raise ConfigError(f"UGV region {region.name!r} is {region.dim}-D, expected 2-D")
        spec = ImplicationSpec(
            consequence=tuple(region.rows(position)),
            mode=mode,
            big_m=params.M if mode == ImplicationMode.INDICATOR_BIG_M else None,
            weight=params.w,
            name=region.name,
        )
        implications.append(
            StageImplication(
                spec=spec,
                nodes=tuple(range(params.N + 1)),
                node_weights=_node_weights(params, i),
                min_activations=1,
            )
        )
    return implications


def ugv_ocp(params: UgvParams, regions: Sequence[Polytope], formulation: str) -> OcpSpec:
    """OcpSpec of the coordination problem (before transcription)."""
    L = params.L

    def dynamics(x, u):
        return ugv_dynamics(x, u, L)

    def stage_cost(x, u, t_d):
        return {CONTROL_LABEL: sumsq(u)}

    return OcpSpec(
        n_x=5,
        n_u=2,
        dynamics=dynamics,
        horizon=params.N,
        initial_state=np.asarray(params.x0),
        final_time=params.final_time,
        final_state=np.asarray(params.xN),
        stage_cost=stage_cost,
        state_lower=params.state_lower,
        state_upper=params.state_upper,
        control_lower=np.array([-params.a_max, -params.psi_max]),
        control_upper=np.array([params.a_max, params.psi_max]),
        implications=tuple(region_implications(params, regions, formulation)),
        name=f"ugv-{formulation}",
    )


def build_ugv_ocp(params: UgvParams, regions: Sequence[Polytope], formulation: str) -> TranscribedNlp:
    """
    Transcribe the UGV coordination problem.

    Args:
        params: Model and problem parameters
        regions: 2-D reachable sets
        formulation: "minlp" (binary indicators, big-M rows) or "mpvc"
            (continuous indicators, vanishing rows)

    Returns:
        TranscribedNlp with (N + 1) indicators per region

    Raises:
        ConfigError: On an unknown formulation or a region that is not 2-D
        InvalidBigMError: If M does not bound a membership row on the position box
    """
    transcribed = transcribe(ugv_ocp(params, regions, formulation), params.steps_per_interval)
    logger.info(
        "UGV %s problem: %d variables, %d regions, %d indicators",
        formulation,
        transcribed.nlp.n,
        len(regions),
        transcribed.delta_indices.size,
    )
    return transcribed


def ugv_initial_guess(transcribed: TranscribedNlp, indicator: float = 1.0) -> np.ndarray:
    """Straight line from x0 to xN, zero controls, indicators at ``indicator``."""
    return initial_guess(transcribed, indicator=indicator)
