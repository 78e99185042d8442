"""
Plot Data - Per-node series of a solved run as CSV files

Three files are written:
- states.csv: one row per node (N + 1 rows), states plus derived series
- controls.csv: one row per interval (N rows), controls plus derived series
- indicators.csv: one row per node, one column per region

No figures are drawn; the files are meant for an external plotting tool.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from trigopt.errors import ConfigError
from trigopt.ocp.shooting import TranscribedNlp

logger = logging.getLogger(__name__)

STATE_NAMES = {
    "ugv": ["p_x", "p_y", "theta", "v", "phi"],
    "pdg": ["r_x", "r_y", "r_z", "v_x", "v_y", "v_z", "m"],
    "docking": ["p_x", "p_y", "p_z", "v_x", "v_y", "v_z"],
}
CONTROL_NAMES = {
    "ugv": ["a", "psi"],
    "pdg": ["u_x", "u_y", "u_z"],
    "docking": ["a_x", "a_y", "a_z"],
}


def angle_from_axis(vectors: np.ndarray, axis: Sequence[float]) -> np.ndarray:
    """
    Angle in degrees between each row and ``axis``; zero rows give 0.

    Args:
        vectors: Array of shape (rows, 3)
        axis: Unit vector

    Returns:
        Angles of shape (rows,)
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    norms = np.linalg.norm(vectors, axis=1)
    projection = vectors @ np.asarray(axis, dtype=float)
    cosine = np.divide(projection, norms, out=np.ones_like(norms), where=norms > 0)
    return np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0)))


def _write_csv(path: Path, columns: Dict[str, np.ndarray]) -> Path:
    names = list(columns)
    rows = len(next(iter(columns.values()))) if columns else 0
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=names)
        writer.writeheader()
        for i in range(rows):
            writer.writerow({name: _cell(columns[name][i]) for name in names})
    return path


def _cell(value: Any) -> Any:
    if isinstance(value, (int, np.integer)):
        return int(value)
    value = float(value)
    return "" if math.isnan(value) else repr(value)


def _rate_augmented(scenario: str, states: np.ndarray) -> bool:
    # with rate augmentation the lander thrust is carried as states 7..9
    return scenario == "pdg" and states.shape[1] > len(STATE_NAMES[scenario])


def state_series(
    scenario: str, transcribed: TranscribedNlp, x: np.ndarray, e_z=(0.0, 0.0, 1.0)
) -> Dict[str, np.ndarray]:
    """Node-indexed columns: time, states and derived speed, distance and glide-slope angle."""
    states = transcribed.states(x)
    horizon = transcribed.horizon
    t_d = transcribed.final_time(x) / horizon
    names = STATE_NAMES[scenario]
    columns: Dict[str, np.ndarray] = {
        "k": np.arange(horizon + 1),
        "t": np.arange(horizon + 1) * t_d,
    }
    for i, name in enumerate(names):
        columns[name] = states[:, i]
    if scenario == "ugv":
        columns["speed"] = np.abs(states[:, 3])
    else:
        columns["speed"] = np.linalg.norm(states[:, 3:6], axis=1)
    if scenario == "pdg":
        columns["glide_slope_angle"] = angle_from_axis(states[:, 0:3], e_z)
    if scenario == "docking":
        columns["distance"] = np.linalg.norm(states[:, 0:3] - states[-1, 0:3], axis=1)
    return columns


def control_series(
    scenario: str, transcribed: TranscribedNlp, x: np.ndarray, e_z=(0.0, 0.0, 1.0)
) -> Dict[str, np.ndarray]:
    """Interval-indexed columns: time, controls and for the lander thrust norm and pointing angle."""
    states = transcribed.states(x)
    controls = transcribed.controls(x)
    horizon = transcribed.horizon
    t_d = transcribed.final_time(x) / horizon
    columns: Dict[str, np.ndarray] = {
        "k": np.arange(horizon),
        "t": np.arange(horizon) * t_d,
    }
    thrust: Optional[np.ndarray] = None
    if _rate_augmented(scenario, states):
        n_x = len(STATE_NAMES[scenario])
        thrust = states[:-1, n_x:n_x + 3]
        for i, axis in enumerate("xyz"):
            columns[f"thrust_rate_{axis}"] = controls[:, i]
    else:
        for i, name in enumerate(CONTROL_NAMES[scenario]):
            columns[name] = controls[:, i]
        if scenario == "pdg":
            thrust = controls
    if thrust is not None:
        for i, axis in enumerate("xyz"):
            columns[f"thrust_{axis}"] = thrust[:, i]
        columns["thrust_norm"] = np.linalg.norm(thrust, axis=1)
        columns["pointing_angle"] = angle_from_axis(thrust, e_z)
    return columns


def indicator_series(transcribed: TranscribedNlp, x: np.ndarray) -> Dict[str, np.ndarray]:
    """One column per region; nodes where a region has no indicator are left empty."""
    horizon = transcribed.horizon
    columns: Dict[str, np.ndarray] = {"k": np.arange(horizon + 1)}
    z = np.asarray(x, dtype=float)
    for binding in transcribed.bindings:
        if binding.delta_index is None:
            continue
        column = np.full(horizon + 1, np.nan)
        column[binding.nodes] = z[binding.delta_index]
        columns[binding.name] = column
    return columns


def emit_plot_data(
    scenario: str,
    transcribed: TranscribedNlp,
    x: np.ndarray,
    out_dir: Union[str, Path],
    params: Optional[Any] = None,
) -> Dict[str, Path]:
    """
    Write the plot series of a solution.

    Args:
        scenario: ugv, pdg or docking
        transcribed: Problem the solution belongs to
        x: Solution vector
        out_dir: Directory receiving the CSV files
        params: Scenario parameters (the lander's e_z is read from them)

    Returns:
        Mapping series name -> written file

    Raises:
        ConfigError: On an unknown scenario or a solution of the wrong size
    """
    if scenario not in STATE_NAMES:
        raise ConfigError(f"Unknown scenario {scenario!r}")
    x = np.asarray(x, dtype=float)
    if x.shape != (transcribed.nlp.n,):
        raise ConfigError(f"Solution has shape {x.shape}, problem has {transcribed.nlp.n} variables")
    e_z = getattr(params, "e_z", (0.0, 0.0, 1.0))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {
        "states": _write_csv(out_dir / "states.csv", state_series(scenario, transcribed, x, e_z)),
        "controls": _write_csv(out_dir / "controls.csv", control_series(scenario, transcribed, x, e_z)),
    }
    indicators = indicator_series(transcribed, x)
    if len(indicators) > 1:
        written["indicators"] = _write_csv(out_dir / "indicators.csv", indicators)
    logger.info("Plot data written to %s", out_dir)
    return written


def read_series(path: Union[str, Path]) -> List[Dict[str, str]]:
    """Rows of a written series file."""
    with open(path, "r", newline="") as f:
        return list(csv.DictReader(f))
