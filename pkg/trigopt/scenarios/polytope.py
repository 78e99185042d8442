"""
Polytopes - Halfspace regions A xi + b <= 0 and their file format

Region files are YAML documents:

    polytopes:
      - name: pyramid_1
        dim: 3
        A: [[0.342, 0.0, -0.939], ...]
        b: [-683.0, ...]

Floats are written with repr precision so a save/load cycle is exact.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from trigopt.errors import ConfigError, PolytopeFormatError
from trigopt.nlp.expr import Expr, sum_exprs

logger = logging.getLogger(__name__)

CONTAINS_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Polytope:
    """
    Region {xi : A xi + b <= 0}.

    Attributes:
        A: Halfspace normals, shape (rows, dim)
        b: Offsets, shape (rows,)
        name: Region label
    """

    A: np.ndarray
    b: np.ndarray
    name: str = "region"

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise PolytopeFormatError(f"Polytope {self.name!r}: A must be a non-empty matrix, got shape {A.shape}")
        if b.size != A.shape[0]:
            raise PolytopeFormatError(f"Polytope {self.name!r}: A has {A.shape[0]} rows but b has {b.size} entries")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise PolytopeFormatError(f"Polytope {self.name!r} has non-finite entries")
        if np.any(np.linalg.norm(A, axis=1) == 0.0):
            raise PolytopeFormatError(f"Polytope {self.name!r} has a zero row in A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return int(self.A.shape[1])

    @property
    def n_rows(self) -> int:
        return int(self.A.shape[0])

    def residual(self, point: Sequence[float]) -> np.ndarray:
        """A xi + b; every entry <= 0 inside the region."""
        point = np.asarray(point, dtype=float).reshape(-1)
        if point.size != self.dim:
            raise PolytopeFormatError(f"Polytope {self.name!r} is {self.dim}-D, point has {point.size} entries")
        return self.A @ point + self.b

    def contains(self, point: Sequence[float], tol: float = CONTAINS_TOL) -> bool:
        """Membership with the boundary included."""
        return bool(np.all(self.residual(point) <= tol))

    def __contains__(self, point: Sequence[float]) -> bool:
        return self.contains(point)

    def rows(self, coordinates: Sequence[Union[Expr, float]], scale: float = 1.0) -> List[Union[Expr, float]]:
        """
        Constraint rows (A xi + b) / scale over the given coordinate expressions.

        Args:
            coordinates: One entry per region dimension
            scale: Positive divisor applied to every row

        Returns:
            One expression per halfspace
        """
        if len(coordinates) != self.dim:
            raise PolytopeFormatError(
                f"Polytope {self.name!r} is {self.dim}-D, got {len(coordinates)} coordinates"
            )
        rows = []
        for normal, offset in zip(self.A, self.b):
            terms = [(a / scale) * c for a, c in zip(normal, coordinates) if a != 0.0]
            rows.append(sum_exprs(terms + [offset / scale]))
        return rows

    def bounding_interval(self, lower: Sequence[float], upper: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        """Exact range of every row of A xi + b over a box."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        hi = np.where(self.A > 0, self.A * upper, self.A * lower).sum(axis=1) + self.b
        lo = np.where(self.A > 0, self.A * lower, self.A * upper).sum(axis=1) + self.b
        return lo, hi

    def as_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "dim": self.dim,
            "A": [[float(v) for v in row] for row in self.A],
            "b": [float(v) for v in self.b],
        }


def rectangle(x_range: Sequence[float], y_range: Sequence[float], name: str = "rectangle") -> Polytope:
    """Axis-aligned rectangle in the plane."""
    (x_lo, x_hi), (y_lo, y_hi) = x_range, y_range
    if not (x_lo < x_hi and y_lo < y_hi):
        raise ConfigError(f"Rectangle {name!r} has empty extent {x_range} x {y_range}")
    A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    b = np.array([-x_hi, x_lo, -y_hi, y_lo], dtype=float)
    return Polytope(A, b, name)


def pyramid_regions(
    beta_deg: float,
    centers: Sequence[Sequence[float]],
    d: Union[float, Sequence[float]] = 1.0,
    names: Optional[Sequence[str]] = None,
) -> List[Polytope]:
    """
    Inverted pyramids C (r - c_i) + d <= 0 in position space.

    Args:
        beta_deg: Face inclination in degrees, in (0, 90)
        centers: Apex locations c_i
        d: Offset per face (scalar or four entries)
        names: Region labels (default pyramid_1, pyramid_2, ...)

    Returns:
        One 4-row, 3-D polytope per center
    """
    if not 0.0 < beta_deg < 90.0:
        raise ConfigError(f"Pyramid angle must be in (0, 90) degrees, got {beta_deg}")
    beta = math.radians(beta_deg)
    c, s = math.cos(beta), math.sin(beta)
    C = np.array(
        [
            [c, 0.0, -s],
            [0.0, c, -s],
            [-c, 0.0, -s],
            [0.0, -c, -s],
        ]
    )
    offsets = np.broadcast_to(np.asarray(d, dtype=float), (4,)).copy()
    regions = []
    for i, center in enumerate(centers):
        center = np.asarray(center, dtype=float).reshape(3)
        label = names[i] if names is not None else f"pyramid_{i + 1}"
        regions.append(Polytope(C.copy(), offsets - C @ center, label))
    return regions


def _parse_entry(entry: Any, index: int, source: str) -> Polytope:
    if not isinstance(entry, dict):
        raise PolytopeFormatError(f"{source}: polytope #{index} is not a mapping")
    missing = {"A", "b"} - set(entry)
    if missing:
        raise PolytopeFormatError(f"{source}: polytope #{index} lacks {', '.join(sorted(missing))}")
    try:
        A = np.asarray(entry["A"], dtype=float)
        b = np.asarray(entry["b"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise PolytopeFormatError(f"{source}: polytope #{index} has non-numeric data: {exc}") from exc
    polytope = Polytope(A, b, str(entry.get("name", f"region_{index + 1}")))
    if "dim" in entry and int(entry["dim"]) != polytope.dim:
        raise PolytopeFormatError(
            f"{source}: polytope {polytope.name!r} declares dim {entry['dim']} but A has {polytope.dim} columns"
        )
    return polytope


def load_polytopes(path: Union[str, Path], dim: Optional[int] = None) -> List[Polytope]:
    """
    Read a region file.

    Args:
        path: YAML file with a ``polytopes`` list
        dim: Required dimension of every region (checked when given)

    Returns:
        Validated polytopes in file order

    Raises:
        PolytopeFormatError: On parse errors, shape mismatches or non-finite entries
    """
    path = Path(path)
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError as exc:
        raise PolytopeFormatError(f"Region file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise PolytopeFormatError(f"Invalid YAML in {path}: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("polytopes"), list):
        raise PolytopeFormatError(f"{path}: expected a mapping with a 'polytopes' list")
    polytopes = [_parse_entry(entry, i, str(path)) for i, entry in enumerate(data["polytopes"])]
    if dim is not None:
        for polytope in polytopes:
            if polytope.dim != dim:
                raise PolytopeFormatError(f"{path}: region {polytope.name!r} is {polytope.dim}-D, expected {dim}-D")
    logger.debug("Loaded %d polytopes from %s", len(polytopes), path)
    return polytopes


def save_polytopes(polytopes: Sequence[Polytope], path: Union[str, Path]) -> Path:
    """Write polytopes in the region file format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"polytopes": [p.as_dict() for p in polytopes]}
    with open(path, "w") as f:
        yaml.safe_dump(document, f, sort_keys=False, default_flow_style=None)
    return path
