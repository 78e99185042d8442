"""
Results Records - Persisted outcome of one bench run

A record is a JSON document (schema version 1) written next to the
solution vector, the homotopy trace and the node log of its run. Writes go
through a temporary file and ``os.replace``; every write also appends one
line to ``index.jsonl`` in the output directory.
"""

import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from trigopt import __version__
from trigopt.errors import ConfigError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RECORD_FILE = "record.json"
INDEX_FILE = "index.jsonl"
DECOMPOSITION_TOL = 1e-6

# run status -> exit code of the solve command
RUN_STATUSES = {
    "solved": 0,
    "feasible": 0,
    "infeasible": 2,
    "solver_failure": 3,
}

# fields that legitimately differ between two runs of the same config
VOLATILE_FIELDS = ("created_at", "runtime")


@dataclass
class ResultsRecord:
    """
    Outcome of one run.

    Attributes:
        scenario, formulation, solver: What was solved
        status: solved, feasible, infeasible or solver_failure
        solver_status: Status string of the solver itself
        objective: Objective at the returned point (None without a point)
        objective_terms: Objective per cost label (control_effort,
            indicator, rate_penalty, slack, terminal_mass)
        final_state: Physical state at node N
        final_mass: Lander mass at node N (pdg only)
        indicator_total: Sum of every delta
        indicator_per_region: Sum of delta per region name
        runtime: Wall-clock seconds of the solver call
        node_count: Branch-and-bound nodes or enumerated assignments
        homotopy_iterations: Homotopy NLP attempts
        final_tau: Relaxation of the returned homotopy solution
        config_hash: Hash of the configuration and its input files
        run_config: RunConfig.as_dict() of the run
        files: Companion files relative to the record's directory
        version: trigopt version that wrote the record
        schema_version: Record layout version
        created_at: Unix time of the write
    """

    scenario: str
    formulation: str
    solver: str
    status: str
    solver_status: str
    objective: Optional[float] = None
    objective_terms: Dict[str, float] = field(default_factory=dict)
    final_state: List[float] = field(default_factory=list)
    final_mass: Optional[float] = None
    indicator_total: float = 0.0
    indicator_per_region: Dict[str, float] = field(default_factory=dict)
    runtime: float = 0.0
    node_count: Optional[int] = None
    homotopy_iterations: Optional[int] = None
    final_tau: Optional[float] = None
    config_hash: str = ""
    run_config: Dict[str, Any] = field(default_factory=dict)
    files: Dict[str, str] = field(default_factory=dict)
    version: str = __version__
    schema_version: int = SCHEMA_VERSION
    created_at: float = 0.0

    @property
    def exit_code(self) -> int:
        return RUN_STATUSES[self.status]

    @property
    def label(self) -> str:
        return f"{self.formulation}/{self.solver}"

    def validate(self) -> None:
        """
        Check the record against its schema.

        Raises:
            ConfigError: On an unknown status or schema version, or when the
                objective terms do not add up to the objective
        """
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"Unsupported record schema version {self.schema_version}")
        if self.status not in RUN_STATUSES:
            raise ConfigError(f"Unknown run status {self.status!r}")
        if self.objective is None:
            if self.status in ("solved", "feasible"):
                raise ConfigError(f"A {self.status} record needs an objective")
            return
        if not math.isfinite(self.objective):
            raise ConfigError(f"Record objective is not finite: {self.objective}")
        total = math.fsum(self.objective_terms.values())
        if abs(total - self.objective) > DECOMPOSITION_TOL * max(1.0, abs(self.objective)):
            raise ConfigError(
                f"Objective terms sum to {total!r}, objective is {self.objective!r}"
            )
        if abs(math.fsum(self.indicator_per_region.values()) - self.indicator_total) > 1e-9 * max(
            1.0, abs(self.indicator_total)
        ):
            raise ConfigError("Per-region indicator sums do not add up to the total")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ResultsRecord":
        """
        Rebuild and validate a record.

        Raises:
            ConfigError: On missing or unknown fields or a failed validation
        """
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"Unknown record field(s): {', '.join(sorted(unknown))}")
        missing = {"scenario", "formulation", "solver", "status", "solver_status"} - set(data)
        if missing:
            raise ConfigError(f"Record lacks field(s): {', '.join(sorted(missing))}")
        record = cls(**data)
        record.validate()
        return record


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_record(record: ResultsRecord, run_dir: Union[str, Path], index_dir: Optional[Path] = None) -> Path:
    """
    Validate and write a record, then append it to the index.

    Args:
        record: Record to persist
        run_dir: Directory of the run
        index_dir: Directory holding index.jsonl (defaults to run_dir's parent)

    Returns:
        Path of the written record
    """
    record.validate()
    run_dir = Path(run_dir)
    path = run_dir / RECORD_FILE
    _atomic_write(path, json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n")

    index_dir = Path(index_dir) if index_dir is not None else run_dir.parent
    index_dir.mkdir(parents=True, exist_ok=True)
    entry = {
        "record": os.path.relpath(path, index_dir),
        "scenario": record.scenario,
        "formulation": record.formulation,
        "solver": record.solver,
        "status": record.status,
        "objective": record.objective,
        "config_hash": record.config_hash,
        "created_at": record.created_at,
    }
    with open(index_dir / INDEX_FILE, "a") as f:
        f.write(json.dumps(entry, sort_keys=True) + "\n")
    logger.info("Wrote %s", path)
    return path


def resolve_record_path(path: Union[str, Path]) -> Path:
    """Accept a record file or the run directory containing one."""
    path = Path(path)
    if path.is_dir():
        path = path / RECORD_FILE
    if not path.exists():
        raise ConfigError(f"No results record at {path}")
    return path


def load_record(path: Union[str, Path]) -> ResultsRecord:
    """
    Load and validate a record.

    Args:
        path: record.json or its run directory

    Raises:
        ConfigError: If the file is missing, not JSON or fails validation
    """
    path = resolve_record_path(path)
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Expected a JSON object in {path}")
    return ResultsRecord.from_dict(data)


def stable_view(record: ResultsRecord) -> Dict[str, Any]:
    """Record contents without the fields that change from run to run."""
    data = record.to_dict()
    for key in VOLATILE_FIELDS:
        data.pop(key, None)
    return data
