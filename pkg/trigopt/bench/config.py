"""
Run Configuration - What a single bench run solves and where it writes

A RunConfig names the scenario, the formulation and the solver, points to
the parameter and region files, and carries scenario overrides
(``N=30``, ``w1=500``) as well as dotted settings overrides
(``nlp.tol=1e-8``). Its hash covers the configuration and the content of
every file it reads, so two records with the same hash came from the same
inputs.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

from trigopt.errors import ConfigError
from trigopt.settings import REPO_ROOT, parse_assignment

SCENARIOS = ("ugv", "pdg", "docking")
FORMULATIONS = ("minlp", "mpvc")
SOLVERS = ("bnb", "homotopy", "enumerate")

COMPATIBLE = {
    "bnb": "minlp",
    "enumerate": "minlp",
    "homotopy": "mpvc",
}

DEFAULT_PARAMS = {
    "ugv": REPO_ROOT / "config" / "scenarios" / "ugv.yaml",
    "pdg": REPO_ROOT / "config" / "scenarios" / "pdg.yaml",
    "docking": REPO_ROOT / "config" / "scenarios" / "docking.yaml",
}
DEFAULT_REGIONS = {
    "ugv": REPO_ROOT / "config" / "regions" / "ugv_rectangles.yaml",
    "pdg": REPO_ROOT / "config" / "regions" / "pdg_pyramids.yaml",
}
NO_REGIONS = "none"


def split_overrides(items: Iterable[str]) -> Tuple[Dict[str, Any], Tuple[str, ...]]:
    """
    Sort command-line overrides into scenario parameters and settings.

    Dotted keys (``nlp.tol=1e-8``) address config.yaml; plain keys
    (``N=30``) address the scenario parameter file.

    Returns:
        (scenario overrides, dotted settings overrides)
    """
    scenario: Dict[str, Any] = {}
    dotted = []
    for item in items:
        key, value = parse_assignment(item)
        if "." in key:
            dotted.append(item)
        else:
            scenario[key] = value
    return scenario, tuple(dotted)


@dataclass(frozen=True)
class RunConfig:
    """
    One bench run.

    Attributes:
        scenario: ugv, pdg or docking
        formulation: minlp or mpvc
        solver: bnb, enumerate (minlp) or homotopy (mpvc)
        params_path: Scenario parameter file
        regions_path: Region file; ``"none"`` for no regions
        out_dir: Directory receiving the run folder and the index
        seed: Recorded with the results
        overrides: Scenario parameter overrides
        settings_overrides: Dotted overrides of config.yaml values
        trace: Also write the branch-and-bound node log
    """

    scenario: str
    formulation: str
    solver: str
    params_path: Optional[Path] = None
    regions_path: Optional[Path] = None
    out_dir: Path = Path("results")
    seed: int = 0
    overrides: Dict[str, Any] = field(default_factory=dict)
    settings_overrides: Tuple[str, ...] = ()
    trace: bool = False

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"Unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"Unknown formulation {self.formulation!r}; expected one of {FORMULATIONS}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"Unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if COMPATIBLE[self.solver] != self.formulation:
            raise ConfigError(
                f"Solver {self.solver!r} solves the {COMPATIBLE[self.solver]} formulation, "
                f"not {self.formulation!r}"
            )

        params = Path(self.params_path) if self.params_path is not None else DEFAULT_PARAMS[self.scenario]
        if not params.exists():
            raise ConfigError(f"Parameter file not found: {params}")
        object.__setattr__(self, "params_path", params)

        regions: Optional[Path]
        if self.regions_path is None:
            regions = DEFAULT_REGIONS.get(self.scenario)
        elif str(self.regions_path).lower() == NO_REGIONS:
            regions = None
        else:
            regions = Path(self.regions_path)
        if regions is not None and self.scenario == "docking":
            raise ConfigError("The docking scenario takes no region file")
        if regions is not None and not regions.exists():
            raise ConfigError(f"Region file not found: {regions}")
        object.__setattr__(self, "regions_path", regions)
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "overrides", dict(self.overrides))
        object.__setattr__(self, "settings_overrides", tuple(self.settings_overrides))

    @property
    def name(self) -> str:
        return f"{self.scenario}-{self.formulation}-{self.solver}"

    @property
    def run_dir(self) -> Path:
        return self.out_dir / self.name

    def as_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "formulation": self.formulation,
            "solver": self.solver,
            "params_path": str(self.params_path),
            "regions_path": str(self.regions_path) if self.regions_path is not None else NO_REGIONS,
            "seed": self.seed,
            "overrides": dict(sorted(self.overrides.items())),
            "settings_overrides": list(self.settings_overrides),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], out_dir: Optional[Path] = None) -> "RunConfig":
        """Rebuild a configuration stored in a results record."""
        try:
            return cls(
                scenario=data["scenario"],
                formulation=data["formulation"],
                solver=data["solver"],
                params_path=Path(data["params_path"]),
                regions_path=Path(data["regions_path"]),
                out_dir=out_dir or Path("results"),
                seed=int(data.get("seed", 0)),
                overrides=dict(data.get("overrides", {})),
                settings_overrides=tuple(data.get("settings_overrides", ())),
            )
        except KeyError as exc:
            raise ConfigError(f"Stored run configuration lacks {exc.args[0]!r}") from exc

    def config_hash(self, settings: Optional[Dict[str, Any]] = None) -> str:
        """SHA-256 over the configuration, the solver settings and the input files."""
        digest = hashlib.sha256()
        payload = {key: value for key, value in self.as_dict().items() if not key.endswith("_path")}
        payload["settings"] = settings or {}
        digest.update(json.dumps(payload, sort_keys=True, default=str).encode())
        for path in (self.params_path, self.regions_path):
            if path is not None:
                digest.update(Path(path).read_bytes())
        return digest.hexdigest()
