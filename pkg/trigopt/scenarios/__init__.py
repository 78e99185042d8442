"""Scenario models, OCP builders and polytope regions."""

from trigopt.scenarios.docking import (
    DockingParams,
    build_docking_ocp,
    docking_initial_guess,
    docking_triggers,
)
from trigopt.scenarios.lander import (
    LanderParams,
    build_pdg_ocp,
    lander_dynamics,
    pdg_initial_guess,
)
from trigopt.scenarios.polytope import (
    Polytope,
    load_polytopes,
    pyramid_regions,
    rectangle,
    save_polytopes,
)
from trigopt.scenarios.ugv import UgvParams, build_ugv_ocp, ugv_dynamics, ugv_initial_guess

__all__ = [
    "DockingParams",
    "LanderParams",
    "Polytope",
    "UgvParams",
    "build_docking_ocp",
    "build_pdg_ocp",
    "build_ugv_ocp",
    "docking_initial_guess",
    "docking_triggers",
    "lander_dynamics",
    "load_polytopes",
    "pdg_initial_guess",
    "pyramid_regions",
    "rectangle",
    "save_polytopes",
    "ugv_dynamics",
    "ugv_initial_guess",
]
