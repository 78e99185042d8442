"""Scenario models: parameters, dynamics and transcribed problem shapes."""

import math

import numpy as np
import pytest

from trigopt.errors import ConfigError, DimensionError, InvalidBigMError
from trigopt.logic.implication import Classification, ImplicationMode
from trigopt.nlp.expr import evaluate_expr, var
from trigopt.nlp.problem import derivatives, evaluate
from trigopt.scenarios.docking import DockingParams, build_docking_ocp, docking_initial_guess, docking_triggers
from trigopt.scenarios.lander import LanderParams, build_pdg_ocp, lander_dynamics, pdg_initial_guess
from trigopt.scenarios.polytope import Polytope, load_polytopes, pyramid_regions
from trigopt.scenarios.ugv import UgvParams, build_ugv_ocp, ugv_dynamics, ugv_initial_guess
from trigopt.settings import REPO_ROOT

CONFIG_DIR = REPO_ROOT / "config"


@pytest.fixture(scope="module")
def ugv_regions():
    return load_polytopes(CONFIG_DIR / "regions" / "ugv_rectangles.yaml", dim=2)


@pytest.fixture(scope="module")
def pdg_regions():
    return load_polytopes(CONFIG_DIR / "regions" / "pdg_pyramids.yaml", dim=3)


class TestUgv:
    def test_parameter_file(self):
        params = UgvParams.from_yaml(CONFIG_DIR / "scenarios" / "ugv.yaml")
        assert params.w == 38.0
        assert params.psi_max == pytest.approx(math.radians(0.5))
        assert params.final_time == pytest.approx(76.0)
        assert params.x0 == (0.0, 0.0, 0.0, 0.15, 0.0)

    def test_overrides_and_unknown_keys(self):
        params = UgvParams.from_yaml(CONFIG_DIR / "scenarios" / "ugv.yaml", {"N": 10, "phi_max": 10.0})
        assert params.N == 10
        assert params.phi_max == pytest.approx(math.radians(10.0))
        with pytest.raises(ConfigError):
            UgvParams.from_dict({"wheelbase": 0.2})

    @pytest.mark.parametrize("kwargs", [{"v_min": 0.9}, {"phi_max": math.pi / 2}, {"terminal_indicator_reading": "x"}])
    def test_invalid_params(self, kwargs):
        with pytest.raises(ConfigError):
            UgvParams(**kwargs)

    def test_dynamics(self):
        rates = ugv_dynamics([1.0, 2.0, 0.0, 0.5, 0.05], [0.01, 0.002], L=0.1)
        np.testing.assert_allclose(rates, [0.5, 0.0, 5.0 * math.tan(0.05), 0.01, 0.002])

    def test_dynamics_on_expressions(self):
        rates = ugv_dynamics([var(i) for i in range(5)], [var(5), var(6)], L=0.1)
        point = [1.0, 2.0, math.pi / 2, 0.4, 0.0, 0.0, 0.0]
        assert evaluate_expr(rates[1], point) == pytest.approx(0.4)
        assert evaluate_expr(rates[0], point) == pytest.approx(0.0, abs=1e-15)

    def test_minlp_problem(self, ugv_regions):
        transcribed = build_ugv_ocp(UgvParams(), ugv_regions, "minlp")
        assert transcribed.classification == Classification.MINLP
        assert transcribed.integer_indices.size == 5 * 21
        assert transcribed.nlp.n_relaxable == 0
        assert transcribed.steps_per_interval == 4

    def test_mpvc_problem(self, ugv_regions):
        transcribed = build_ugv_ocp(UgvParams(), ugv_regions, "mpvc")
        assert transcribed.classification == Classification.MPVC
        assert transcribed.delta_indices.size == 105
        assert transcribed.integer_indices.size == 0
        assert transcribed.nlp.n_relaxable == 4 * 105

    def test_terminal_reading(self, ugv_regions):
        transcribed = build_ugv_ocp(UgvParams(terminal_indicator_reading="first"), ugv_regions, "mpvc")
        weights = [binding.weights[-1] for binding in transcribed.bindings]
        assert weights == [1.0, 0.0, 0.0, 0.0, 0.0]

    def test_big_m_too_small(self, ugv_regions):
        with pytest.raises(InvalidBigMError):
            build_ugv_ocp(UgvParams(M=5.0), ugv_regions, "minlp")

    def test_region_must_be_planar(self, pdg_regions):
        with pytest.raises(ConfigError):
            build_ugv_ocp(UgvParams(), pdg_regions, "minlp")

    def test_unknown_formulation(self, ugv_regions):
        with pytest.raises(ConfigError):
            build_ugv_ocp(UgvParams(), ugv_regions, "mpcc")

    def test_initial_guess(self, ugv_regions):
        transcribed = build_ugv_ocp(UgvParams(), ugv_regions, "mpvc")
        z = ugv_initial_guess(transcribed, indicator=0.5)
        states = transcribed.states(z)
        np.testing.assert_allclose(states[10, :2], [5.0, 5.0])
        assert all(np.all(values == 0.5) for values in transcribed.indicators(z).values())


class TestLander:
    def test_parameter_file(self):
        params = LanderParams.from_yaml(CONFIG_DIR / "scenarios" / "pdg.yaml")
        np.testing.assert_allclose(params.v0, [80.0, 30.0, -75.0])
        assert params.gamma_gs == pytest.approx(math.radians(86.0))
        assert params.alpha == pytest.approx(1.0 / (9.807 * 225.0))
        assert params.w1 == 1000.0
        assert params.N == 50
        assert params.rate_augment is True

    def test_unsigned_exponent_strings(self):
        params = LanderParams.from_dict({"w1": "1.0e3", "t_f": "75", "N": "30", "rate_augment": "false"})
        assert params.w1 == 1000.0
        assert params.t_f == 75.0
        assert params.N == 30
        assert params.rate_augment is False

    @pytest.mark.parametrize("data", [{"w1": "heavy"}, {"N": "many"}, {"rate_augment": "maybe"}, {"rho_ub": True}])
    def test_unconvertible_values(self, data):
        with pytest.raises(ConfigError):
            LanderParams.from_dict(data)

    def test_vertical_acceleration_at_minimum_thrust(self):
        params = LanderParams(omega=(0.0, 0.0, 0.0))
        rates = lander_dynamics([0.0, 0.0, 1500.0, 0.0, 0.0, 0.0, 1905.0], [0.0, 0.0, 4971.0], params)
        assert rates[5] == pytest.approx(4971.0 / 1905.0 - 3.71)
        assert rates[5] == pytest.approx(-1.1006, abs=1e-4)
        assert rates[6] == pytest.approx(-4971.0 / (9.807 * 225.0))

    def test_mass_flow_at_maximum_thrust(self):
        rates = lander_dynamics(np.r_[np.zeros(6), 1905.0], [0.0, 0.0, 13258.0], LanderParams())
        assert rates[6] == pytest.approx(-6.00841, abs=1e-5)

    def test_coriolis_term(self):
        params = LanderParams(omega=(0.0, 0.0, 1e-2), g_mars=-1.0)
        rates = lander_dynamics([0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 1000.0], [0.0, 0.0, 1000.0], params)
        # -2 w x v with w = 0.01 e_z, v = 10 e_x
        np.testing.assert_allclose(rates[3:6], [0.0, -0.2, 0.0], atol=1e-12)

    def test_invalid_params(self):
        with pytest.raises(ConfigError):
            LanderParams(m_dry=2000.0)
        with pytest.raises(ConfigError):
            LanderParams.from_dict({"v_max": 100.0})

    def test_region_problem(self, pdg_regions):
        transcribed = build_pdg_ocp(LanderParams(), pdg_regions, "minlp")
        assert transcribed.classification == Classification.MINLP
        assert transcribed.integer_indices.size == 3 * 51
        assert transcribed.ocp.rate_augmented
        assert transcribed.ocp.n_x == 10

    def test_baseline(self):
        transcribed = build_pdg_ocp(LanderParams(), [])
        assert transcribed.classification == Classification.NLP
        assert transcribed.delta_indices.size == 0
        assert transcribed.ocp.name == "pdg-baseline+rate"

    def test_thrust_rows_skip_the_final_node(self):
        params = LanderParams(N=10)
        transcribed = build_pdg_ocp(params, [])
        # glide slope and three thrust rows at k < N, speed limit at every node
        assert transcribed.nlp.m_ineq == 4 * params.N + (params.N + 1)

    def test_region_dimension(self):
        flat = Polytope(np.eye(2), np.zeros(2), name="flat")
        with pytest.raises(DimensionError):
            build_pdg_ocp(LanderParams(), [flat])

    def test_initial_guess_hovers(self):
        params = LanderParams(N=10)
        transcribed = build_pdg_ocp(params, pyramid_regions(70.0, [(2000.0, 400.0, 0.0)]), "mpvc")
        z = pdg_initial_guess(transcribed, params)
        states = transcribed.states(z)
        np.testing.assert_allclose(states[0, :3], [2000.0, 0.0, 1500.0])
        np.testing.assert_allclose(states[:, 6], 1905.0)
        np.testing.assert_allclose(states[-1, 7:], [0.0, 0.0, 3.71 * 1905.0])


class TestDocking:
    def test_trigger_values(self):
        speed, cone = docking_triggers([0.0, 0.0, 0.0], 8.0, 0.1, 30.0, [-1.0, 0.0, 0.0])
        assert speed.mode == ImplicationMode.TRIGGER_EPS_BIG_M
        point = [-4.0, 0.0, 0.0, 0.3, 0.0, 0.0]
        assert evaluate_expr(speed.trigger, point) == pytest.approx(4.0)
        assert evaluate_expr(speed.consequence[0], point) == pytest.approx(-0.1)
        assert evaluate_expr(cone.consequence[0], point) == pytest.approx(4.0 * math.cos(math.radians(30.0)) - 4.0)

    def test_cone_excludes_wrong_side(self):
        _, cone = docking_triggers([0.0, 0.0, 0.0], 8.0, 0.1, 30.0, [-1.0, 0.0, 0.0])
        assert evaluate_expr(cone.consequence[0], [4.0, 0.0, 0.0, 0.0, 0.0, 0.0]) > 0.0

    def test_inactive_far_away(self):
        speed, _ = docking_triggers([0.0, 0.0, 0.0], 8.0, 0.1, 30.0, [-1.0, 0.0, 0.0])
        assert evaluate_expr(speed.trigger, [-20.0, 6.0, 4.0, 0.5, 0.0, 0.0]) < 0.0

    @pytest.mark.parametrize(
        "args",
        [
            (8.0, 0.1, 0.0, [-1.0, 0.0, 0.0]),
            (8.0, 0.1, 90.0, [-1.0, 0.0, 0.0]),
            (0.0, 0.1, 30.0, [-1.0, 0.0, 0.0]),
            (8.0, 0.1, 30.0, [-2.0, 0.0, 0.0]),
        ],
    )
    def test_invalid_geometry(self, args):
        with pytest.raises(ConfigError):
            docking_triggers([0.0, 0.0, 0.0], *args)

    def test_indicator_mode_rejected(self):
        with pytest.raises(ConfigError):
            docking_triggers([0.0, 0.0, 0.0], 8.0, 0.1, 30.0, [-1.0, 0.0, 0.0], mode="indicator_bigM")

    def test_minlp_problem(self):
        params = DockingParams.from_yaml(CONFIG_DIR / "scenarios" / "docking.yaml", {"N": 10})
        transcribed = build_docking_ocp(params, "minlp")
        assert transcribed.classification == Classification.MINLP
        assert transcribed.integer_indices.size == 2 * 10
        assert transcribed.nlp.n_relaxable == 0

    def test_mpcc_problem(self):
        transcribed = build_docking_ocp(DockingParams(N=10), "mpvc")
        assert transcribed.classification == Classification.MPCC
        assert transcribed.integer_indices.size == 0
        # complementarity and vanishing row per implication and node
        assert transcribed.nlp.n_relaxable == 2 * 2 * 10
        z = docking_initial_guess(transcribed)
        np.testing.assert_allclose(transcribed.states(z)[-1], np.zeros(6))


def central_differences(fun, z, step=1e-6):
    """Column-wise central differences of a vector function."""
    columns = []
    for i in range(z.size):
        h = step * (1.0 + abs(z[i]))
        up, down = z.copy(), z.copy()
        up[i] += h
        down[i] -= h
        columns.append((np.atleast_1d(fun(up)) - np.atleast_1d(fun(down))) / (2.0 * h))
    return np.column_stack(columns)


def small_problems():
    ugv_regions = load_polytopes(CONFIG_DIR / "regions" / "ugv_rectangles.yaml", dim=2)
    ugv = build_ugv_ocp(UgvParams(N=3), ugv_regions, "mpvc")
    lander_params = LanderParams(N=3)
    lander = build_pdg_ocp(lander_params, pyramid_regions(70.0, [(2000.0, 400.0, 0.0)]), "mpvc")
    docking = build_docking_ocp(DockingParams(N=3), "mpvc")
    return {
        "ugv": (ugv, ugv_initial_guess(ugv, indicator=0.5)),
        "pdg": (lander, pdg_initial_guess(lander, lander_params)),
        "docking": (docking, docking_initial_guess(docking)),
    }


class TestTranscribedDerivatives:
    @pytest.mark.parametrize("name", ["ugv", "pdg", "docking"])
    def test_against_finite_differences(self, name, rng):
        transcribed, guess = small_problems()[name]
        problem = transcribed.nlp
        for _ in range(3):
            z = guess + rng.normal(scale=1e-2, size=guess.size)
            d = derivatives(problem, z)
            numeric_gradient = central_differences(lambda p: evaluate(problem, p)[0], z)[0]
            np.testing.assert_allclose(
                d.gradient, numeric_gradient, rtol=1e-5, atol=1e-5 * max(1.0, np.abs(numeric_gradient).max())
            )
            for jacobian, position in ((d.jac_eq, 1), (d.jac_ineq, 2)):
                numeric = central_differences(lambda p: evaluate(problem, p)[position], z)
                np.testing.assert_allclose(
                    jacobian.toarray(), numeric, rtol=1e-5, atol=1e-5 * max(1.0, np.abs(numeric).max())
                )
