"""Direct multiple shooting: variable layout, constraints, implications and solves."""

import numpy as np
import pytest

from trigopt.errors import ConfigError, DimensionError, InvalidBigMError
from trigopt.logic.implication import Classification, ImplicationMode, ImplicationSpec
from trigopt.nlp.expr import sumsq, var
from trigopt.nlp.ipm import NlpStatus, solve_nlp
from trigopt.nlp.problem import constraint_violation, evaluate
from trigopt.ocp.integrators import simulate
from trigopt.ocp.shooting import INDICATOR_LABEL, initial_guess, transcribe
from trigopt.ocp.spec import RATE_PENALTY_LABEL, OcpSpec, StageImplication, augment_with_rate_control

HORIZON = 10


def double_integrator(x, u):
    return [x[1], u[0]]


def make_ocp(implications=(), **overrides):
    options = dict(
        n_x=2,
        n_u=1,
        dynamics=double_integrator,
        horizon=HORIZON,
        initial_state=np.array([0.0, 0.0]),
        final_time=1.0,
        final_state=np.array([1.0, 0.0]),
        stage_cost=lambda x, u, t_d: {"control_effort": t_d * sumsq(u)},
        state_lower=np.array([-5.0, -5.0]),
        state_upper=np.array([5.0, 5.0]),
        control_lower=np.array([-20.0]),
        control_upper=np.array([20.0]),
        implications=tuple(implications),
        name="double-integrator",
    )
    options.update(overrides)
    return OcpSpec(**options)


def position_cap(mode, nodes=(3, 4, 5), weight=0.0, min_activations=0):
    """position <= 0.5 as the consequence of an indicator."""
    spec = ImplicationSpec(
        consequence=(var(0) - 0.5,),
        mode=mode,
        big_m=10.0 if mode == ImplicationMode.INDICATOR_BIG_M else None,
        weight=weight,
        name="cap",
    )
    return StageImplication(spec=spec, nodes=nodes, min_activations=min_activations)


class TestLayout:
    def test_variable_and_row_counts(self):
        transcribed = transcribe(make_ocp())
        nlp = transcribed.nlp
        assert nlp.n == (HORIZON + 1) * 2 + HORIZON
        assert nlp.m_eq == 2 * HORIZON
        assert transcribed.state_index.shape == (HORIZON + 1, 2)
        assert transcribed.control_index.shape == (HORIZON, 1)
        assert transcribed.classification == Classification.NLP
        assert transcribed.t_d == pytest.approx(0.1)

    def test_boundary_states_fixed_by_bounds(self):
        transcribed = transcribe(make_ocp())
        nlp = transcribed.nlp
        first, last = transcribed.state_index[0], transcribed.state_index[-1]
        np.testing.assert_array_equal(nlp.lb[first], [0.0, 0.0])
        np.testing.assert_array_equal(nlp.ub[first], [0.0, 0.0])
        np.testing.assert_array_equal(nlp.lb[last], [1.0, 0.0])
        np.testing.assert_array_equal(nlp.ub[last], [1.0, 0.0])

    def test_scaled_variables_report_physical_values(self):
        transcribed = transcribe(make_ocp(x_scale=np.array([2.0, 4.0]), u_scale=np.array([10.0])))
        z = initial_guess(transcribed, control=[3.0])
        np.testing.assert_allclose(transcribed.states(z)[-1], [1.0, 0.0])
        np.testing.assert_allclose(transcribed.controls(z), np.full((HORIZON, 1), 3.0))
        assert z[transcribed.control_index[0, 0]] == pytest.approx(0.3)

    def test_initial_guess_interpolates(self):
        transcribed = transcribe(make_ocp())
        states = transcribed.states(initial_guess(transcribed))
        np.testing.assert_allclose(states[:, 0], np.linspace(0.0, 1.0, HORIZON + 1))

    def test_substeps_validated(self):
        with pytest.raises(ConfigError):
            transcribe(make_ocp(), steps_per_interval=0)

    def test_invalid_horizon(self):
        with pytest.raises(ConfigError):
            make_ocp(horizon=0)

    def test_initial_state_outside_bounds(self):
        with pytest.raises(ConfigError):
            make_ocp(initial_state=np.array([9.0, 0.0]))


class TestSolve:
    def test_solution_satisfies_dynamics(self):
        transcribed = transcribe(make_ocp(), steps_per_interval=2)
        solution = solve_nlp(transcribed.nlp, initial_guess(transcribed))
        assert solution.status == NlpStatus.OPTIMAL
        states = transcribed.states(solution.x)
        controls = transcribed.controls(solution.x)
        rollout = simulate(double_integrator, states[0], controls, 0.1, steps=2)
        np.testing.assert_allclose(rollout, states, atol=1e-6)
        assert constraint_violation(transcribed.nlp, solution.x) <= 1e-6

    def test_objective_terms_decompose(self):
        transcribed = transcribe(make_ocp())
        solution = solve_nlp(transcribed.nlp, initial_guess(transcribed))
        terms = transcribed.objective_terms(solution.x)
        assert set(terms) == {"control_effort"}
        assert sum(terms.values()) == pytest.approx(evaluate(transcribed.nlp, solution.x)[0])

    def test_free_final_time(self):
        ocp = make_ocp(
            final_time=None,
            final_time_bounds=(0.5, 4.0),
            stage_cost=lambda x, u, t_d: {"control_effort": t_d * sumsq(u), "time": t_d},
        )
        transcribed = transcribe(ocp)
        assert transcribed.final_time_index is not None
        assert transcribed.t_d is None
        solution = solve_nlp(transcribed.nlp, initial_guess(transcribed, final_time=2.0))
        assert solution.status == NlpStatus.OPTIMAL
        assert 0.5 <= transcribed.final_time(solution.x) <= 4.0


class TestImplications:
    def test_big_m_indicators_are_binary(self):
        transcribed = transcribe(make_ocp([position_cap(ImplicationMode.INDICATOR_BIG_M, weight=1.0)]))
        assert transcribed.classification == Classification.MINLP
        assert transcribed.integer_indices.size == 3
        np.testing.assert_array_equal(transcribed.integer_indices, transcribed.delta_indices)
        (binding,) = transcribed.bindings
        np.testing.assert_array_equal(binding.nodes, [3, 4, 5])

    def test_vanishing_rows_are_relaxable(self):
        transcribed = transcribe(make_ocp([position_cap(ImplicationMode.INDICATOR_VANISHING, weight=1.0)]))
        assert transcribed.classification == Classification.MPVC
        assert transcribed.integer_indices.size == 0
        assert transcribed.nlp.n_relaxable == 3

    def test_indicator_cost_term(self):
        transcribed = transcribe(make_ocp([position_cap(ImplicationMode.INDICATOR_VANISHING, weight=2.0)]))
        z = initial_guess(transcribed, indicator=1.0)
        assert transcribed.objective_terms(z)[INDICATOR_LABEL] == pytest.approx(-6.0)

    def test_indicator_values_and_consequence(self):
        transcribed = transcribe(make_ocp([position_cap(ImplicationMode.INDICATOR_VANISHING)]))
        z = initial_guess(transcribed, indicator=0.25)
        np.testing.assert_allclose(transcribed.indicators(z)["cap"], [0.25, 0.25, 0.25])
        (binding,) = transcribed.bindings
        np.testing.assert_allclose(binding.consequence_values(z)[:, 0], [0.3 - 0.5, 0.4 - 0.5, 0.5 - 0.5])

    def test_min_activations_row(self):
        plain = transcribe(make_ocp([position_cap(ImplicationMode.INDICATOR_BIG_M)]))
        counted = transcribe(make_ocp([position_cap(ImplicationMode.INDICATOR_BIG_M, min_activations=2)]))
        assert counted.nlp.m_ineq == plain.nlp.m_ineq + 1
        z = initial_guess(counted, indicator=0.0)
        assert evaluate(counted.nlp, z)[2][-1] == pytest.approx(2.0)

    def test_big_m_below_box_bound(self):
        spec = ImplicationSpec(consequence=(var(0) - 0.5,), mode=ImplicationMode.INDICATOR_BIG_M, big_m=1.0, name="cap")
        with pytest.raises(InvalidBigMError):
            transcribe(make_ocp([StageImplication(spec=spec, nodes=(2,))]))

    def test_control_implication_not_allowed_at_last_node(self):
        spec = ImplicationSpec(consequence=(var(2),), mode=ImplicationMode.INDICATOR_VANISHING, name="u")
        with pytest.raises(DimensionError):
            make_ocp([StageImplication(spec=spec, nodes=(HORIZON,))])

    def test_duplicate_nodes_rejected(self):
        with pytest.raises(ConfigError):
            position_cap(ImplicationMode.INDICATOR_VANISHING, nodes=(2, 2))


class TestRateAugmentation:
    def test_augmented_dimensions(self):
        augmented = augment_with_rate_control(make_ocp(), rate_weight=0.5)
        assert augmented.n_x == 3
        assert augmented.n_u == 1
        assert augmented.rate_augmented
        assert np.isnan(augmented.initial_state[2])

    def test_rate_penalty_term(self):
        transcribed = transcribe(augment_with_rate_control(make_ocp(), rate_weight=0.5))
        z = initial_guess(transcribed, control=[2.0])
        terms = transcribed.objective_terms(z)
        assert terms[RATE_PENALTY_LABEL] == pytest.approx(0.5 * 4.0 * HORIZON)

    def test_control_bounds_move_to_states(self):
        transcribed = transcribe(augment_with_rate_control(make_ocp()))
        thrust = transcribed.state_index[:, 2]
        np.testing.assert_array_equal(transcribed.nlp.ub[thrust[1:-1]], np.full(HORIZON - 1, 20.0))

    def test_control_rows_stay_off_the_final_node(self):
        ocp = make_ocp(control_constraints=lambda u: [u[0] ** 2 - 100.0])
        plain = transcribe(ocp).nlp
        augmented = transcribe(augment_with_rate_control(ocp)).nlp
        assert plain.m_ineq == HORIZON
        assert augmented.m_ineq == HORIZON

    def test_state_rows_still_cover_every_node(self):
        ocp = make_ocp(state_constraints=lambda x: [x[1] - 4.0])
        augmented = transcribe(augment_with_rate_control(ocp)).nlp
        assert augmented.m_ineq == HORIZON + 1

    def test_double_augmentation_rejected(self):
        with pytest.raises(ConfigError):
            augment_with_rate_control(augment_with_rate_control(make_ocp()))
