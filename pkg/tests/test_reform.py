"""Implication specs, big-M validation and the four reformulations."""

import numpy as np
import pytest

from trigopt.errors import ConfigError, DimensionError, InvalidBigMError
from trigopt.logic.implication import (
    Classification,
    HeavisideRepr,
    ImplicationMode,
    ImplicationSpec,
    auxiliary_variables,
    normalize_weight,
    validate_big_m,
)
from trigopt.logic.reform import heaviside_cost, reformulate
from trigopt.nlp.expr import evaluate_expr, var

BOX = ([-1.0, -2.0], [3.0, 2.0])


def compile_at(spec, point, aux_values, integer=None):
    """Compile a spec over (z0, z1, aux...) and evaluate every constraint at a point."""
    aux = [var(2 + j) for j in range(len(auxiliary_variables(spec)))]
    output = reformulate(spec, aux, box=BOX, integer=integer)
    full = list(point) + list(aux_values)
    return output, [evaluate_expr(c.expr, full) for c in output.constraints]


class TestImplicationSpec:
    def test_trigger_required_for_trigger_modes(self):
        with pytest.raises(ConfigError):
            ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.TRIGGER_MPCC)

    def test_trigger_rejected_for_indicator_modes(self):
        with pytest.raises(ConfigError):
            ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.INDICATOR_BIG_M, trigger=var(1))

    def test_mode_accepts_strings(self):
        spec = ImplicationSpec(consequence=var(0), mode="indicator_vanishing")
        assert spec.mode == ImplicationMode.INDICATOR_VANISHING
        assert isinstance(spec.consequence, tuple) and len(spec.consequence) == 1

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.INDICATOR_VANISHING, weight=-1.0)

    def test_mpcc_reward_needs_heaviside_representation(self):
        with pytest.raises(ConfigError):
            ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.TRIGGER_MPCC, trigger=var(1), weight=1.0)

    def test_heaviside_only_for_mpcc(self):
        with pytest.raises(ConfigError):
            ImplicationSpec(
                consequence=(var(0),), mode=ImplicationMode.INDICATOR_BIG_M, heaviside=HeavisideRepr.SIGMOID
            )

    def test_non_positive_epsilon(self):
        with pytest.raises(InvalidBigMError):
            ImplicationSpec(
                consequence=(var(0),), mode=ImplicationMode.TRIGGER_EPS_BIG_M, trigger=var(1), epsilon=0.0
            )

    @pytest.mark.parametrize(
        "mode, expected",
        [
            (ImplicationMode.INDICATOR_BIG_M, Classification.MINLP),
            (ImplicationMode.TRIGGER_EPS_BIG_M, Classification.MINLP),
            (ImplicationMode.INDICATOR_VANISHING, Classification.MPVC),
            (ImplicationMode.TRIGGER_MPCC, Classification.MPCC),
        ],
    )
    def test_classification(self, mode, expected):
        trigger = var(1) if mode.has_trigger else None
        assert ImplicationSpec(consequence=(var(0),), mode=mode, trigger=trigger).classification == expected

    def test_normalize_weight(self):
        assert normalize_weight(-3.0) == 3.0
        assert normalize_weight(2.5) == 2.5


class TestBigM:
    def test_derived_from_box(self):
        spec = ImplicationSpec(consequence=(var(0) + var(1),), mode=ImplicationMode.INDICATOR_BIG_M)
        big_m, lower_m = validate_big_m(spec, BOX)
        assert big_m == pytest.approx(6.0)
        assert lower_m is None

    def test_supplied_value_checked(self):
        spec = ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.INDICATOR_BIG_M, big_m=2.0)
        with pytest.raises(InvalidBigMError):
            validate_big_m(spec, BOX)

    def test_supplied_value_kept(self):
        spec = ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.INDICATOR_BIG_M, big_m=7.0)
        assert validate_big_m(spec, BOX) == (7.0, None)

    def test_unbounded_box(self):
        spec = ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.INDICATOR_BIG_M)
        with pytest.raises(InvalidBigMError):
            validate_big_m(spec, ([-np.inf, 0.0], [np.inf, 1.0]))

    def test_no_box_needs_explicit_values(self):
        spec = ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.INDICATOR_BIG_M)
        with pytest.raises(InvalidBigMError):
            validate_big_m(spec, None)

    def test_trigger_lower_bound(self):
        spec = ImplicationSpec(
            consequence=(var(0),), mode=ImplicationMode.TRIGGER_EPS_BIG_M, trigger=var(1), epsilon=0.01
        )
        big_m, lower_m = validate_big_m(spec, BOX)
        assert big_m == pytest.approx(4.0)
        assert lower_m == pytest.approx(2.0 + 0.01 + 1.0)

    def test_trigger_lower_bound_must_cover_epsilon(self):
        spec = ImplicationSpec(
            consequence=(var(0),),
            mode=ImplicationMode.TRIGGER_EPS_BIG_M,
            trigger=var(1),
            big_m=4.0,
            lower_m=2.0,
            epsilon=0.01,
        )
        with pytest.raises(InvalidBigMError):
            validate_big_m(spec, BOX)


class TestReformulations:
    def test_big_m_indicator(self):
        spec = ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.INDICATOR_BIG_M, big_m=5.0)
        output, values = compile_at(spec, [2.0, 0.0], [1.0])
        assert output.classification == Classification.MINLP
        assert output.variables[0].integer
        assert values == [pytest.approx(2.0)]
        _, relaxed = compile_at(spec, [2.0, 0.0], [0.0])
        assert relaxed == [pytest.approx(-3.0)]

    def test_continuous_relaxation(self):
        spec = ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.INDICATOR_BIG_M, big_m=5.0)
        output, _ = compile_at(spec, [0.0, 0.0], [0.5], integer=False)
        assert not output.variables[0].integer
        assert output.classification == Classification.NLP

    def test_vanishing_indicator(self):
        spec = ImplicationSpec(consequence=(var(0), var(1)), mode=ImplicationMode.INDICATOR_VANISHING, weight=2.0)
        output, values = compile_at(spec, [2.0, -1.0], [0.5])
        assert output.relaxable_count == 2
        np.testing.assert_allclose(values, [1.0, -0.5])
        assert evaluate_expr(output.cost, [0.0, 0.0, 0.5]) == pytest.approx(-1.0)

    def test_eps_big_m_trigger(self):
        spec = ImplicationSpec(
            consequence=(var(0),),
            mode=ImplicationMode.TRIGGER_EPS_BIG_M,
            trigger=var(1),
            big_m=4.0,
            lower_m=4.0,
            epsilon=0.01,
        )
        output, values = compile_at(spec, [-0.5, 1.0], [1.0])
        assert [c.label for c in output.constraints] == [":trigger_upper", ":trigger_lower", ":bigM[0]"]
        assert all(v <= 0.0 for v in values)
        # delta = 1 cannot hold while H is below epsilon
        _, inactive = compile_at(spec, [-0.5, 0.0], [1.0])
        assert inactive[1] > 0.0

    def test_mpcc_trigger(self):
        spec = ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.TRIGGER_MPCC, trigger=var(1))
        output, values = compile_at(spec, [-0.5, 1.5], [1.5])
        assert output.classification == Classification.MPCC
        assert output.relaxable_count == 2
        assert output.cost is None
        np.testing.assert_allclose(values, [0.0, 0.0, -0.75])

    def test_wrong_auxiliary_count(self):
        spec = ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.INDICATOR_VANISHING)
        with pytest.raises(DimensionError):
            reformulate(spec, [var(2), var(3)])


class TestHeaviside:
    def test_sigmoid_half_at_zero(self):
        spec = ImplicationSpec(
            consequence=(var(0),),
            mode=ImplicationMode.TRIGGER_MPCC,
            trigger=var(1),
            weight=2.0,
            heaviside=HeavisideRepr.SIGMOID,
        )
        cost, extra = heaviside_cost(spec)
        assert extra == []
        assert evaluate_expr(cost, [0.0, 0.0]) == pytest.approx(-1.0)
        assert evaluate_expr(cost, [0.0, 5.0]) == pytest.approx(-2.0, abs=1e-6)

    def test_kkt_lp_variables_and_rows(self):
        spec = ImplicationSpec(
            consequence=(var(0),),
            mode=ImplicationMode.TRIGGER_MPCC,
            trigger=var(1),
            weight=1.0,
            heaviside=HeavisideRepr.KKT_LP,
        )
        roles = [v.role for v in auxiliary_variables(spec)]
        assert roles == ["y", "delta", "lambda1", "lambda2"]
        # H = 0.5: y = 0.5, delta = 1, lambda1 = 0.5, lambda2 = 0
        output, values = compile_at(spec, [-1.0, 0.5], [0.5, 1.0, 0.5, 0.0])
        kinds = [c.kind for c in output.constraints]
        assert kinds.count("eq") == 1
        assert output.relaxable_count == 4
        np.testing.assert_allclose(values, [0.0, 0.0, -0.5, 0.0, 0.0, 0.0], atol=1e-15)
        assert evaluate_expr(output.cost, [-1.0, 0.5, 0.5, 1.0, 0.5, 0.0]) == pytest.approx(-1.0)

    def test_zero_weight_has_no_cost(self):
        spec = ImplicationSpec(consequence=(var(0),), mode=ImplicationMode.INDICATOR_BIG_M, big_m=5.0)
        assert heaviside_cost(spec, delta=var(2)) == (None, [])
