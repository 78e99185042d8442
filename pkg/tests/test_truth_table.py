"""Sign tables of the implication, the bare product and every compiled encoding."""

import pytest

from trigopt.errors import ConfigError
from trigopt.logic.implication import ImplicationMode
from trigopt.logic.truth_table import check_truth_table, truth_row, truth_table

ENCODINGS = [mode.value for mode in ImplicationMode]
ONLY_ACTIVE_VIOLATION = {(0, 0): True, (0, 1): True, (1, 0): False, (1, 1): True}


class TestReferenceForms:
    def test_implication(self):
        assert truth_table("implication") == ONLY_ACTIVE_VIOLATION

    def test_bare_product_also_rejects_inactive_satisfied(self):
        """H < 0 with G < 0 is a legitimate state the product wrongly forbids."""
        assert truth_table("product") == {(0, 0): True, (0, 1): False, (1, 0): False, (1, 1): True}

    def test_boundary_trigger_counts_as_active(self):
        assert not check_truth_table("0", "+", "implication")
        assert check_truth_table("0", "-", "implication")


class TestEncodings:
    @pytest.mark.parametrize("form", ENCODINGS)
    def test_matches_implication_on_strict_rows(self, form):
        assert truth_table(form) == ONLY_ACTIVE_VIOLATION

    @pytest.mark.parametrize("form", ENCODINGS)
    def test_consequence_at_zero_always_admitted(self, form):
        assert check_truth_table("+", "0", form)
        assert check_truth_table("-", "0", form)

    @pytest.mark.parametrize("form", ["indicator_bigM", "indicator_vanishing"])
    def test_indicator_at_zero_trigger_is_active(self, form):
        assert not check_truth_table("0", "+", form)

    @pytest.mark.parametrize("form", ["trigger_eps_bigM", "trigger_mpcc"])
    def test_trigger_encodings_admit_zero_trigger_inactive(self, form):
        """H = 0 is resolved to delta = 0, so a violated consequence is allowed there."""
        assert check_truth_table("0", "+", form)


class TestInputs:
    def test_truth_row(self):
        assert truth_row(1, 0) == ("+", "+")
        assert truth_row(0, 1) == ("-", "-")

    def test_truth_row_rejects_non_binary(self):
        with pytest.raises(ConfigError):
            truth_row(2, 0)

    def test_unknown_sign(self):
        with pytest.raises(ConfigError):
            check_truth_table("?", "+", "implication")

    def test_unknown_form(self):
        with pytest.raises(ConfigError):
            check_truth_table("+", "+", "disjunction")
