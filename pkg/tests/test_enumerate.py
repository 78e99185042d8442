"""Exhaustive enumeration reference solver."""

import numpy as np
import pytest

from trigopt.errors import ConfigError
from trigopt.nlp.expr import var
from trigopt.nlp.problem import NlpProblem
from trigopt.solvers.bnb import MinlpStatus
from trigopt.solvers.enumerate import MAX_ENUMERATED_BINARIES, enumerate_exhaustive


def test_toy_optimum(toy_minlp):
    problem, binaries = toy_minlp
    result = enumerate_exhaustive(problem, np.array([1.0, 0.5]), integer_indices=binaries)
    assert result.status == MinlpStatus.OPTIMAL_WITHIN_TREE
    assert result.objective == pytest.approx(-1.0, abs=1e-6)
    np.testing.assert_array_equal(result.assignment, [1.0])
    assert result.node_count == result.nlp_solves == 2


def test_records_every_assignment(toy_minlp):
    problem, binaries = toy_minlp
    result = enumerate_exhaustive(problem, np.array([1.0, 0.5]), integer_indices=binaries)
    assert [record["assignment"] for record in result.node_log] == [[0], [1]]
    assert result.node_log[0]["objective"] == pytest.approx(0.0, abs=1e-6)
    assert set(result.node_log[0]) == {"seq", "assignment", "status", "objective"}


def test_infeasible_assignments_skipped():
    x, delta = var(0), var(1)
    # delta = 1 forces x <= -1 while x >= 0 always holds
    problem = NlpProblem.from_exprs(
        n=2,
        objective=x**2 - 5.0 * delta,
        inequalities=[x + 1.0 - 10.0 * (1.0 - delta), -x],
        lb=[-5.0, 0.0],
        ub=[5.0, 1.0],
    )
    result = enumerate_exhaustive(problem, np.array([1.0, 0.5]), integer_indices=[1])
    np.testing.assert_array_equal(result.assignment, [0.0])
    assert result.objective == pytest.approx(0.0, abs=1e-6)
    assert result.node_log[1]["objective"] is None


def test_binary_cap(toy_minlp):
    problem, _ = toy_minlp
    with pytest.raises(ConfigError):
        enumerate_exhaustive(problem, np.zeros(2), integer_indices=list(range(MAX_ENUMERATED_BINARIES + 1)))
    with pytest.raises(ConfigError):
        enumerate_exhaustive(problem, np.zeros(2), integer_indices=[1], cap=0)
