"""NLP containers: batched blocks, evaluation, sparse derivatives and relaxation."""

import dataclasses

import numpy as np
import pytest

from trigopt.errors import DimensionError
from trigopt.nlp.expr import sin, var
from trigopt.nlp.problem import (
    ExprBlock,
    NlpProblem,
    constraint_violation,
    derivatives,
    evaluate,
    objective_terms,
)


@pytest.fixture
def small_problem():
    x, y = var(0), var(1)
    return NlpProblem.from_exprs(
        n=2,
        objective=x**2 + 3.0 * y,
        equalities=[x + y - 1.0],
        inequalities=[x * y - 2.0, -x],
        lb=[-10.0, -10.0],
        ub=[10.0, 10.0],
        relaxable=[True, False],
    )


class TestConstruction:
    def test_sizes(self, small_problem):
        assert small_problem.n == 2
        assert small_problem.m_eq == 1
        assert small_problem.m_ineq == 2
        assert small_problem.n_relaxable == 1

    def test_inverted_bounds_rejected(self):
        with pytest.raises(ValueError):
            NlpProblem.from_exprs(n=1, objective=var(0), lb=[1.0], ub=[0.0])

    def test_block_outside_variables_rejected(self):
        with pytest.raises(DimensionError):
            NlpProblem.from_exprs(n=1, objective=var(0) + var(1))

    def test_block_template_needs_mapped_variables(self):
        with pytest.raises(DimensionError):
            ExprBlock(outputs=(var(0) * var(2),), var_index=np.array([[0, 1]]))

    def test_relaxation_must_be_non_negative(self):
        with pytest.raises(ValueError):
            NlpProblem(n=1, lb=[0.0], ub=[1.0], relaxation=-1.0)


class TestEvaluation:
    def test_values(self, small_problem):
        f, g, h = evaluate(small_problem, [2.0, 0.5])
        assert f == pytest.approx(5.5)
        np.testing.assert_allclose(g, [1.5])
        np.testing.assert_allclose(h, [-1.0, -2.0])

    def test_relaxation_shifts_tagged_rows_only(self, small_problem):
        relaxed = dataclasses.replace(small_problem, relaxation=0.25)
        _, _, h = evaluate(relaxed, [2.0, 0.5])
        np.testing.assert_allclose(h, [-1.25, -2.0])

    def test_wrong_point_size(self, small_problem):
        with pytest.raises(DimensionError):
            evaluate(small_problem, [1.0, 2.0, 3.0])

    def test_constraint_violation(self, small_problem):
        # equality off by 1.5, bound exceeded by 2
        assert constraint_violation(small_problem, [2.0, 0.5]) == pytest.approx(1.5)
        assert constraint_violation(small_problem, [12.0, -11.0]) == pytest.approx(2.0)

    def test_objective_terms_by_label(self):
        block = ExprBlock(outputs=(var(0) ** 2,), var_index=np.array([[0], [1], [2]]), label="effort")
        problem = NlpProblem(n=3, lb=np.full(3, -1.0), ub=np.full(3, 1.0), objective=(block,))
        assert objective_terms(problem, [0.1, 0.2, 0.3]) == {"effort": pytest.approx(0.14)}


class TestDerivatives:
    def test_gradient_and_jacobians(self, small_problem):
        d = derivatives(small_problem, [2.0, 0.5])
        np.testing.assert_allclose(d.gradient, [4.0, 3.0])
        np.testing.assert_allclose(d.jac_eq.toarray(), [[1.0, 1.0]])
        np.testing.assert_allclose(d.jac_ineq.toarray(), [[0.5, 2.0], [-1.0, 0.0]])

    def test_lagrangian_hessian(self, small_problem):
        d = derivatives(small_problem, [2.0, 0.5], y_eq=[7.0], y_ineq=[3.0, 1.0], objective_factor=0.5)
        # 0.5 * diag(2, 0) + 3 * [[0, 1], [1, 0]]
        np.testing.assert_allclose(d.hessian.toarray(), [[1.0, 3.0], [3.0, 0.0]])

    def test_batched_block_matches_unbatched(self, rng):
        template = (sin(var(0)) * var(1),)
        index = np.array([[0, 1], [1, 2], [2, 3]])
        block = ExprBlock(outputs=template, var_index=index, row_index=np.arange(3).reshape(3, 1), label="ineq")
        batched = NlpProblem(n=4, lb=np.full(4, -5.0), ub=np.full(4, 5.0), inequalities=(block,), m_ineq=3)
        single = NlpProblem.from_exprs(
            n=4,
            inequalities=[sin(var(i)) * var(i + 1) for i in range(3)],
            lb=np.full(4, -5.0),
            ub=np.full(4, 5.0),
        )
        point = rng.uniform(-2.0, 2.0, size=4)
        multipliers = rng.uniform(0.0, 1.0, size=3)
        d_batched = derivatives(batched, point, y_ineq=multipliers)
        d_single = derivatives(single, point, y_ineq=multipliers)
        np.testing.assert_allclose(evaluate(batched, point)[2], evaluate(single, point)[2])
        np.testing.assert_allclose(d_batched.jac_ineq.toarray(), d_single.jac_ineq.toarray())
        np.testing.assert_allclose(d_batched.hessian.toarray(), d_single.hessian.toarray())

    def test_declared_hessian_structure_covers_values(self, small_problem):
        rows, cols = small_problem.hessian_structure
        declared = set(zip(rows.tolist(), cols.tolist()))
        d = derivatives(small_problem, [1.3, -0.7], y_eq=[1.0], y_ineq=[1.0, 1.0])
        dense = d.hessian.toarray()
        for i, j in zip(*np.nonzero(dense)):
            assert (int(i), int(j)) in declared

    def test_multiplier_size_mismatch(self, small_problem):
        with pytest.raises(DimensionError):
            derivatives(small_problem, [1.0, 1.0], y_ineq=[1.0])
