"""Expression graphs: values, exact derivatives, guards and interval bounds."""

import math

import numpy as np
import pytest

from trigopt.errors import DomainError
from trigopt.nlp.expr import (
    const,
    cos,
    dot,
    evaluate_expr,
    exp,
    interval_bounds,
    norm2,
    param,
    sin,
    sqrt,
    substitute,
    sumsq,
    tan,
    value_and_derivatives,
    var,
)


def _fd_gradient(expr, point, h=1e-6):
    point = np.asarray(point, dtype=float)
    grad = np.zeros(point.size)
    for i in range(point.size):
        step = np.zeros(point.size)
        step[i] = h
        grad[i] = (evaluate_expr(expr, point + step) - evaluate_expr(expr, point - step)) / (2 * h)
    return grad


def _fd_hessian(expr, point, h=1e-5):
    point = np.asarray(point, dtype=float)
    n = point.size
    hess = np.zeros((n, n))
    for i in range(n):
        step = np.zeros(n)
        step[i] = h
        _, g_plus, _ = value_and_derivatives(expr, point + step, degree=1)
        _, g_minus, _ = value_and_derivatives(expr, point - step, degree=1)
        hess[:, i] = (g_plus - g_minus) / (2 * h)
    return hess


def _mixed_expression():
    x, y, z = var(0), var(1), var(2)
    return sin(x) * y + exp(x * y) + sqrt(y) + x**3 / (1.0 + y**2) + cos(z) * tan(0.5 * x) + norm2([x, y, z])


class TestEvaluation:
    def test_polynomial_value(self):
        x, y = var(0), var(1)
        expr = 3.0 * x**2 - 2.0 * x * y + 1.0
        assert evaluate_expr(expr, [2.0, 5.0]) == pytest.approx(12.0 - 20.0 + 1.0)

    def test_numeric_inputs_fold(self):
        assert sin(0.0) == 0.0
        assert norm2([3.0, 4.0]) == pytest.approx(5.0)
        assert sumsq([1.0, 2.0, 2.0]) == pytest.approx(9.0)

    def test_parameters(self):
        expr = param(0) * var(0) + param(1)
        assert evaluate_expr(expr, [3.0], params=[2.0, -1.0]) == pytest.approx(5.0)

    def test_dot_product(self):
        expr = dot([var(0), var(1)], [2.0, 3.0])
        assert evaluate_expr(expr, [1.0, 1.0]) == pytest.approx(5.0)

    def test_variable_beyond_point_rejected(self):
        with pytest.raises(ValueError):
            evaluate_expr(var(3), [1.0, 2.0])


class TestDerivatives:
    """Exact first and second derivatives against central differences."""

    @pytest.mark.parametrize("point", [[0.3, 1.7, -0.4], [-0.8, 0.6, 1.1], [1.2, 2.5, 0.2]])
    def test_gradient_matches_finite_differences(self, point):
        expr = _mixed_expression()
        _, grad, _ = value_and_derivatives(expr, point)
        np.testing.assert_allclose(grad, _fd_gradient(expr, point), rtol=1e-6, atol=1e-6)

    @pytest.mark.parametrize("point", [[0.3, 1.7, -0.4], [-0.8, 0.6, 1.1]])
    def test_hessian_matches_finite_differences(self, point):
        expr = _mixed_expression()
        _, _, hess = value_and_derivatives(expr, point)
        np.testing.assert_allclose(hess, _fd_hessian(expr, point), rtol=1e-5, atol=1e-5)
        np.testing.assert_allclose(hess, hess.T, atol=1e-12)

    def test_random_quadratic_is_exact(self, rng):
        Q = rng.normal(size=(4, 4))
        Q = Q + Q.T
        c = rng.normal(size=4)
        xs = [var(i) for i in range(4)]
        expr = 0.5 * sum(Q[i, j] * xs[i] * xs[j] for i in range(4) for j in range(4)) + dot(xs, list(c))
        point = rng.normal(size=4)
        _, grad, hess = value_and_derivatives(expr, point)
        np.testing.assert_allclose(grad, Q @ point + c, atol=1e-12)
        np.testing.assert_allclose(hess, Q, atol=1e-12)

    def test_degree_zero_leaves_derivatives_empty(self):
        value, grad, hess = value_and_derivatives(var(0) ** 2, [3.0], degree=0)
        assert value == pytest.approx(9.0)
        assert not grad.any() and not hess.any()


ELEMENTARY_CASES = {
    "sin": lambda x, y: sin(x + 2.0 * y),
    "cos": lambda x, y: cos(x - y),
    "tan": lambda x, y: tan(0.3 * x + 0.2 * y),
    "exp": lambda x, y: exp(0.5 * x + y),
    "sqrt": lambda x, y: sqrt(x + y),
    "fractional_pow": lambda x, y: x**1.5 + y**2.5,
    "negative_pow": lambda x, y: (x + y) ** -0.5,
    "sumsq": lambda x, y: sumsq([x, y, x - y]),
    "product": lambda x, y: x * y,
    "division": lambda x, y: x / y,
    "norm2": lambda x, y: norm2([x, y]),
}


class TestElementaryKinds:
    """Each node kind on its own, checked at many random points of a positive box."""

    @pytest.mark.parametrize("kind", sorted(ELEMENTARY_CASES))
    def test_derivatives_at_random_points(self, kind, rng):
        expr = ELEMENTARY_CASES[kind](var(0), var(1))
        for point in rng.uniform(0.3, 2.0, size=(100, 2)):
            _, grad, hess = value_and_derivatives(expr, point)
            np.testing.assert_allclose(grad, _fd_gradient(expr, point), rtol=1e-6, atol=1e-6)
            np.testing.assert_allclose(hess, _fd_hessian(expr, point), rtol=1e-5, atol=1e-5)


class TestDomainGuards:
    def test_guarded_norm_at_origin(self):
        with pytest.raises(DomainError):
            evaluate_expr(norm2([var(0), var(1)]), [0.0, 0.0])

    def test_unguarded_norm_value_at_origin(self):
        assert evaluate_expr(norm2([var(0), var(1)], guard=False), [0.0, 0.0]) == 0.0

    def test_unguarded_norm_has_no_derivative_at_origin(self):
        with pytest.raises(DomainError):
            value_and_derivatives(norm2([var(0), var(1)], guard=False), [0.0, 0.0])

    def test_tan_pole(self):
        with pytest.raises(DomainError):
            evaluate_expr(tan(var(0)), [math.pi / 2])

    def test_sqrt_of_negative(self):
        with pytest.raises(DomainError):
            evaluate_expr(sqrt(var(0)), [-1.0])

    def test_numeric_norm_guard(self):
        with pytest.raises(DomainError):
            norm2([0.0, 0.0, 0.0])


class TestIntervalsAndSubstitution:
    def test_product_interval(self):
        lo, hi = interval_bounds(var(0) * var(1) + 1.0, [-1.0, 2.0], [3.0, 4.0])
        assert lo == pytest.approx(-3.0)
        assert hi == pytest.approx(13.0)

    def test_interval_encloses_samples(self, rng):
        expr = sin(var(0)) * var(1) - var(1) ** 2 + exp(0.1 * var(0))
        lower, upper = [-2.0, -1.0], [1.5, 3.0]
        lo, hi = interval_bounds(expr, lower, upper)
        for _ in range(200):
            point = rng.uniform(lower, upper)
            assert lo - 1e-12 <= evaluate_expr(expr, point) <= hi + 1e-12

    def test_unbounded_variable(self):
        lo, hi = interval_bounds(var(0) - 1.0, [-np.inf], [np.inf])
        assert lo == -np.inf and hi == np.inf

    def test_substitute_variable(self):
        (rewritten,) = substitute([var(0) ** 2 + var(1)], {0: 2.0 * var(1)})
        assert evaluate_expr(rewritten, [100.0, 3.0]) == pytest.approx(39.0)

    def test_substitute_keeps_unmapped(self):
        (rewritten,) = substitute([var(0) + var(1)], {1: const(5.0)})
        assert evaluate_expr(rewritten, [1.0, 0.0]) == pytest.approx(6.0)
