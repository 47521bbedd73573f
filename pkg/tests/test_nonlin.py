"""The shifted sigmoid rho(x) = sigmoid(4x - 2) and its exact derivatives."""

import numpy as np
import pytest

from hopeq.nonlin import identity, lagrangian_sum, rho_prime_vec, rho_vec, shifted_sigmoid

NL = shifted_sigmoid()


def central_diff(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2.0 * h)


def test_midpoint_values():
    # rho(1/2) = sigmoid(0) = 1/2 and the slope there is exactly 4 * 1/4
    assert NL.evaluate(np.array(0.5)) == pytest.approx(0.5, abs=1e-15)
    assert NL.derivative(np.array(0.5)) == pytest.approx(1.0, abs=1e-15)
    assert NL.second_derivative(np.array(0.5)) == pytest.approx(0.0, abs=1e-15)


def test_values_at_zero():
    assert NL.evaluate(np.array(0.0)) == pytest.approx(1.0 / (1.0 + np.exp(2.0)), abs=1e-15)
    assert NL.derivative(np.array(0.0)) == pytest.approx(0.41997434161402597, abs=1e-12)
    assert NL.antiderivative(np.array(0.0)) == pytest.approx(0.25 * np.log1p(np.exp(-2.0)), abs=1e-15)


def test_derivative_matches_finite_differences():
    grid = np.linspace(-4.0, 4.0, 81)
    fd = central_diff(NL.evaluate, grid)
    np.testing.assert_allclose(NL.derivative(grid), fd, atol=1e-8)


def test_second_derivative_matches_finite_differences():
    grid = np.linspace(-4.0, 4.0, 81)
    fd = central_diff(NL.derivative, grid)
    np.testing.assert_allclose(NL.second_derivative(grid), fd, atol=1e-7)


def test_antiderivative_matches_finite_differences():
    grid = np.linspace(-4.0, 4.0, 81)
    fd = central_diff(NL.antiderivative, grid)
    np.testing.assert_allclose(NL.evaluate(grid), fd, atol=1e-8)


def test_saturated_tails():
    # the product form sigmoid(z) sigmoid(-z) keeps the slope strictly
    # positive where 1 - sigmoid would round to zero
    far = np.array([-60.0, -20.0, 20.0, 60.0])
    assert np.all(NL.derivative(far) > 0.0)
    assert np.all(np.isfinite(NL.second_derivative(far)))
    # softplus form: the antiderivative grows linearly, no overflow
    assert NL.antiderivative(np.array(100.0)) == pytest.approx(99.5, abs=1e-12)
    assert NL.antiderivative(np.array(-100.0)) == pytest.approx(0.0, abs=1e-12)


def test_bounds_and_monotonicity():
    # strictly inside (0, 1) wherever float64 can represent the gap; the
    # upper tail rounds to exactly 1.0 past s ~ 9.7
    grid = np.linspace(-30.0, 30.0, 2001)
    vals = NL.evaluate(grid)
    assert np.all((vals >= 0.0) & (vals <= 1.0))
    inner = NL.evaluate(np.linspace(-7.0, 7.0, 2001))
    assert np.all((inner > 0.0) & (inner < 1.0))
    assert np.all(np.diff(inner) > 0.0)


def test_identity_record():
    nl = identity()
    grid = np.linspace(-3.0, 3.0, 13)
    np.testing.assert_array_equal(nl.evaluate(grid), grid)
    np.testing.assert_array_equal(nl.derivative(grid), np.ones_like(grid))
    np.testing.assert_array_equal(nl.second_derivative(grid), np.zeros_like(grid))
    np.testing.assert_allclose(nl.antiderivative(grid), 0.5 * grid**2, atol=1e-15)


def test_vector_helpers_reject_nonfinite():
    s = np.array([0.0, 1.0, np.nan, 2.0])
    with pytest.raises(ValueError, match="flat index 2"):
        rho_vec(s, NL)
    with pytest.raises(ValueError, match="flat index 2"):
        rho_prime_vec(s, NL)


def test_lagrangian_sum():
    s = np.array([-1.0, 0.0, 0.5, 2.0])
    assert lagrangian_sum(s, NL) == pytest.approx(float(np.sum(NL.antiderivative(s))), abs=1e-15)
