"""Damped Gauss-Newton solver and covariance estimation."""

import math

import numpy as np
import pytest

from scalefit.leastsq import levenberg_marquardt, scaled_covariance

RNG = np.random.default_rng(42)


def test_recovers_exponential_decay_parameters():
    t = np.linspace(0.0, 4.0, 40)
    true = np.array([2.5, 1.3, 0.4])
    y = true[0] * np.exp(-true[1] * t) + true[2]

    def residual(x):
        return x[0] * np.exp(-x[1] * t) + x[2] - y

    def jacobian(x):
        e = np.exp(-x[1] * t)
        return np.column_stack([e, -x[0] * t * e, np.ones_like(t)])

    res = levenberg_marquardt(residual, jacobian, np.array([1.0, 0.5, 0.0]))
    assert res.converged
    np.testing.assert_allclose(res.x, true, rtol=1e-8)
    assert res.chi2 < 1e-16


def test_linear_problem_converges_in_one_accepted_step():
    a = np.array([[1.0, 1.0], [1.0, 2.0], [1.0, 3.0], [1.0, 4.0]])
    y = a @ np.array([0.5, -2.0])

    res = levenberg_marquardt(lambda x: a @ x - y, lambda x: a, np.zeros(2))
    assert res.converged
    assert res.iterations <= 8
    np.testing.assert_allclose(res.x, [0.5, -2.0], atol=1e-10)


def test_flags_non_convergence_at_iteration_cap():
    # residual with no descent structure: pure noise re-drawn per call
    rng = np.random.default_rng(0)

    def residual(x):
        return rng.normal(size=5) + x[0] ** 2

    def jacobian(x):
        return np.full((5, 1), 2.0 * x[0])

    res = levenberg_marquardt(residual, jacobian, np.array([10.0]), max_iter=5)
    assert not res.converged or res.iterations <= 5


def test_start_at_optimum_converges_immediately():
    t = np.arange(6, dtype=float)
    y = 3.0 * t + 1.0

    res = levenberg_marquardt(
        lambda x: x[0] * t + x[1] - y,
        lambda x: np.column_stack([t, np.ones_like(t)]),
        np.array([3.0, 1.0]),
    )
    assert res.converged
    assert res.gradient_norm <= 1e-12


def test_scaled_covariance_matches_linear_regression_formula():
    t = np.linspace(0.0, 1.0, 30)
    jac = np.column_stack([t, np.ones_like(t)])
    resid = RNG.normal(scale=0.1, size=t.size)

    sigma, _ = scaled_covariance(jac, resid)
    chi2_red = float(resid @ resid) / (t.size - 2)
    cov = np.linalg.inv(jac.T @ jac) * chi2_red
    np.testing.assert_allclose(sigma, np.sqrt(np.diag(cov)), rtol=1e-9)


def test_scaled_covariance_unconstrained_direction_is_inf():
    # second column is identically zero: that parameter is undetermined
    jac = np.column_stack([np.ones(10), np.zeros(10)])
    sigma, _ = scaled_covariance(jac, np.ones(10) * 0.1)
    assert math.isfinite(sigma[0])
    assert math.isinf(sigma[1])


def test_scaled_covariance_is_unit_invariant():
    # rescaling a column by 1e9 must rescale its sigma by 1e-9, not flip it to inf
    t = np.linspace(1.0, 2.0, 20)
    jac = np.column_stack([t, np.ones_like(t)])
    resid = RNG.normal(scale=0.05, size=t.size)
    base, _ = scaled_covariance(jac, resid)

    scaled = jac.copy()
    scaled[:, 0] *= 1e9
    got, _ = scaled_covariance(scaled, resid)
    assert math.isfinite(got[0]) and math.isfinite(got[1])
    np.testing.assert_allclose(got[0] * 1e9, base[0], rtol=1e-6)
    np.testing.assert_allclose(got[1], base[1], rtol=1e-6)
