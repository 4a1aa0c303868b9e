"""Tests for the SMO dual solver and the SVR model."""

import logging

import numpy as np
import pytest

from models.svr import SVR, fit_svr, kernel_matrix, solve_dual


def _problem(n=20, m=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, m))
    y = 0.5 + 0.4 * np.sin(X.sum(axis=1) * 2.0) + 0.05 * rng.normal(size=n)
    return X, y


def _dual_value(alpha, K, y, epsilon):
    Q = np.block([[K, -K], [-K, K]])
    p = np.concatenate([epsilon - y, epsilon + y])
    return 0.5 * alpha @ Q @ alpha + p @ alpha


def _project(v, s, C, steps=50):
    """Euclidean projection onto {0 <= a <= C, s @ a = 0} by bisection on the multiplier."""
    lo, hi = -np.abs(v).max() - C - 1.0, np.abs(v).max() + C + 1.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if s @ np.clip(v - mid * s, 0.0, C) > 0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi) * s, 0.0, C)


def _side_residual(residual, beta):
    return residual if beta > 0 else -residual


def _fista_dual(K, y, C, epsilon, iterations=10_000):
    n = y.shape[0]
    s = np.concatenate([np.ones(n), -np.ones(n)])
    Q = np.block([[K, -K], [-K, K]])
    p = np.concatenate([epsilon - y, epsilon + y])
    step = 1.0 / np.linalg.eigvalsh(Q).max()
    a = z = np.zeros(2 * n)
    t = 1.0
    for _ in range(iterations):
        a_next = _project(z - step * (Q @ z + p), s, C)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = a_next + ((t - 1.0) / t_next) * (a_next - a)
        a, t = a_next, t_next
    return a


class TestKernel:
    def test_rbf_diagonal_is_one(self):
        X, _ = _problem()
        K = kernel_matrix(X, X, "rbf", 0.5)
        np.testing.assert_allclose(np.diag(K), 1.0)
        np.testing.assert_allclose(K, K.T)

    def test_rbf_value(self):
        A = np.array([[0.0, 0.0]])
        B = np.array([[1.0, 2.0]])
        assert kernel_matrix(A, B, "rbf", 0.5)[0, 0] == pytest.approx(np.exp(-2.5))

    def test_linear_is_gram(self):
        X, _ = _problem()
        np.testing.assert_allclose(kernel_matrix(X, X, "linear", 0.0), X @ X.T)


class TestSolveDual:
    def test_targets_inside_tube_need_no_support_vectors(self):
        X, _ = _problem()
        y = np.full(X.shape[0], 0.5) + np.linspace(0, 0.015, X.shape[0])
        alpha, rho, _, converged = solve_dual(kernel_matrix(X, X, "rbf", 1.0), y, 1.0, 0.01)
        assert converged
        assert not alpha.any()
        assert y.max() - 0.01 - 1e-12 <= -rho <= y.min() + 0.01 + 1e-12

    @pytest.mark.parametrize("kernel", ["rbf", "linear"])
    def test_matches_projected_gradient_oracle(self, kernel):
        X, y = _problem()
        K = kernel_matrix(X, X, kernel, 1.0 / 3)
        C, epsilon = 0.1, 0.01
        alpha, _, _, converged = solve_dual(K, y, C, epsilon, tol=1e-8)
        assert converged
        smo = _dual_value(alpha, K, y, epsilon)
        oracle = _dual_value(_fista_dual(K, y, C, epsilon), K, y, epsilon)
        assert smo <= oracle + 1e-9
        assert oracle - smo < 1e-6

    def test_feasible(self):
        X, y = _problem()
        C = 0.5
        alpha, *_ = solve_dual(kernel_matrix(X, X, "rbf", 1.0), y, C, 0.01)
        n = y.shape[0]
        assert (alpha >= 0).all() and (alpha <= C).all()
        assert abs(alpha[:n].sum() - alpha[n:].sum()) < 1e-10

    def test_kkt_conditions(self):
        X, y = _problem(n=30, seed=4)
        C, epsilon, tol = 1.0, 0.01, 1e-5
        K = kernel_matrix(X, X, "rbf", 1.0)
        alpha, rho, _, _ = solve_dual(K, y, C, epsilon, tol=1e-7)
        n = y.shape[0]
        beta = alpha[:n] - alpha[n:]
        residual = y - (K @ beta - rho)
        for r, b in zip(residual, beta):
            if 0 < abs(b) < C:
                assert abs(_side_residual(r, b) - epsilon) <= tol
            elif b == 0:
                assert abs(r) <= epsilon + tol
            else:
                assert _side_residual(r, b) >= epsilon - tol

    def test_iteration_cap(self):
        X, y = _problem()
        _, _, n_iter, converged = solve_dual(kernel_matrix(X, X, "rbf", 1.0), y, 1.0, 0.01, max_iter=2)
        assert n_iter == 2
        assert not converged


class TestSVR:
    def test_default_gamma(self):
        X, y = _problem(m=4)
        assert SVR().fit(X, y).gamma_ == pytest.approx(0.25)

    def test_linear_fit_inside_tube(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(0, 1, (40, 2))
        y = 0.3 * X[:, 0] + 0.2 * X[:, 1] + 0.1
        model = fit_svr(X, y, C=10.0, kernel="linear", epsilon=0.01)
        assert np.abs(model.predict(X) - y).max() <= 0.01 + 1e-3

    def test_duplicated_rows_with_half_c(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(0, 1, (25, 2))
        y = 0.6 * X[:, 0] - 0.2 * X[:, 1] + 0.1 * rng.normal(size=25)
        single = SVR(C=1.0, kernel="linear", epsilon=0.01, tol=1e-8).fit(X, y)
        doubled = SVR(C=0.5, kernel="linear", epsilon=0.01, tol=1e-8).fit(np.vstack([X, X]), np.concatenate([y, y]))
        w_single = single.dual_coef_ @ single.support_vectors_
        w_doubled = doubled.dual_coef_ @ doubled.support_vectors_
        np.testing.assert_allclose(w_single, w_doubled, atol=1e-5)

    def test_dual_coefficients_bounded(self):
        X, y = _problem()
        model = SVR(C=0.1, kernel="rbf").fit(X, y)
        beta = model.dual_coefficients(X.shape[0])
        assert np.abs(beta).max() <= 0.1 + 1e-12
        assert abs(beta.sum()) < 1e-10
        assert model.dual_objective(X, y) < 0

    def test_non_convergence_is_flagged(self, caplog):
        X, y = _problem()
        with caplog.at_level(logging.WARNING, logger="models.svr"):
            model = SVR(max_iter=2).fit(X, y)
        assert model.info.converged is False
        assert model.converged_ is False
        assert "iteration cap" in caplog.text

    @pytest.mark.parametrize("kwargs", [{"C": 0}, {"epsilon": -1}, {"kernel": "poly"}])
    def test_invalid_arguments(self, kwargs):
        with pytest.raises(ValueError):
            SVR(**kwargs)

    def test_params_in_grid_vocabulary(self):
        assert SVR(C=0.01, kernel="linear").get_params() == {"C": 0.01, "kernel": "linear", "epsilon": 0.01}
