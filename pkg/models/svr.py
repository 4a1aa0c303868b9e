"""Epsilon-insensitive support vector regression.

The dual is solved with SMO over ``2n`` variables (``alpha`` then
``alpha*``) using second-order working-set selection. Stops when the
maximal violating pair gap drops below ``tol``.
"""

from __future__ import annotations

import logging

import numpy as np

from models.base import BaseModel

logger = logging.getLogger(__name__)

KERNELS = ("linear", "rbf")
_TAU = 1e-12


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def solve_dual(K: np.ndarray, y: np.ndarray, C: float, epsilon: float,
               tol: float = 1e-3, max_iter: int = 100_000):
    """Return ``(alpha, rho, n_iter, converged)`` for the SVR dual.

    ``alpha`` has length ``2n``; the regression function is
    ``sum((alpha[:n] - alpha[n:]) * K[:, x]) - rho``.
    """
    n = y.shape[0]
    s = np.concatenate([np.ones(n), -np.ones(n)])
    alpha = np.zeros(2 * n)
    G = np.concatenate([epsilon - y, epsilon + y])
    diag = np.diag(K)
    QD = np.concatenate([diag, diag])

    def q_row(t: int) -> np.ndarray:
        row = K[t % n]
        return s[t] * s * np.concatenate([row, row])

    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        up = ((s > 0) & (alpha < C)) | ((s < 0) & (alpha > 0))
        low = ((s > 0) & (alpha > 0)) | ((s < 0) & (alpha < C))
        minus_sG = -s * G
        if not up.any() or not low.any():
            converged = True
            break
        up_idx = np.flatnonzero(up)
        i = int(up_idx[np.argmax(minus_sG[up_idx])])
        gmax = minus_sG[i]
        if gmax - minus_sG[low].min() < tol:
            converged = True
            break

        Qi = q_row(i)
        b = gmax - minus_sG
        candidates = np.flatnonzero(low & (b > 0))
        if candidates.size == 0:
            converged = True
            break
        a = QD[i] + QD[candidates] - 2.0 * s[i] * s[candidates] * Qi[candidates]
        a = np.where(a > 0, a, _TAU)
        j = int(candidates[np.argmin(-(b[candidates] ** 2) / a)])
        Qj = q_row(j)

        ai, aj = alpha[i], alpha[j]
        if s[i] != s[j]:
            quad = QD[i] + QD[j] + 2.0 * Qi[j]
            delta = (-G[i] - G[j]) / (quad if quad > 0 else _TAU)
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Qi[j]
            delta = (G[i] - G[j]) / (quad if quad > 0 else _TAU)
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total

        d_i, d_j = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        G += Qi * d_i + Qj * d_j

    return alpha, _rho(alpha, G, s, C), n_iter, converged


def _rho(alpha, G, s, C) -> float:
    yG = s * G
    upper = alpha >= C
    lower = alpha <= 0
    free = ~upper & ~lower
    if free.any():
        return float(yG[free].mean())
    ub_mask = (upper & (s < 0)) | (lower & (s > 0))
    lb_mask = (upper & (s > 0)) | (lower & (s < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2)


class SVR(BaseModel):
    family = "svr"

    def __init__(self, C: float = 1.0, kernel: str = "rbf", epsilon: float = 0.01,
                 gamma: float | None = None, tol: float = 1e-3, max_iter: int = 100_000,
                 seed: int = 0):
        super().__init__(seed)
        if C <= 0:
            raise ValueError(f"C must be positive, got {C}")
        if epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {epsilon}")
        if kernel not in KERNELS:
            raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
        self.C = float(C)
        self.kernel = kernel
        self.epsilon = float(epsilon)
        self.gamma = gamma
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.gamma_ = 0.0
        self.support_ = np.zeros(0, dtype=int)
        self.support_vectors_ = np.zeros((0, 0))
        self.dual_coef_ = np.zeros(0)
        self.intercept_ = 0.0
        self.converged_ = False

    def get_params(self) -> dict:
        return {"C": self.C, "kernel": self.kernel, "epsilon": self.epsilon}

    def _fit(self, X, y):
        self.gamma_ = float(self.gamma) if self.gamma is not None else 1.0 / X.shape[1]
        K = kernel_matrix(X, X, self.kernel, self.gamma_)
        alpha, rho, n_iter, converged = solve_dual(K, y, self.C, self.epsilon, self.tol, self.max_iter)
        n = y.shape[0]
        beta = alpha[:n] - alpha[n:]
        self.support_ = np.flatnonzero(beta != 0)
        self.support_vectors_ = X[self.support_]
        self.dual_coef_ = beta[self.support_]
        self.intercept_ = -rho
        self.converged_ = converged
        if not converged:
            logger.warning("SVR (C=%s, kernel=%s) hit the iteration cap of %d.", self.C, self.kernel, self.max_iter)
        return converged, n_iter

    def _predict(self, X):
        if self.dual_coef_.size == 0:
            return np.full(X.shape[0], self.intercept_)
        K = kernel_matrix(X, self.support_vectors_, self.kernel, self.gamma_)
        return K @ self.dual_coef_ + self.intercept_

    def dual_coefficients(self, n_samples: int) -> np.ndarray:
        """Dense ``alpha - alpha*`` over the training set."""
        beta = np.zeros(n_samples)
        beta[self.support_] = self.dual_coef_
        return beta

    def dual_objective(self, X, y) -> float:
        """Dual objective (minimization form) at the fitted coefficients."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        beta = self.dual_coefficients(y.shape[0])
        K = kernel_matrix(X, X, self.kernel, self.gamma_)
        return float(0.5 * beta @ K @ beta + self.epsilon * np.abs(beta).sum() - y @ beta)

    def get_state(self) -> dict:
        return {
            "gamma": self.gamma_,
            "support": self.support_.tolist(),
            "support_vectors": self.support_vectors_.tolist(),
            "dual_coef": self.dual_coef_.tolist(),
            "intercept": self.intercept_,
            "converged": self.converged_,
        }

    def set_state(self, state: dict) -> None:
        self.gamma_ = float(state["gamma"])
        self.support_ = np.asarray(state["support"], dtype=int)
        self.dual_coef_ = np.asarray(state["dual_coef"], dtype=float)
        vectors = np.asarray(state["support_vectors"], dtype=float)
        self.support_vectors_ = vectors if vectors.size else np.zeros((0, 0))
        self.intercept_ = float(state["intercept"])
        self.converged_ = bool(state.get("converged", True))


def fit_svr(X, y, C: float = 1.0, kernel: str = "rbf", epsilon: float = 0.01, seed: int = 0) -> SVR:
    return SVR(C=C, kernel=kernel, epsilon=epsilon, seed=seed).fit(X, y)
