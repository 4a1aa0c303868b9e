"""Fully connected ReLU network trained with Adam on squared error.

Early stopping holds out the last ``validation_fraction`` of the rows (the
samples are time ordered) and restores the weights with the best validation
MSE once ``n_iter_no_change`` epochs pass without an improvement of ``tol``.
"""

from __future__ import annotations

import logging

import numpy as np

from models.base import BaseModel, FitError

logger = logging.getLogger(__name__)


class MLPRegressor(BaseModel):
    family = "mlp"

    def __init__(
        self,
        hidden_layer_sizes=(100,),
        learning_rate_init: float = 0.001,
        max_iter: int = 200,
        early_stopping: bool = True,
        batch_size: int = 32,
        validation_fraction: float = 0.1,
        n_iter_no_change: int = 10,
        tol: float = 1e-4,
        alpha: float = 1e-4,
        beta_1: float = 0.9,
        beta_2: float = 0.999,
        epsilon: float = 1e-8,
        seed: int = 0,
    ):
        super().__init__(seed)
        sizes = tuple(int(h) for h in hidden_layer_sizes)
        if any(h < 1 for h in sizes):
            raise ValueError(f"hidden layer widths must be >= 1, got {sizes}")
        if learning_rate_init <= 0:
            raise ValueError(f"learning_rate_init must be positive, got {learning_rate_init}")
        self.hidden_layer_sizes = sizes
        self.learning_rate_init = float(learning_rate_init)
        self.max_iter = int(max_iter)
        self.early_stopping = bool(early_stopping)
        self.batch_size = int(batch_size)
        self.validation_fraction = float(validation_fraction)
        self.n_iter_no_change = int(n_iter_no_change)
        self.tol = float(tol)
        self.alpha = float(alpha)
        self.beta_1 = beta_1
        self.beta_2 = beta_2
        self.epsilon = epsilon
        self.coefs_: list[np.ndarray] = []
        self.intercepts_: list[np.ndarray] = []
        self.loss_curve_: list[float] = []
        self.validation_scores_: list[float] = []

    def get_params(self) -> dict:
        return {
            "hidden_layer_sizes": list(self.hidden_layer_sizes),
            "learning_rate_init": self.learning_rate_init,
            "max_iter": self.max_iter,
            "early_stopping": self.early_stopping,
        }

    def initialize(self, n_features: int, rng: np.random.Generator | None = None) -> None:
        """Glorot-uniform weights and biases for every layer."""
        rng = rng or np.random.default_rng(self.seed)
        sizes = [n_features, *self.hidden_layer_sizes, 1]
        self.coefs_, self.intercepts_ = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.coefs_.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.intercepts_.append(rng.uniform(-bound, bound, fan_out))

    def _forward(self, X: np.ndarray) -> list[np.ndarray]:
        activations = [X]
        last = len(self.coefs_) - 1
        for i, (W, b) in enumerate(zip(self.coefs_, self.intercepts_)):
            out = activations[-1] @ W + b
            activations.append(out if i == last else np.maximum(out, 0.0))
        return activations

    def loss_and_gradients(self, X, y) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """Half-MSE plus L2 penalty, with gradients for coefs and intercepts."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = X.shape[0]
        activations = self._forward(X)
        diff = activations[-1][:, 0] - y
        penalty = sum(float((W * W).sum()) for W in self.coefs_)
        loss = 0.5 * float(diff @ diff) / n + 0.5 * self.alpha * penalty / n

        coef_grads = [np.empty_like(W) for W in self.coefs_]
        intercept_grads = [np.empty_like(b) for b in self.intercepts_]
        delta = diff[:, None] / n
        for layer in range(len(self.coefs_) - 1, -1, -1):
            coef_grads[layer] = activations[layer].T @ delta + self.alpha * self.coefs_[layer] / n
            intercept_grads[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.coefs_[layer].T) * (activations[layer] > 0)
        return loss, coef_grads, intercept_grads

    def _fit(self, X, y):
        rng = np.random.default_rng(self.seed)
        self.initialize(X.shape[1], rng)
        n = X.shape[0]
        n_val = max(1, int(self.validation_fraction * n)) if self.early_stopping else 0
        if self.early_stopping and n - n_val < 1:
            raise FitError(f"{n} samples leave nothing to train on after the validation split")
        X_train, y_train = X[:n - n_val], y[:n - n_val]
        X_val, y_val = X[n - n_val:], y[n - n_val:]

        params = self.coefs_ + self.intercepts_
        first_moment = [np.zeros_like(p) for p in params]
        second_moment = [np.zeros_like(p) for p in params]
        step = 0
        best_score = np.inf
        best_params: list[np.ndarray] | None = None
        no_improvement = 0
        self.loss_curve_, self.validation_scores_ = [], []
        n_train = X_train.shape[0]

        epoch = 0
        stopped = False
        for epoch in range(1, self.max_iter + 1):
            order = rng.permutation(n_train)
            epoch_loss = 0.0
            for start in range(0, n_train, self.batch_size):
                rows = order[start:start + self.batch_size]
                loss, coef_grads, intercept_grads = self.loss_and_gradients(X_train[rows], y_train[rows])
                if not np.isfinite(loss):
                    raise FitError(f"mlp loss became non-finite at epoch {epoch} (lr={self.learning_rate_init})")
                epoch_loss += loss * rows.size
                step += 1
                lr = (self.learning_rate_init * np.sqrt(1 - self.beta_2 ** step)
                      / (1 - self.beta_1 ** step))
                for p, g, m, v in zip(params, coef_grads + intercept_grads, first_moment, second_moment):
                    m *= self.beta_1
                    m += (1 - self.beta_1) * g
                    v *= self.beta_2
                    v += (1 - self.beta_2) * g * g
                    p -= lr * m / (np.sqrt(v) + self.epsilon)
            self.loss_curve_.append(epoch_loss / n_train)

            if self.early_stopping:
                score = float(np.mean((self._forward(X_val)[-1][:, 0] - y_val) ** 2))
                self.validation_scores_.append(score)
            else:
                score = self.loss_curve_[-1]
            if score < best_score - self.tol:
                no_improvement = 0
            else:
                no_improvement += 1
            if score < best_score:
                best_score = score
                if self.early_stopping:
                    best_params = [p.copy() for p in params]
            if no_improvement >= self.n_iter_no_change:
                stopped = True
                break

        if best_params is not None:
            for p, best in zip(params, best_params):
                p[...] = best
        if not stopped:
            logger.info("mlp %s reached max_iter=%d without early stop.", self.hidden_layer_sizes, self.max_iter)
        return stopped, epoch

    def _predict(self, X):
        return self._forward(X)[-1][:, 0]

    def get_state(self) -> dict:
        return {
            "coefs": [W.tolist() for W in self.coefs_],
            "intercepts": [b.tolist() for b in self.intercepts_],
            "loss_curve": self.loss_curve_,
        }

    def set_state(self, state: dict) -> None:
        self.coefs_ = [np.asarray(W, dtype=float) for W in state["coefs"]]
        self.intercepts_ = [np.asarray(b, dtype=float) for b in state["intercepts"]]
        self.loss_curve_ = list(state.get("loss_curve", []))


def fit_mlp(X, y, hidden_layer_sizes=(100,), learning_rate_init: float = 0.001,
            max_iter: int = 200, seed: int = 0, early_stopping: bool = True) -> MLPRegressor:
    return MLPRegressor(hidden_layer_sizes, learning_rate_init, max_iter, early_stopping, seed=seed).fit(X, y)
