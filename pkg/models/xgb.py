"""Second-order gradient boosting for squared loss (g = pred - y, h = 1).

Boosters:
  gbtree    regularized trees, leaf weight -G/(H+lambda)
  dart      gbtree with per-round tree dropout and "tree" normalization
  gblinear  L2-regularized linear model updated by coordinate descent
"""

from __future__ import annotations

import numpy as np

from models.base import BaseModel
from models.trees import RegressionTree, SplitCriterion

BOOSTERS = ("gbtree", "gblinear", "dart")
_MIN_HESSIAN = 1e-5


def leaf_weight(grad_sum: float, hess_sum: float, reg_lambda: float, max_delta_step: float = 0.0) -> float:
    weight = -grad_sum / (hess_sum + reg_lambda)
    if max_delta_step > 0 and abs(weight) > max_delta_step:
        weight = float(np.copysign(max_delta_step, weight))
    return float(weight)


def split_gain(grad_left, hess_left, grad_right, hess_right, reg_lambda):
    grad, hess = grad_left + grad_right, hess_left + hess_right
    return 0.5 * (grad_left ** 2 / (hess_left + reg_lambda)
                  + grad_right ** 2 / (hess_right + reg_lambda)
                  - grad ** 2 / (hess + reg_lambda))


class SecondOrderGain(SplitCriterion):
    """Split gain on gradient sums; counts stand in for hessian sums since h = 1."""

    name = "second_order_gain"

    def __init__(self, reg_lambda: float, max_delta_step: float = 0.0):
        self.reg_lambda = reg_lambda
        self.max_delta_step = max_delta_step

    def node_value(self, y):
        return leaf_weight(float(y.sum()), float(y.shape[0]), self.reg_lambda, self.max_delta_step)

    def improvement(self, left_sum, left_count, total_sum, total_count):
        return split_gain(left_sum, left_count, total_sum - left_sum, total_count - left_count, self.reg_lambda)


class XGBVariant(BaseModel):
    family = "xgb_variant"
    param_aliases = {"lambda": "reg_lambda"}

    def __init__(
        self,
        booster: str = "gbtree",
        reg_lambda: float = 1.0,
        max_delta_step: float = 0.0,
        n_rounds: int = 100,
        learning_rate: float = 0.3,
        max_depth: int = 6,
        base_score: float = 0.5,
        rate_drop: float = 0.1,
        seed: int = 0,
    ):
        super().__init__(seed)
        if booster not in BOOSTERS:
            raise ValueError(f"unknown booster {booster!r}; expected one of {BOOSTERS}")
        if reg_lambda < 0:
            raise ValueError(f"lambda must be >= 0, got {reg_lambda}")
        if max_delta_step < 0:
            raise ValueError(f"max_delta_step must be >= 0, got {max_delta_step}")
        self.booster = booster
        self.reg_lambda = float(reg_lambda)
        self.max_delta_step = float(max_delta_step)
        self.n_rounds = int(n_rounds)
        self.learning_rate = float(learning_rate)
        self.max_depth = int(max_depth)
        self.base_score = float(base_score)
        self.rate_drop = float(rate_drop)
        self.trees_: list[RegressionTree] = []
        self.tree_weights_: list[float] = []
        self.coef_ = np.zeros(0)
        self.bias_ = 0.0
        self.train_loss_: list[float] = []

    def get_params(self) -> dict:
        return {
            "booster": self.booster,
            "lambda": self.reg_lambda,
            "max_delta_step": self.max_delta_step,
        }

    def _fit(self, X, y):
        self.trees_, self.tree_weights_, self.train_loss_ = [], [], []
        if self.booster == "gblinear":
            self._fit_linear(X, y)
        else:
            self._fit_trees(X, y)

    def _fit_trees(self, X, y):
        rng = np.random.default_rng(self.seed)
        criterion = SecondOrderGain(self.reg_lambda, self.max_delta_step)
        outputs: list[np.ndarray] = []
        current = np.full(y.shape[0], self.base_score)
        for _ in range(self.n_rounds):
            dropped = np.zeros(0, dtype=int)
            if self.booster == "dart" and self.trees_:
                dropped = np.flatnonzero(rng.random(len(self.trees_)) < self.rate_drop)
            margin = current
            for k in dropped:
                margin = margin - self.tree_weights_[k] * outputs[k]

            tree = RegressionTree(criterion, max_depth=self.max_depth).fit(X, margin - y)
            tree.scale_values(self.learning_rate)
            k = dropped.size
            if k:
                factor = k / (k + self.learning_rate)
                for d in dropped:
                    self.tree_weights_[d] *= factor
                new_weight = 1.0 / (k + self.learning_rate)
            else:
                new_weight = 1.0
            self.trees_.append(tree)
            self.tree_weights_.append(new_weight)
            outputs.append(tree.predict(X))

            if k:
                current = self.base_score + np.asarray(self.tree_weights_) @ np.vstack(outputs)
            else:
                current = current + outputs[-1]
            self.train_loss_.append(float(np.mean((current - y) ** 2)))

    def _fit_linear(self, X, y):
        n, m = X.shape
        self.coef_ = np.zeros(m)
        self.bias_ = 0.0
        grad = self.base_score - y
        for _ in range(self.n_rounds):
            step = self.learning_rate * (-grad.sum() / n)
            self.bias_ += step
            grad = grad + step
            for j in range(m):
                column = X[:, j]
                hess = column @ column
                if hess < _MIN_HESSIAN:
                    continue
                delta = -(grad @ column + self.reg_lambda * self.coef_[j]) / (hess + self.reg_lambda)
                delta *= self.learning_rate
                self.coef_[j] += delta
                grad = grad + delta * column
            self.train_loss_.append(float(np.mean(grad ** 2)))

    def _predict(self, X):
        if self.booster == "gblinear":
            return self.base_score + self.bias_ + X @ self.coef_
        current = np.full(X.shape[0], self.base_score)
        for weight, tree in zip(self.tree_weights_, self.trees_):
            current = current + weight * tree.predict(X)
        return current

    def get_state(self) -> dict:
        state = {"base_score": self.base_score, "train_loss": self.train_loss_}
        if self.booster == "gblinear":
            state.update(coef=self.coef_.tolist(), bias=self.bias_)
        else:
            state.update(
                trees=[tree.get_state() for tree in self.trees_],
                tree_weights=list(self.tree_weights_),
            )
        return state

    def set_state(self, state: dict) -> None:
        self.base_score = float(state["base_score"])
        self.train_loss_ = list(state.get("train_loss", []))
        if self.booster == "gblinear":
            self.coef_ = np.asarray(state["coef"], dtype=float)
            self.bias_ = float(state["bias"])
        else:
            self.trees_ = [RegressionTree.from_state(t) for t in state["trees"]]
            self.tree_weights_ = [float(w) for w in state["tree_weights"]]


def fit_xgb_variant(X, y, booster: str = "gbtree", reg_lambda: float = 1.0,
                    max_delta_step: float = 0.0, seed: int = 0) -> XGBVariant:
    return XGBVariant(booster=booster, reg_lambda=reg_lambda, max_delta_step=max_delta_step, seed=seed).fit(X, y)
