"""Ordinary least squares with intercept."""

from __future__ import annotations

import numpy as np

from models.base import BaseModel


class LinearRegression(BaseModel):
    family = "linear_regression"

    def __init__(self, seed: int = 0):
        super().__init__(seed)
        self.coef_: np.ndarray | None = None
        self.intercept_ = 0.0

    def get_params(self) -> dict:
        return {}

    def _fit(self, X, y):
        # Centering keeps the intercept out of the minimum-norm penalty.
        x_mean = X.mean(axis=0)
        y_mean = y.mean()
        coef, *_ = np.linalg.lstsq(X - x_mean, y - y_mean, rcond=None)
        self.coef_ = coef
        self.intercept_ = float(y_mean - x_mean @ coef)

    def _predict(self, X):
        return X @ self.coef_ + self.intercept_

    def get_state(self) -> dict:
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_}

    def set_state(self, state: dict) -> None:
        self.coef_ = np.asarray(state["coef"], dtype=float)
        self.intercept_ = float(state["intercept"])


def fit_linear_regression(X, y, seed: int = 0) -> LinearRegression:
    return LinearRegression(seed=seed).fit(X, y)
