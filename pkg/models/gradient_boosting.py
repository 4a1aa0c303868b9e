"""Least-squares gradient boosting: each stage fits a tree to the residuals."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from models.base import BaseModel
from models.trees import RegressionTree, make_criterion


class GradientBoosting(BaseModel):
    family = "gradient_boosting"

    def __init__(
        self,
        learning_rate: float = 0.1,
        max_depth: int | None = 3,
        max_leaf_nodes: int | None = None,
        min_samples_leaf: int = 1,
        n_estimators: int = 100,
        criterion: str = "friedman_mse",
        seed: int = 0,
    ):
        super().__init__(seed)
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        if n_estimators < 0:
            raise ValueError(f"n_estimators must be >= 0, got {n_estimators}")
        make_criterion(criterion)
        self.learning_rate = float(learning_rate)
        self.max_depth = None if max_depth is None else int(max_depth)
        self.max_leaf_nodes = None if max_leaf_nodes is None else int(max_leaf_nodes)
        self.min_samples_leaf = int(min_samples_leaf)
        self.n_estimators = int(n_estimators)
        self.criterion = criterion
        self.init_ = 0.0
        self.trees_: list[RegressionTree] = []
        self.train_loss_: list[float] = []

    def get_params(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "max_leaf_nodes": self.max_leaf_nodes,
            "min_samples_leaf": self.min_samples_leaf,
            "n_estimators": self.n_estimators,
            "criterion": self.criterion,
        }

    def _fit(self, X, y):
        criterion = make_criterion(self.criterion)
        self.init_ = float(y.mean())
        current = np.full(y.shape[0], self.init_)
        self.trees_ = []
        self.train_loss_ = [float(np.mean((y - current) ** 2))]
        for _ in range(self.n_estimators):
            tree = RegressionTree(
                criterion,
                max_depth=self.max_depth,
                max_leaf_nodes=self.max_leaf_nodes,
                min_samples_leaf=self.min_samples_leaf,
            ).fit(X, y - current)
            current = current + self.learning_rate * tree.predict(X)
            self.trees_.append(tree)
            self.train_loss_.append(float(np.mean((y - current) ** 2)))

    def staged_predict(self, X) -> Iterator[np.ndarray]:
        """Predictions after each stage, starting from the constant stage 0."""
        X = np.asarray(X, dtype=float)
        current = np.full(X.shape[0], self.init_)
        yield current
        for tree in self.trees_:
            current = current + self.learning_rate * tree.predict(X)
            yield current

    def _predict(self, X):
        current = np.full(X.shape[0], self.init_)
        for tree in self.trees_:
            current = current + self.learning_rate * tree.predict(X)
        return current

    def get_state(self) -> dict:
        return {
            "init": self.init_,
            "trees": [tree.get_state() for tree in self.trees_],
            "train_loss": self.train_loss_,
        }

    def set_state(self, state: dict) -> None:
        self.init_ = float(state["init"])
        self.trees_ = [RegressionTree.from_state(t) for t in state["trees"]]
        self.train_loss_ = list(state.get("train_loss", []))


def fit_gradient_boosting(X, y, learning_rate: float = 0.1, max_depth: int | None = 3,
                          max_leaf_nodes: int | None = None, min_samples_leaf: int = 1,
                          n_estimators: int = 100, criterion: str = "friedman_mse",
                          seed: int = 0) -> GradientBoosting:
    return GradientBoosting(learning_rate, max_depth, max_leaf_nodes, min_samples_leaf,
                            n_estimators, criterion, seed=seed).fit(X, y)
