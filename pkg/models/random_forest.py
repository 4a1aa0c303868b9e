"""Bagged regression trees with per-split feature subsampling."""

from __future__ import annotations

import math

import numpy as np

from models.base import BaseModel
from models.trees import RegressionTree, make_criterion


class RandomForest(BaseModel):
    family = "random_forest"

    def __init__(
        self,
        criterion: str = "squared_error",
        n_estimators: int = 150,
        max_leaf_nodes: int | None = None,
        min_samples_leaf: int = 1,
        max_features: str | int | None = "third",
        bootstrap: bool = True,
        seed: int = 0,
    ):
        super().__init__(seed)
        if n_estimators < 1:
            raise ValueError(f"n_estimators must be >= 1, got {n_estimators}")
        make_criterion(criterion)
        self.criterion = criterion
        self.n_estimators = int(n_estimators)
        self.max_leaf_nodes = None if max_leaf_nodes is None else int(max_leaf_nodes)
        self.min_samples_leaf = int(min_samples_leaf)
        self.max_features = max_features
        self.bootstrap = bool(bootstrap)
        self.trees_: list[RegressionTree] = []

    def get_params(self) -> dict:
        return {
            "criterion": self.criterion,
            "n_estimators": self.n_estimators,
            "max_leaf_nodes": self.max_leaf_nodes,
            "min_samples_leaf": self.min_samples_leaf,
        }

    def _resolve_max_features(self, n_features: int) -> int | None:
        if self.max_features == "third":
            return max(1, math.ceil(n_features / 3))
        return self.max_features

    def _fit(self, X, y):
        criterion = make_criterion(self.criterion)
        criterion.check_targets(y)
        n = y.shape[0]
        max_features = self._resolve_max_features(X.shape[1])
        self.trees_ = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_estimators):
            rng = np.random.default_rng(child)
            rows = rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            tree = RegressionTree(
                criterion,
                max_leaf_nodes=self.max_leaf_nodes,
                min_samples_leaf=self.min_samples_leaf,
                max_features=max_features,
                rng=rng,
            )
            self.trees_.append(tree.fit(X[rows], y[rows]))

    def _predict(self, X):
        return np.mean([tree.predict(X) for tree in self.trees_], axis=0)

    def get_state(self) -> dict:
        return {"trees": [tree.get_state() for tree in self.trees_]}

    def set_state(self, state: dict) -> None:
        self.trees_ = [RegressionTree.from_state(t) for t in state["trees"]]


def fit_random_forest(X, y, criterion: str = "squared_error", n_estimators: int = 150,
                      max_leaf_nodes: int | None = None, min_samples_leaf: int = 1,
                      seed: int = 0) -> RandomForest:
    return RandomForest(criterion, n_estimators, max_leaf_nodes, min_samples_leaf, seed=seed).fit(X, y)
