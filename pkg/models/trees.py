"""Regression tree builder shared by the forest and both boosting families.

Trees grow best-first: the open node with the largest split improvement is
expanded next, until no positive improvement remains or ``max_leaf_nodes``
is reached. A sample goes left when ``x[feature] <= threshold``.
"""

from __future__ import annotations

import heapq
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from models.base import FitError

_MIN_IMPROVEMENT = 1e-12
_LEAF = -1


class SplitCriterion(ABC):
    """Scores candidate splits from left-partition sums.

    ``improvement`` receives cumulative target sums and counts for the left
    child at every candidate position and returns the reduction in node loss.
    """

    name: str

    def check_targets(self, y: np.ndarray) -> None:
        pass

    def node_value(self, y: np.ndarray) -> float:
        return float(y.mean())

    @abstractmethod
    def improvement(self, left_sum, left_count, total_sum, total_count) -> np.ndarray:
        ...


class SquaredError(SplitCriterion):
    name = "squared_error"

    def improvement(self, left_sum, left_count, total_sum, total_count):
        right_sum = total_sum - left_sum
        right_count = total_count - left_count
        return (left_sum ** 2 / left_count + right_sum ** 2 / right_count
                - total_sum ** 2 / total_count)


class FriedmanMSE(SplitCriterion):
    name = "friedman_mse"

    def improvement(self, left_sum, left_count, total_sum, total_count):
        right_count = total_count - left_count
        diff = left_sum / left_count - (total_sum - left_sum) / right_count
        return left_count * right_count * diff ** 2 / total_count


class Poisson(SplitCriterion):
    """Half Poisson deviance reduction; children need a positive target sum."""

    name = "poisson"

    def check_targets(self, y):
        if (y < 0).any():
            raise FitError("poisson criterion requires non-negative targets")

    def improvement(self, left_sum, left_count, total_sum, total_count):
        right_sum = total_sum - left_sum
        right_count = total_count - left_count
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = (_xlogmean(left_sum, left_count) + _xlogmean(right_sum, right_count)
                    - _xlogmean(total_sum, total_count))
        valid = (left_sum > 0) & (right_sum > 0)
        return np.where(valid, gain, -np.inf)


def _xlogmean(s, n):
    return np.where(s > 0, s * np.log(np.where(s > 0, s, 1.0) / n), 0.0)


CRITERIA = {c.name: c for c in (SquaredError, FriedmanMSE, Poisson)}


def make_criterion(name: str) -> SplitCriterion:
    try:
        return CRITERIA[name]()
    except KeyError:
        raise ValueError(f"unknown split criterion {name!r}; expected one of {sorted(CRITERIA)}") from None


@dataclass
class _Split:
    improvement: float
    feature: int
    threshold: float


class RegressionTree:
    def __init__(
        self,
        criterion: SplitCriterion,
        max_depth: int | None = None,
        max_leaf_nodes: int | None = None,
        min_samples_leaf: int = 1,
        max_features: int | None = None,
        rng: np.random.Generator | None = None,
    ):
        if max_leaf_nodes is not None and max_leaf_nodes < 2:
            raise ValueError(f"max_leaf_nodes must be >= 2, got {max_leaf_nodes}")
        if min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {min_samples_leaf}")
        self.criterion = criterion
        self.max_depth = max_depth
        self.max_leaf_nodes = max_leaf_nodes
        self.min_samples_leaf = int(min_samples_leaf)
        self.max_features = max_features
        self.rng = rng
        self.feature = np.zeros(0, dtype=int)
        self.threshold = np.zeros(0)
        self.left = np.zeros(0, dtype=int)
        self.right = np.zeros(0, dtype=int)
        self.value = np.zeros(0)

    @property
    def n_leaves(self) -> int:
        return int((self.feature == _LEAF).sum())

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RegressionTree":
        self.criterion.check_targets(y)
        feature, threshold, left, right, value = [_LEAF], [0.0], [_LEAF], [_LEAF], [self.criterion.node_value(y)]
        heap: list = []
        counter = 0

        def consider(node: int, rows: np.ndarray, depth: int) -> None:
            nonlocal counter
            if self.max_depth is not None and depth >= self.max_depth:
                return
            if rows.size < 2 * self.min_samples_leaf:
                return
            split = self._best_split(X[rows], y[rows])
            if split is not None and split.improvement > _MIN_IMPROVEMENT:
                heapq.heappush(heap, (-split.improvement, counter, node, split, rows, depth))
                counter += 1

        consider(0, np.arange(y.shape[0]), 0)
        n_leaves = 1
        while heap and (self.max_leaf_nodes is None or n_leaves < self.max_leaf_nodes):
            _, _, node, split, rows, depth = heapq.heappop(heap)
            goes_left = X[rows, split.feature] <= split.threshold
            children = []
            for child_rows in (rows[goes_left], rows[~goes_left]):
                feature.append(_LEAF)
                threshold.append(0.0)
                left.append(_LEAF)
                right.append(_LEAF)
                value.append(self.criterion.node_value(y[child_rows]))
                children.append((len(value) - 1, child_rows))
            feature[node] = split.feature
            threshold[node] = split.threshold
            left[node], right[node] = children[0][0], children[1][0]
            n_leaves += 1
            for child, child_rows in children:
                consider(child, child_rows, depth + 1)

        self.feature = np.asarray(feature, dtype=int)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=int)
        self.right = np.asarray(right, dtype=int)
        self.value = np.asarray(value, dtype=float)
        return self

    def _feature_groups(self, n_features: int) -> list[np.ndarray]:
        if self.max_features is None or self.max_features >= n_features:
            return [np.arange(n_features)]
        order = self.rng.permutation(n_features)
        # The remaining features are only scanned when the sampled ones yield no valid split.
        return [order[:self.max_features], order[self.max_features:]]

    def _best_split(self, Xn: np.ndarray, yn: np.ndarray) -> _Split | None:
        for group in self._feature_groups(Xn.shape[1]):
            split = self._scan(Xn[:, group], yn)
            if split is not None:
                return _Split(split.improvement, int(group[split.feature]), split.threshold)
        return None

    def _scan(self, Xs: np.ndarray, yn: np.ndarray) -> _Split | None:
        n = yn.shape[0]
        order = np.argsort(Xs, axis=0, kind="stable")
        xs = np.take_along_axis(Xs, order, axis=0)
        left_sum = np.cumsum(yn[order], axis=0)[:-1]
        left_count = np.arange(1, n, dtype=float)[:, None]
        valid = ((xs[1:] > xs[:-1])
                 & (left_count >= self.min_samples_leaf)
                 & (n - left_count >= self.min_samples_leaf))
        if not valid.any():
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = self.criterion.improvement(left_sum, left_count, float(yn.sum()), float(n))
        gain = np.where(valid, gain, -np.inf)
        # Feature-major flattening: first feature wins ties, then lowest threshold.
        best = int(np.argmax(gain.T.ravel()))
        col, pos = divmod(best, n - 1)
        improvement = float(gain[pos, col])
        if not math.isfinite(improvement):
            return None
        lo, hi = xs[pos, col], xs[pos + 1, col]
        threshold = (lo + hi) / 2.0
        if threshold >= hi:
            threshold = lo
        return _Split(improvement, col, float(threshold))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] != _LEAF
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            goes_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(goes_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] != _LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def scale_values(self, factor: float) -> None:
        self.value = self.value * factor

    def get_state(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict, criterion: SplitCriterion | None = None) -> "RegressionTree":
        tree = cls(criterion or SquaredError())
        tree.feature = np.asarray(state["feature"], dtype=int)
        tree.threshold = np.asarray(state["threshold"], dtype=float)
        tree.left = np.asarray(state["left"], dtype=int)
        tree.right = np.asarray(state["right"], dtype=int)
        tree.value = np.asarray(state["value"], dtype=float)
        return tree
