"""Base model class and shared types for the regression zoo."""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class FitError(ValueError):
    """Raised when a model cannot be fitted to the given data."""


class FeatureWidthError(ValueError):
    """Raised when predict receives a different number of features than fit."""


@dataclass(frozen=True)
class ModelSpec:
    """A model family plus the hyperparameter point and seed that produce it."""

    family: str
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def label(self) -> str:
        if not self.hyperparameters:
            return self.family
        params = ", ".join(f"{k}={_format_value(v)}" for k, v in self.hyperparameters.items())
        return f"{self.family}({params})"

    def with_seed(self, seed: int) -> "ModelSpec":
        return ModelSpec(self.family, dict(self.hyperparameters), seed)

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "hyperparameters": {k: _jsonable(v) for k, v in self.hyperparameters.items()},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelSpec":
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in data.get("hyperparameters", {}).items()}
        return cls(data["family"], params, int(data.get("seed", 0)))


@dataclass
class TrainingInfo:
    n_samples: int
    n_features: int
    seed: int
    wall_time: float = 0.0
    converged: bool = True
    n_iter: int | None = None


class BaseModel(ABC):
    """Abstract base class for the regressors.

    Subclasses implement ``_fit``/``_predict`` plus state (de)serialization;
    ``fit`` and ``predict`` handle validation and bookkeeping.
    """

    family: str
    # Vocabulary names that are not valid Python identifiers.
    param_aliases: dict[str, str] = {}

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.info: TrainingInfo | None = None

    @abstractmethod
    def get_params(self) -> dict[str, Any]:
        """Hyperparameters in grid vocabulary (JSON-friendly values)."""

    @abstractmethod
    def _fit(self, X: np.ndarray, y: np.ndarray) -> tuple[bool, int | None] | None:
        ...

    @abstractmethod
    def _predict(self, X: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def get_state(self) -> dict[str, Any]:
        """Learned parameters as JSON-friendly values."""

    @abstractmethod
    def set_state(self, state: dict[str, Any]) -> None:
        ...

    @property
    def is_fitted(self) -> bool:
        return self.info is not None

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(self.family, self.get_params(), self.seed)

    def fit(self, X, y) -> "BaseModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise FitError(f"expected X of shape (n, m) matching y of length n, got {X.shape} and {y.shape}")
        if X.shape[0] < 1:
            raise FitError("at least one training sample is required")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise FitError("training data contains non-finite values")
        start = time.perf_counter()
        converged, n_iter = self._fit(X, y) or (True, None)
        self.info = TrainingInfo(
            n_samples=X.shape[0],
            n_features=X.shape[1],
            seed=self.seed,
            wall_time=time.perf_counter() - start,
            converged=converged,
            n_iter=n_iter,
        )
        return self

    def predict(self, X) -> np.ndarray:
        if self.info is None:
            raise RuntimeError(f"{self.family} model is not fitted")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.info.n_features:
            raise FeatureWidthError(
                f"{self.family} expects {self.info.n_features} features, got {X.shape[1]}"
            )
        return self._predict(X)


def _jsonable(value: Any) -> Any:
    if isinstance(value, tuple):
        return list(value)
    if isinstance(value, np.generic):
        return value.item()
    return value


def _format_value(value: Any) -> str:
    if isinstance(value, (tuple, list)):
        return "(" + ", ".join(str(v) for v in value) + ")"
    return str(value)
