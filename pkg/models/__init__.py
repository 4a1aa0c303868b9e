"""Regression model zoo."""

from __future__ import annotations

import inspect

import numpy as np

from models.base import BaseModel, FeatureWidthError, FitError, ModelSpec, TrainingInfo
from models.gradient_boosting import GradientBoosting
from models.linear import LinearRegression
from models.mlp import MLPRegressor
from models.random_forest import RandomForest
from models.svr import SVR
from models.xgb import XGBVariant

MODELS: dict[str, type[BaseModel]] = {
    "linear_regression": LinearRegression,
    "svr": SVR,
    "random_forest": RandomForest,
    "gradient_boosting": GradientBoosting,
    "xgb_variant": XGBVariant,
    "mlp": MLPRegressor,
}


def accepted_parameters(family: str) -> set[str]:
    """Hyperparameter names a family's constructor accepts, in grid vocabulary."""
    cls = _model_class(family)
    names = set(inspect.signature(cls.__init__).parameters) - {"self", "seed"}
    inverse = {target: alias for alias, target in cls.param_aliases.items()}
    return {inverse.get(name, name) for name in names}


def build_model(spec: ModelSpec) -> BaseModel:
    """Unfitted model for ``spec``; unknown hyperparameter names are rejected."""
    cls = _model_class(spec.family)
    unknown = set(spec.hyperparameters) - accepted_parameters(spec.family)
    if unknown:
        raise ValueError(f"{spec.family} does not accept hyperparameters {sorted(unknown)}")
    kwargs = {cls.param_aliases.get(k, k): v for k, v in spec.hyperparameters.items()}
    return cls(seed=spec.seed, **kwargs)


def fit_model(spec: ModelSpec, X, y) -> BaseModel:
    return build_model(spec).fit(X, y)


def predict(model: BaseModel, X) -> np.ndarray:
    return model.predict(X)


def _model_class(family: str) -> type[BaseModel]:
    try:
        return MODELS[family]
    except KeyError:
        raise ValueError(f"unknown model family {family!r}; expected one of {sorted(MODELS)}") from None


__all__ = [
    "BaseModel",
    "FeatureWidthError",
    "FitError",
    "ModelSpec",
    "TrainingInfo",
    "MODELS",
    "accepted_parameters",
    "build_model",
    "fit_model",
    "predict",
]
