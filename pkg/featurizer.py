"""Lagged feature matrix and min-max normalization.

Sample ``i`` predicts the close of day ``i`` from every dataset column on days
``i-3``, ``i-2`` and ``i-1`` (oldest lag first). The normalizer is fitted on
training rows only; values outside the fitted range are clamped to [0, 1].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date
from typing import Sequence

import numpy as np
import pandas as pd

import storage
from indicators import IndicatorConfig, indicator_columns
from market_data import BASE_COLUMNS, AlignedDataset, SchemaError

logger = logging.getLogger(__name__)

DEFAULT_LAGS = 3


def feature_columns(config: IndicatorConfig | None = None) -> tuple[str, ...]:
    return (*BASE_COLUMNS, *indicator_columns(config or IndicatorConfig()))


def feature_names(columns: Sequence[str], lags: int = DEFAULT_LAGS) -> list[str]:
    return [f"{col}[t-{lag}]" for lag in range(lags, 0, -1) for col in columns]


def expected_feature_count(config: IndicatorConfig | None = None, lags: int = DEFAULT_LAGS) -> int:
    return lags * len(feature_columns(config))


@dataclass(eq=False)
class FeatureMatrix:
    X: np.ndarray
    y: np.ndarray
    sample_dates: pd.DatetimeIndex
    feature_names: list[str]

    def __post_init__(self):
        if self.X.ndim != 2 or not self.X.shape[0] == self.y.shape[0] == len(self.sample_dates):
            raise ValueError("X, y and sample_dates must describe the same samples")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("feature_names must match the width of X")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def take(self, rows) -> "FeatureMatrix":
        """Subset by slice, range or integer index array."""
        if isinstance(rows, range):
            rows = slice(rows.start, rows.stop, rows.step)
        return FeatureMatrix(self.X[rows], self.y[rows], self.sample_dates[rows], list(self.feature_names))

    def between(self, start: date | None = None, end: date | None = None) -> "FeatureMatrix":
        """Samples whose target date lies in [start, end]."""
        mask = np.ones(self.n_samples, dtype=bool)
        if start is not None:
            mask &= self.sample_dates >= pd.Timestamp(start)
        if end is not None:
            mask &= self.sample_dates <= pd.Timestamp(end)
        return self.take(np.flatnonzero(mask))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.X, columns=self.feature_names, index=self.sample_dates.rename("date"))
        frame["target_close"] = self.y
        return frame

    def to_csv(self, path: str) -> None:
        storage.write_text(path, self.to_frame().to_csv(date_format="%Y-%m-%d"))


@dataclass(eq=False)
class Normalizer:
    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float

    def to_dict(self) -> dict:
        return {
            "feature_min": [float(v) for v in self.feature_min],
            "feature_max": [float(v) for v in self.feature_max],
            "target_min": float(self.target_min),
            "target_max": float(self.target_max),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Normalizer":
        return cls(
            feature_min=np.asarray(data["feature_min"], dtype=float),
            feature_max=np.asarray(data["feature_max"], dtype=float),
            target_min=float(data["target_min"]),
            target_max=float(data["target_max"]),
        )


def build_samples(dataset: AlignedDataset, lags: int = DEFAULT_LAGS,
                  config: IndicatorConfig | None = None) -> FeatureMatrix:
    """Raw (unnormalized) lag matrix with the next-day close as target."""
    config = config or IndicatorConfig()
    columns = feature_columns(config)
    if dataset.columns != list(columns):
        raise SchemaError(f"dataset columns {dataset.columns} do not match {list(columns)}")

    start = dataset.warmup
    values = dataset.frame.to_numpy(dtype=float)
    close = dataset.column("close")
    n_samples = len(dataset) - start - lags
    if n_samples < 1:
        raise ValueError(
            f"dataset has {len(dataset)} rows; building samples needs at least {start + lags + 1}"
        )

    targets = np.arange(start + lags, len(dataset))
    X = np.hstack([values[targets - lag] for lag in range(lags, 0, -1)])
    if np.isnan(X).any():
        raise SchemaError("lagged rows contain missing values after the warmup boundary")
    names = feature_names(columns, lags)
    expected = expected_feature_count(config, lags)
    assert X.shape[1] == expected == len(names), (X.shape, expected)
    return FeatureMatrix(X, close[targets].copy(), dataset.dates[targets], names)


def fit_normalizer(raw: FeatureMatrix, train_rows) -> Normalizer:
    """Per-feature and target min/max over ``train_rows`` only."""
    subset = raw.take(train_rows)
    if subset.n_samples == 0:
        raise ValueError("train_rows must select at least one sample")
    return Normalizer(
        feature_min=subset.X.min(axis=0),
        feature_max=subset.X.max(axis=0),
        target_min=float(subset.y.min()),
        target_max=float(subset.y.max()),
    )


def _scale(values: np.ndarray, low, high) -> np.ndarray:
    span = np.asarray(high, dtype=float) - np.asarray(low, dtype=float)
    scaled = np.divide(values - low, span, out=np.zeros(np.broadcast(values, span).shape), where=span > 0)
    return np.clip(scaled, 0.0, 1.0)


def transform(raw: FeatureMatrix, normalizer: Normalizer) -> FeatureMatrix:
    if raw.n_features != normalizer.feature_min.shape[0]:
        raise ValueError(
            f"normalizer was fitted on {normalizer.feature_min.shape[0]} features, got {raw.n_features}"
        )
    return FeatureMatrix(
        _scale(raw.X, normalizer.feature_min, normalizer.feature_max),
        transform_target(raw.y, normalizer),
        raw.sample_dates,
        list(raw.feature_names),
    )


def transform_target(values, normalizer: Normalizer) -> np.ndarray:
    return _scale(np.asarray(values, dtype=float), normalizer.target_min, normalizer.target_max)


def inverse_transform_target(values, normalizer: Normalizer):
    """Map normalized targets back to USD."""
    span = normalizer.target_max - normalizer.target_min
    return np.asarray(values, dtype=float) * span + normalizer.target_min


def save_normalizer(normalizer: Normalizer, path: str) -> None:
    storage.write_json(path, normalizer.to_dict())


def load_normalizer(path: str) -> Normalizer:
    return Normalizer.from_dict(storage.read_json(path))
