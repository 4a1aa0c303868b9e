"""Investment simulation: all-in/all-out on the predicted direction.

On decision day ``t`` the strategy holds BTC iff the predicted close of
``t+1`` is at least the close of ``t``. Trades fill at day ``t``'s close; the
last day only marks the open position to market.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

import storage
from featurizer import FeatureMatrix, Normalizer, inverse_transform_target, transform
from models import BaseModel

logger = logging.getLogger(__name__)

BUY_HOLD = "buy_hold"
AVERAGE = "average"
LEDGER_COLUMNS = ["close", "predicted_close", "signal", "position", "cash", "equity", "hit"]


class BacktestError(ValueError):
    """Raised for invalid strategy settings or misaligned inputs."""


@dataclass(frozen=True)
class StrategyConfig:
    initial_capital: float = 200_000.0
    fees: float = 0.0

    def __post_init__(self):
        if not self.initial_capital > 0:
            raise BacktestError(f"initial_capital must be positive, got {self.initial_capital}")
        if not 0.0 <= self.fees < 1.0:
            raise BacktestError(f"fees must be in [0, 1), got {self.fees}")


@dataclass(eq=False)
class BacktestLedger:
    frame: pd.DataFrame

    @property
    def final_equity(self) -> float:
        return float(self.frame["equity"].iloc[-1])

    @property
    def equity(self) -> pd.Series:
        return self.frame["equity"]

    @property
    def n_trades(self) -> int:
        held = (self.frame["position"] > 0).to_numpy()
        return int(np.count_nonzero(np.diff(np.concatenate([[False], held]).astype(int))))

    def to_csv(self, path: str) -> None:
        storage.write_text(path, self.frame.to_csv(index_label="date", date_format="%Y-%m-%d"))


def _as_closes(prices) -> pd.Series:
    closes = prices if isinstance(prices, pd.Series) else pd.Series(np.asarray(prices, dtype=float))
    closes = closes.astype(float)
    if closes.empty:
        raise BacktestError("price series is empty")
    if not (np.isfinite(closes.to_numpy()).all() and (closes.to_numpy() > 0).all()):
        raise BacktestError("prices must be finite and positive")
    return closes


def _run_signals(closes: pd.Series, signals: np.ndarray, predicted: np.ndarray,
                 hits: list, config: StrategyConfig) -> BacktestLedger:
    cash, position = config.initial_capital, 0.0
    price = closes.to_numpy()
    rows = []
    for t, close in enumerate(price):
        signal = ""
        if t < len(signals):
            signal = "long" if signals[t] else "flat"
            if signals[t] and position == 0.0 and cash > 0.0:
                position, cash = cash * (1.0 - config.fees) / close, 0.0
            elif not signals[t] and position > 0.0:
                cash, position = position * close * (1.0 - config.fees), 0.0
        rows.append({
            "close": close,
            "predicted_close": predicted[t] if t < len(predicted) else np.nan,
            "signal": signal,
            "position": position,
            "cash": cash,
            "equity": cash + position * close,
            "hit": hits[t] if t < len(hits) else None,
        })
    return BacktestLedger(pd.DataFrame(rows, index=closes.index, columns=LEDGER_COLUMNS))


def _hit_flags(price: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    return np.sign(predicted - price[:-1]) == np.sign(np.diff(price))


def run_strategy(prices, predictions: Sequence[float], config: StrategyConfig | None = None) -> BacktestLedger:
    """Simulate the strategy; ``predictions[t]`` is the predicted close of day ``t+1``."""
    config = config or StrategyConfig()
    closes = _as_closes(prices)
    predicted = np.asarray(predictions, dtype=float)
    if predicted.shape != (len(closes) - 1,):
        raise BacktestError(
            f"expected {len(closes) - 1} predictions for {len(closes)} closes, got {predicted.shape[0]}"
        )
    if not np.isfinite(predicted).all():
        raise BacktestError("predictions must be finite")
    price = closes.to_numpy()
    signals = predicted - price[:-1] >= 0
    return _run_signals(closes, signals, predicted, _hit_flags(price, predicted).tolist(), config)


def buy_hold_ledger(prices, config: StrategyConfig | None = None) -> BacktestLedger:
    config = config or StrategyConfig()
    closes = _as_closes(prices)
    return _run_signals(closes, np.ones(max(1, len(closes) - 1), dtype=bool), np.zeros(0), [], config)


def run_buy_hold(prices, config: StrategyConfig | None = None) -> float:
    """Final value of buying at the first close and holding to the last."""
    config = config or StrategyConfig()
    price = _as_closes(prices).to_numpy()
    return float(config.initial_capital * (1.0 - config.fees) * price[-1] / price[0])


def count_hits(prices, predictions: Sequence[float]) -> tuple[int, int]:
    """Days whose predicted direction matches the realized one, and the day count."""
    price = _as_closes(prices).to_numpy()
    predicted = np.asarray(predictions, dtype=float)
    if predicted.shape != (len(price) - 1,):
        raise BacktestError(f"expected {len(price) - 1} predictions, got {predicted.shape[0]}")
    return int(_hit_flags(price, predicted).sum()), int(predicted.shape[0])


@dataclass(eq=False)
class ModelOutcome:
    model: str
    hits: int | None
    denominator: int | None
    final_value: float
    ledger: BacktestLedger | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "hits": self.hits,
            "denominator": self.denominator,
            "final_value": self.final_value,
        }


@dataclass(eq=False)
class SimulationReport:
    outcomes: list[ModelOutcome]
    buy_hold: ModelOutcome
    rejected: dict[str, str] = field(default_factory=dict)

    @property
    def rows(self) -> list[ModelOutcome]:
        """Models and the baseline by final value (descending), then the average row."""
        ordered = sorted([*self.outcomes, self.buy_hold], key=lambda o: o.final_value, reverse=True)
        average = self.average
        return ordered + ([average] if average is not None else [])

    @property
    def average(self) -> ModelOutcome | None:
        if not self.outcomes:
            return None
        return ModelOutcome(
            AVERAGE,
            hits=int(round(np.mean([o.hits for o in self.outcomes]))),
            denominator=self.outcomes[0].denominator,
            final_value=float(np.mean([o.final_value for o in self.outcomes])),
        )

    def outcome(self, model: str) -> ModelOutcome:
        for o in [*self.outcomes, self.buy_hold]:
            if o.model == model:
                return o
        raise KeyError(model)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([o.to_dict() for o in self.rows], columns=["model", "hits", "denominator", "final_value"])

    def equity_curves(self) -> pd.DataFrame:
        curves = {o.model: o.ledger.equity for o in [*self.outcomes, self.buy_hold] if o.ledger is not None}
        return pd.DataFrame(curves)

    def to_dict(self) -> dict:
        return {
            "rows": [o.to_dict() for o in self.rows],
            "rejected": dict(self.rejected),
        }

    def save_json(self, path: str) -> None:
        storage.write_json(path, self.to_dict())


def simulate_all(
    models: Iterable[tuple[str, BaseModel]],
    test: FeatureMatrix,
    normalizer: Normalizer,
    prices: pd.Series,
    config: StrategyConfig | None = None,
) -> SimulationReport:
    """Backtest every model over ``prices`` plus the Buy & Hold baseline.

    ``test`` holds one sample per day after the first price date: sample ``i``
    targets the close of ``prices.index[i + 1]``.
    """
    config = config or StrategyConfig()
    closes = _as_closes(prices)
    if not test.sample_dates.equals(pd.DatetimeIndex(closes.index[1:])):
        raise BacktestError("test samples must target exactly the price dates after the first one")
    scaled = transform(test, normalizer) if test.n_features == normalizer.feature_min.shape[0] else None

    outcomes, rejected = [], {}
    for label, model in models:
        try:
            if scaled is None:
                raise ValueError(
                    f"normalizer expects {normalizer.feature_min.shape[0]} features, matrix has {test.n_features}"
                )
            predicted = inverse_transform_target(model.predict(scaled.X), normalizer)
            ledger = run_strategy(closes, predicted, config)
        except ValueError as e:
            logger.warning("Skipping %s in simulation: %s", label, e)
            rejected[label] = str(e)
            continue
        hits, denominator = count_hits(closes, predicted)
        outcomes.append(ModelOutcome(label, hits, denominator, ledger.final_equity, ledger))
        logger.info("%s: %d/%d hits, final value %.2f", label, hits, denominator, ledger.final_equity)

    baseline = buy_hold_ledger(closes, config)
    buy_hold = ModelOutcome(BUY_HOLD, None, None, baseline.final_equity, baseline)
    return SimulationReport(outcomes, buy_hold, rejected)
