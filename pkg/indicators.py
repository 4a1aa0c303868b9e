"""Technical indicators over daily bars.

Batch functions take numpy-compatible series and return float arrays of the
same length, with NaN marking the warmup prefix where an indicator is not yet
defined. ``IndicatorStream`` computes the same values one bar at a time.

Column order appended by ``attach_indicators`` (default configuration)::

    ma_10, ma_20, ma_30,
    macd_line, macd_signal, macd_hist,
    rsi_6, rsi_12, rsi_24,
    mfi_14, obv,
    bb_upper, bb_mid, bb_lower
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from market_data import BASE_COLUMNS, AlignedDataset

logger = logging.getLogger(__name__)


class IndicatorError(ValueError):
    """Raised for invalid indicator parameters or too-short inputs."""


@dataclass(frozen=True)
class IndicatorConfig:
    ma_periods: tuple[int, ...] = (10, 20, 30)
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9
    rsi_periods: tuple[int, ...] = (6, 12, 24)
    mfi_period: int = 14
    bb_period: int = 20
    bb_width: float = 2.0

    def __post_init__(self):
        periods = (*self.ma_periods, self.macd_fast, self.macd_slow, self.macd_signal,
                   *self.rsi_periods, self.mfi_period)
        if any(int(p) < 1 for p in periods):
            raise IndicatorError("all indicator periods must be >= 1")
        if self.macd_fast >= self.macd_slow:
            raise IndicatorError("MACD fast period must be shorter than the slow period")
        if self.bb_period < 2:
            raise IndicatorError("Bollinger period must be >= 2")


def indicator_columns(config: IndicatorConfig) -> tuple[str, ...]:
    """Column names in the fixed attach order."""
    return (
        *(f"ma_{p}" for p in config.ma_periods),
        "macd_line", "macd_signal", "macd_hist",
        *(f"rsi_{p}" for p in config.rsi_periods),
        f"mfi_{config.mfi_period}",
        "obv",
        "bb_upper", "bb_mid", "bb_lower",
    )


def warmup_length(config: IndicatorConfig) -> int:
    """Number of leading rows where at least one indicator is undefined."""
    return max(
        max(p - 1 for p in config.ma_periods),
        config.macd_slow + config.macd_signal - 2,
        max(config.rsi_periods),
        config.mfi_period,
        config.bb_period - 1,
    )


def _check_period(period: int) -> None:
    if period < 1:
        raise IndicatorError(f"period must be >= 1, got {period}")


def sma(values, period: int) -> np.ndarray:
    """Simple moving average over the trailing ``period`` values."""
    _check_period(period)
    x = np.asarray(values, dtype=float)
    out = np.full(x.shape[0], np.nan)
    if x.shape[0] >= period:
        out[period - 1:] = sliding_window_view(x, period).mean(axis=1)
    return out


def ema(values, period: int) -> np.ndarray:
    """Exponential moving average, alpha = 2/(period+1).

    Seeded with the simple mean of the first ``period`` defined values; leading
    NaNs in the input are skipped.
    """
    _check_period(period)
    x = np.asarray(values, dtype=float)
    out = np.full(x.shape[0], np.nan)
    defined = np.flatnonzero(~np.isnan(x))
    if defined.size == 0:
        return out
    start = int(defined[0])
    seg = x[start:]
    if seg.shape[0] < period:
        return out
    alpha = 2.0 / (period + 1)
    value = seg[:period].mean()
    out[start + period - 1] = value
    for i in range(period, seg.shape[0]):
        value = alpha * seg[i] + (1.0 - alpha) * value
        out[start + i] = value
    return out


def macd(close, fast: int = 12, slow: int = 26, signal: int = 9) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """MACD line, signal line and histogram."""
    if fast >= slow:
        raise IndicatorError("MACD fast period must be shorter than the slow period")
    line = ema(close, fast) - ema(close, slow)
    signal_line = ema(line, signal)
    return line, signal_line, line - signal_line


def _rsi_value(avg_gain: float, avg_loss: float) -> float:
    if avg_loss == 0.0:
        return 100.0 if avg_gain > 0.0 else 50.0
    if avg_gain == 0.0:
        return 0.0
    return 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)


def rsi(close, period: int) -> np.ndarray:
    """Relative strength index with Wilder smoothing; first value at index ``period``."""
    _check_period(period)
    x = np.asarray(close, dtype=float)
    n = x.shape[0]
    out = np.full(n, np.nan)
    if n < period + 1:
        return out
    diff = np.diff(x)
    gains = np.clip(diff, 0.0, None)
    losses = np.clip(-diff, 0.0, None)
    avg_gain = gains[:period].mean()
    avg_loss = losses[:period].mean()
    out[period] = _rsi_value(avg_gain, avg_loss)
    for t in range(period + 1, n):
        avg_gain = (avg_gain * (period - 1) + gains[t - 1]) / period
        avg_loss = (avg_loss * (period - 1) + losses[t - 1]) / period
        out[t] = _rsi_value(avg_gain, avg_loss)
    return out


def mfi(high, low, close, volume, period: int = 14) -> np.ndarray:
    """Money flow index over the trailing ``period`` typical-price changes.

    Unchanged typical prices count toward neither flow; no flow at all gives 50.
    """
    _check_period(period)
    typical = (np.asarray(high, float) + np.asarray(low, float) + np.asarray(close, float)) / 3.0
    flow = typical * np.asarray(volume, float)
    n = typical.shape[0]
    out = np.full(n, np.nan)
    if n < period + 1:
        return out
    change = np.diff(typical)
    positive = np.where(change > 0, flow[1:], 0.0)
    negative = np.where(change < 0, flow[1:], 0.0)
    pos_sum = sliding_window_view(positive, period).sum(axis=1)
    neg_sum = sliding_window_view(negative, period).sum(axis=1)
    total = pos_sum + neg_sum
    ratio = np.divide(pos_sum, total, out=np.full_like(total, 0.5), where=total > 0)
    out[period:] = 100.0 * ratio
    return out


def obv(close, volume) -> np.ndarray:
    """On-balance volume, seeded at 0."""
    c = np.asarray(close, dtype=float)
    v = np.asarray(volume, dtype=float)
    if c.shape != v.shape:
        raise IndicatorError("close and volume must have equal lengths")
    out = np.zeros(c.shape[0])
    if c.shape[0] > 1:
        out[1:] = np.cumsum(np.sign(np.diff(c)) * v[1:])
    return out


def bollinger(close, period: int = 20, width: float = 2.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Upper, middle and lower bands; offset is ``width`` population std devs."""
    if period < 2:
        raise IndicatorError("Bollinger period must be >= 2")
    x = np.asarray(close, dtype=float)
    n = x.shape[0]
    upper, mid, lower = (np.full(n, np.nan) for _ in range(3))
    if n >= period:
        windows = sliding_window_view(x, period)
        mean = windows.mean(axis=1)
        offset = width * windows.std(axis=1)
        mid[period - 1:] = mean
        upper[period - 1:] = mean + offset
        lower[period - 1:] = mean - offset
    return upper, mid, lower


def compute_indicators(frame: pd.DataFrame, config: IndicatorConfig | None = None) -> pd.DataFrame:
    """All indicator columns for an OHLCV frame, same index, warmup left as NaN."""
    config = config or IndicatorConfig()
    high, low, close, volume = (frame[c].to_numpy(dtype=float) for c in ("high", "low", "close", "volume"))
    columns: dict[str, np.ndarray] = {}
    for p in config.ma_periods:
        columns[f"ma_{p}"] = sma(close, p)
    columns["macd_line"], columns["macd_signal"], columns["macd_hist"] = macd(
        close, config.macd_fast, config.macd_slow, config.macd_signal
    )
    for p in config.rsi_periods:
        columns[f"rsi_{p}"] = rsi(close, p)
    columns[f"mfi_{config.mfi_period}"] = mfi(high, low, close, volume, config.mfi_period)
    columns["obv"] = obv(close, volume)
    columns["bb_upper"], columns["bb_mid"], columns["bb_lower"] = bollinger(
        close, config.bb_period, config.bb_width
    )
    return pd.DataFrame(columns, index=frame.index)[list(indicator_columns(config))]


def attach_indicators(dataset: AlignedDataset, config: IndicatorConfig | None = None) -> AlignedDataset:
    """Append indicator columns; rows inside the common warmup are all NaN."""
    config = config or IndicatorConfig()
    warmup = warmup_length(config)
    if len(dataset) < warmup + 1:
        raise IndicatorError(
            f"dataset has {len(dataset)} rows; indicators need at least {warmup + 1}"
        )
    base = dataset.frame[list(BASE_COLUMNS)]
    values = compute_indicators(base, config)
    values.iloc[:warmup] = np.nan
    frame = pd.concat([base, values], axis=1)
    logger.info("Attached %d indicator columns, warmup %d rows.", values.shape[1], warmup)
    return AlignedDataset(
        frame,
        warmup=warmup,
        dropped_bars=dataset.dropped_bars,
        dropped_sentiment=dataset.dropped_sentiment,
    )


class _EmaState:
    def __init__(self, period: int):
        self.period = period
        self.alpha = 2.0 / (period + 1)
        self._seed: list[float] = []
        self.value = np.nan

    def update(self, x: float) -> float:
        if np.isnan(x):
            return self.value
        if len(self._seed) < self.period:
            self._seed.append(x)
            if len(self._seed) == self.period:
                self.value = float(np.mean(self._seed))
            return self.value
        self.value = self.alpha * x + (1.0 - self.alpha) * self.value
        return self.value


class _WilderState:
    def __init__(self, period: int):
        self.period = period
        self._gains: list[float] = []
        self._losses: list[float] = []
        self.avg_gain = np.nan
        self.avg_loss = np.nan

    def update(self, change: float) -> float:
        gain, loss = max(change, 0.0), max(-change, 0.0)
        if len(self._gains) < self.period:
            self._gains.append(gain)
            self._losses.append(loss)
            if len(self._gains) < self.period:
                return np.nan
            self.avg_gain = float(np.mean(self._gains))
            self.avg_loss = float(np.mean(self._losses))
        else:
            self.avg_gain = (self.avg_gain * (self.period - 1) + gain) / self.period
            self.avg_loss = (self.avg_loss * (self.period - 1) + loss) / self.period
        return _rsi_value(self.avg_gain, self.avg_loss)


class IndicatorStream:
    """Incremental indicator engine: feed one bar at a time.

    After ``n`` updates the returned values equal row ``n-1`` of
    ``compute_indicators`` over the same bars.
    """

    def __init__(self, config: IndicatorConfig | None = None):
        self.config = config or IndicatorConfig()
        cfg = self.config
        longest = max(*cfg.ma_periods, cfg.bb_period)
        self._closes: deque[float] = deque(maxlen=longest)
        self._fast = _EmaState(cfg.macd_fast)
        self._slow = _EmaState(cfg.macd_slow)
        self._signal = _EmaState(cfg.macd_signal)
        self._rsi = {p: _WilderState(p) for p in cfg.rsi_periods}
        self._flows: deque[tuple[float, float]] = deque(maxlen=cfg.mfi_period)
        self._prev_close: float | None = None
        self._prev_typical: float | None = None
        self._obv = 0.0
        self.count = 0

    def update(self, high: float, low: float, close: float, volume: float) -> dict[str, float]:
        cfg = self.config
        out: dict[str, float] = {}
        self._closes.append(close)
        window = np.array(self._closes)
        for p in cfg.ma_periods:
            out[f"ma_{p}"] = float(window[-p:].mean()) if window.shape[0] >= p else np.nan

        line = self._fast.update(close) - self._slow.update(close)
        signal = self._signal.update(line)
        out["macd_line"], out["macd_signal"], out["macd_hist"] = line, signal, line - signal

        typical = (high + low + close) / 3.0
        if self._prev_close is None:
            for p in cfg.rsi_periods:
                out[f"rsi_{p}"] = np.nan
        else:
            change = close - self._prev_close
            for p in cfg.rsi_periods:
                out[f"rsi_{p}"] = self._rsi[p].update(change)
            if close > self._prev_close:
                self._obv += volume
            elif close < self._prev_close:
                self._obv -= volume
            flow = typical * volume
            delta = typical - self._prev_typical
            self._flows.append((flow if delta > 0 else 0.0, flow if delta < 0 else 0.0))

        if len(self._flows) == cfg.mfi_period:
            flows = np.array(self._flows)
            pos, neg = flows[:, 0].sum(), flows[:, 1].sum()
            total = pos + neg
            out[f"mfi_{cfg.mfi_period}"] = 100.0 * pos / total if total > 0 else 50.0
        else:
            out[f"mfi_{cfg.mfi_period}"] = np.nan
        out["obv"] = self._obv

        if window.shape[0] >= cfg.bb_period:
            band = window[-cfg.bb_period:]
            mean = band.mean()
            offset = cfg.bb_width * band.std()
            out["bb_upper"], out["bb_mid"], out["bb_lower"] = mean + offset, mean, mean - offset
        else:
            out["bb_upper"] = out["bb_mid"] = out["bb_lower"] = np.nan

        self._prev_close = close
        self._prev_typical = typical
        self.count += 1
        return {name: float(out[name]) for name in indicator_columns(cfg)}
