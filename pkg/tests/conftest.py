"""Shared synthetic market fixtures."""

import json
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest

from indicators import attach_indicators
from market_data import align, parse_fng_json, parse_ohlcv_csv


def random_walk(n, seed=0, start_price=100.0):
    """Positive OHLCV arrays following a geometric random walk."""
    rng = np.random.default_rng(seed)
    close = start_price * np.exp(np.cumsum(rng.normal(0.0, 0.02, n)))
    open_ = np.concatenate([[start_price], close[:-1]])
    high = np.maximum(open_, close) * (1.0 + rng.uniform(0.0, 0.01, n))
    low = np.minimum(open_, close) * (1.0 - rng.uniform(0.0, 0.01, n))
    volume = rng.uniform(1_000.0, 10_000.0, n)
    return open_, high, low, close, volume


def make_ohlcv_csv(n=120, start=date(2021, 1, 1), seed=0):
    open_, high, low, close, volume = random_walk(n, seed)
    lines = ["Date,Open,High,Low,Close,Adj Close,Volume"]
    for i in range(n):
        day = start + timedelta(days=i)
        fields = [repr(float(v)) for v in (open_[i], high[i], low[i], close[i], close[i], volume[i])]
        lines.append(",".join([day.isoformat(), *fields]))
    return "\n".join(lines) + "\n"


def fng_timestamp(day):
    return int(datetime(day.year, day.month, day.day, tzinfo=timezone.utc).timestamp())


def make_fng_json(n=120, start=date(2021, 1, 1), seed=1):
    rng = np.random.default_rng(seed)
    data = [
        {
            "value": str(int(v)),
            "value_classification": "Neutral",
            "timestamp": str(fng_timestamp(start + timedelta(days=i))),
        }
        for i, v in enumerate(rng.integers(0, 101, n))
    ]
    # The API lists the newest day first.
    return json.dumps({"name": "Fear and Greed Index", "data": data[::-1]})


@pytest.fixture
def ohlcv_text():
    return make_ohlcv_csv()


@pytest.fixture
def fng_text():
    return make_fng_json()


@pytest.fixture
def base_dataset(ohlcv_text, fng_text):
    return align(parse_ohlcv_csv(ohlcv_text).bars, parse_fng_json(fng_text))


@pytest.fixture
def full_dataset(base_dataset):
    return attach_indicators(base_dataset)


@pytest.fixture
def input_files(tmp_path):
    """OHLCV and Fear & Greed files covering 2021-01-01 .. 2021-07-19."""
    ohlcv = tmp_path / "btc.csv"
    fng = tmp_path / "fng.json"
    ohlcv.write_text(make_ohlcv_csv(n=200))
    fng.write_text(make_fng_json(n=200))
    return str(ohlcv), str(fng)
