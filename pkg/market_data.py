"""Market data: OHLCV bars and the Fear & Greed index.

Parses the two raw sources (Yahoo-style OHLCV CSV export and the alternative.me
Fear & Greed JSON document), joins them by UTC calendar day into an
``AlignedDataset``, summarizes columns (mean, spread, quartiles) and
persists datasets as CSV.

The persisted CSV layout is::

    date,open,high,low,close,volume,fng[,indicator columns...]

Missing values (the indicator warmup prefix) are written as empty fields.
"""

from __future__ import annotations

import io
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

import storage

logger = logging.getLogger(__name__)

OHLCV_COLUMNS = ("open", "high", "low", "close", "volume")
BASE_COLUMNS = OHLCV_COLUMNS + ("fng",)
MISSING_TOKEN = ""

# Yahoo Finance export header; "Adj Close" is accepted and ignored.
_CSV_FIELDS = {"Date": "date", "Open": "open", "High": "high", "Low": "low", "Close": "close", "Volume": "volume"}
_NULL_TOKENS = {"null"}
_PARSER_LINE = re.compile(r"\bline (\d+)")


class DataFormatError(ValueError):
    """Raised when a raw input row or document is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class AlignmentError(ValueError):
    """Raised when bars and sentiment cannot be joined."""


class SchemaError(ValueError):
    """Raised when a dataset's columns do not match the expected layout."""


@dataclass(frozen=True)
class Bar:
    """One daily OHLCV observation."""

    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        if min(self.open, self.high, self.low, self.close) <= 0:
            raise ValueError(f"{self.date}: prices must be strictly positive")
        if self.volume < 0:
            raise ValueError(f"{self.date}: volume must be nonnegative")
        if not (self.low <= self.open <= self.high and self.low <= self.close <= self.high):
            raise ValueError(
                f"{self.date}: expected low <= open/close <= high, got "
                f"o={self.open} h={self.high} l={self.low} c={self.close}"
            )


@dataclass(frozen=True)
class SentimentPoint:
    """One daily Fear & Greed reading."""

    date: date
    value: int
    classification: str = ""

    def __post_init__(self):
        if not 0 <= self.value <= 100:
            raise ValueError(f"{self.date}: sentiment value {self.value} outside 0-100")


@dataclass
class OhlcvParseResult:
    bars: list[Bar]
    skipped_rows: int = 0


@dataclass(eq=False)
class AlignedDataset:
    """Date-joined bars, sentiment and (optionally) indicator columns.

    ``frame`` is indexed by a DatetimeIndex named ``date`` with float columns
    ``BASE_COLUMNS`` followed by indicator columns. ``warmup`` is the number of
    leading rows whose indicator values are missing (NaN).
    """

    frame: pd.DataFrame
    warmup: int = 0
    dropped_bars: int = 0
    dropped_sentiment: int = 0

    def __post_init__(self):
        index = self.frame.index
        if not index.is_unique or not index.is_monotonic_increasing:
            raise SchemaError("dataset dates must be strictly increasing")
        if list(self.frame.columns[: len(BASE_COLUMNS)]) != list(BASE_COLUMNS):
            raise SchemaError(f"dataset must start with columns {list(BASE_COLUMNS)}")

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def columns(self) -> list[str]:
        return list(self.frame.columns)

    @property
    def indicator_columns(self) -> list[str]:
        return self.columns[len(BASE_COLUMNS):]

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.frame.index

    def column(self, name: str) -> np.ndarray:
        if name not in self.frame.columns:
            raise KeyError(f"unknown column {name!r}")
        return self.frame[name].to_numpy(dtype=float)

    def between(self, start: date | None = None, end: date | None = None) -> "AlignedDataset":
        """Rows with start <= date <= end; the warmup boundary moves with the cut."""
        mask = np.ones(len(self.frame), dtype=bool)
        if start is not None:
            mask &= self.frame.index >= pd.Timestamp(start)
        if end is not None:
            mask &= self.frame.index <= pd.Timestamp(end)
        frame = self.frame.loc[mask].copy()
        warmup = 0
        if self.indicator_columns:
            first = int(np.argmax(mask)) if mask.any() else 0
            warmup = max(0, self.warmup - first)
        return AlignedDataset(frame, warmup=warmup)

    def equals(self, other: "AlignedDataset") -> bool:
        return (
            self.columns == other.columns
            and self.warmup == other.warmup
            and self.frame.index.equals(other.frame.index)
            and self.frame.equals(other.frame)
        )


@dataclass(frozen=True)
class ColumnStats:
    count: int
    mean: float
    std: float
    min: float
    q25: float
    q50: float
    q75: float
    max: float

    def to_dict(self) -> dict[str, float]:
        return {
            "count": self.count,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "25%": self.q25,
            "50%": self.q50,
            "75%": self.q75,
            "max": self.max,
        }


@dataclass
class SummaryStats:
    """Per-column distribution summary: count, mean, std, min, quartiles, max."""

    columns: dict[str, ColumnStats] = field(default_factory=dict)

    def __getitem__(self, name: str) -> ColumnStats:
        return self.columns[name]

    def to_dict(self) -> dict[str, dict[str, float]]:
        return {name: stats.to_dict() for name, stats in self.columns.items()}


def parse_ohlcv_csv(text: str) -> OhlcvParseResult:
    """Parse a Yahoo Finance daily export into date-sorted bars.

    Rows with ``null`` fields are skipped and counted. Any other malformed row,
    including one with an empty numeric field, raises ``DataFormatError`` with
    its 1-based line number.
    """
    try:
        raw = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DataFormatError("empty document, header row required", line=1)
    except pd.errors.ParserError as e:
        found = _PARSER_LINE.search(str(e))
        raise DataFormatError(f"malformed CSV: {e}", line=int(found.group(1)) if found else None)

    raw.columns = [str(c).strip() for c in raw.columns]
    missing = [name for name in _CSV_FIELDS if name not in raw.columns]
    if missing:
        raise DataFormatError(f"header is missing columns {missing}", line=1)

    bars: list[Bar] = []
    seen: dict[date, int] = {}
    skipped = 0
    for position, row in enumerate(raw[list(_CSV_FIELDS)].itertuples(index=False, name=None)):
        line = position + 2
        if any(not isinstance(v, str) for v in row):
            raise DataFormatError(f"row has fewer fields than the header: {list(row)}", line=line)
        values = [v.strip() for v in row]
        if any(v.lower() in _NULL_TOKENS for v in values[1:]):
            skipped += 1
            continue
        try:
            day = date.fromisoformat(values[0])
        except ValueError:
            raise DataFormatError(f"invalid date {values[0]!r}, expected YYYY-MM-DD", line=line)
        try:
            open_, high, low, close, volume = (float(v) for v in values[1:])
        except ValueError:
            raise DataFormatError(f"non-numeric field in {values[1:]}", line=line)
        if day in seen:
            raise DataFormatError(f"duplicate date {day} (first seen on line {seen[day]})", line=line)
        try:
            bars.append(Bar(day, open_, high, low, close, volume))
        except ValueError as e:
            raise DataFormatError(str(e), line=line)
        seen[day] = line

    if skipped:
        logger.warning("Skipped %d OHLCV rows with null fields.", skipped)
    bars.sort(key=lambda b: b.date)
    return OhlcvParseResult(bars=bars, skipped_rows=skipped)


def parse_fng_json(text: str) -> list[SentimentPoint]:
    """Parse a Fear & Greed API document into date-sorted sentiment points.

    Timestamps are UNIX seconds converted with UTC. Repeated days keep the
    first entry seen and log a warning.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"invalid JSON: {e}")
    if not isinstance(document, dict) or "data" not in document:
        raise DataFormatError("document has no 'data' key")
    entries = document["data"]
    if not isinstance(entries, list):
        raise DataFormatError("'data' must be an array")

    points: dict[date, SentimentPoint] = {}
    duplicates = 0
    for index, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise DataFormatError(f"entry {index} is not an object: {entry!r}")
        raw_value = entry.get("value")
        try:
            if isinstance(raw_value, bool):
                raise ValueError
            value = int(str(raw_value).strip())
        except (TypeError, ValueError):
            raise DataFormatError(f"entry {index} has non-integer value: {entry!r}")
        if not 0 <= value <= 100:
            raise DataFormatError(f"entry {index} value {value} outside 0-100: {entry!r}")
        try:
            ts = int(str(entry.get("timestamp")).strip())
            day = datetime.fromtimestamp(ts, tz=timezone.utc).date()
        except (TypeError, ValueError, OverflowError, OSError):
            raise DataFormatError(f"entry {index} has invalid timestamp: {entry!r}")
        if day in points:
            duplicates += 1
            continue
        points[day] = SentimentPoint(day, value, str(entry.get("value_classification", "")))

    if duplicates:
        logger.warning("Ignored %d repeated Fear & Greed days.", duplicates)
    return [points[d] for d in sorted(points)]


def align(bars: Sequence[Bar], sentiment: Sequence[SentimentPoint]) -> AlignedDataset:
    """Inner-join bars and sentiment on date."""
    by_date = {p.date: p.value for p in sentiment}
    bar_dates = {b.date for b in bars}
    rows = [b for b in bars if b.date in by_date]
    if not rows:
        raise AlignmentError(
            f"no common dates between {len(bars)} bars and {len(sentiment)} sentiment points"
        )
    rows.sort(key=lambda b: b.date)
    dropped_bars = len(bars) - len(rows)
    dropped_sentiment = sum(1 for d in by_date if d not in bar_dates)

    frame = pd.DataFrame(
        {
            "open": [b.open for b in rows],
            "high": [b.high for b in rows],
            "low": [b.low for b in rows],
            "close": [b.close for b in rows],
            "volume": [b.volume for b in rows],
            "fng": [float(by_date[b.date]) for b in rows],
        },
        index=pd.DatetimeIndex([pd.Timestamp(b.date) for b in rows], name="date"),
        dtype=float,
    )
    if dropped_bars or dropped_sentiment:
        logger.info(
            "Aligned %d rows; dropped %d bars and %d sentiment days without a match.",
            len(rows), dropped_bars, dropped_sentiment,
        )
    return AlignedDataset(frame, dropped_bars=dropped_bars, dropped_sentiment=dropped_sentiment)


def summarize(dataset: AlignedDataset, columns: Iterable[str] | None = None) -> SummaryStats:
    """Count, mean, sample std and linear-interpolated quartiles per column.

    Missing values are ignored. A single-value column reports std 0.
    """
    names = list(columns) if columns is not None else list(OHLCV_COLUMNS)
    stats = SummaryStats()
    for name in names:
        if name not in dataset.frame.columns:
            raise KeyError(f"unknown column {name!r}")
        values = dataset.column(name)
        values = values[~np.isnan(values)]
        if values.size == 0:
            raise ValueError(f"column {name!r} has no values")
        q25, q50, q75 = np.quantile(values, [0.25, 0.5, 0.75])
        stats.columns[name] = ColumnStats(
            count=int(values.size),
            mean=float(values.mean()),
            std=float(values.std(ddof=1)) if values.size > 1 else 0.0,
            min=float(values.min()),
            q25=float(q25),
            q50=float(q50),
            q75=float(q75),
            max=float(values.max()),
        )
    return stats


def save_dataset(dataset: AlignedDataset, path: str) -> None:
    """Write the dataset as CSV; missing values become empty fields."""
    text = dataset.frame.to_csv(index_label="date", date_format="%Y-%m-%d", na_rep=MISSING_TOKEN)
    storage.write_text(path, text)


def load_dataset(path: str, indicator_columns: Sequence[str] | None = None) -> AlignedDataset:
    """Read a dataset written by ``save_dataset``.

    The header must be ``date``, the base columns, then either nothing or
    exactly ``indicator_columns`` (default: the default indicator set) in order.
    """
    if indicator_columns is None:
        from indicators import IndicatorConfig, indicator_columns as default_columns

        indicator_columns = default_columns(IndicatorConfig())

    header = list(pd.read_csv(path, nrows=0).columns)
    base = ["date", *BASE_COLUMNS]
    if header != base and header != base + list(indicator_columns):
        raise SchemaError(f"{path}: unexpected columns {header}, expected {base + list(indicator_columns)}")

    frame = pd.read_csv(
        path,
        index_col="date",
        parse_dates=["date"],
        dtype={name: float for name in header[1:]},
        float_precision="round_trip",
    )
    frame.index = pd.DatetimeIndex(frame.index, name="date")

    warmup = 0
    if len(header) > len(base):
        complete = frame[list(indicator_columns)].notna().all(axis=1).to_numpy()
        warmup = int(np.argmax(complete)) if complete.any() else len(frame)
        if not complete[warmup:].all():
            raise SchemaError(f"{path}: missing indicator values after the warmup boundary")
    return AlignedDataset(frame, warmup=warmup)
