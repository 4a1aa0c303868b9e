"""Tests for market data parsing, alignment and persistence."""

import json
from datetime import date, timedelta

import numpy as np
import pandas as pd
import pytest

from tests.conftest import fng_timestamp, make_fng_json, make_ohlcv_csv
from indicators import IndicatorConfig, indicator_columns
from market_data import (
    BASE_COLUMNS,
    AlignmentError,
    Bar,
    DataFormatError,
    SchemaError,
    SentimentPoint,
    align,
    load_dataset,
    parse_fng_json,
    parse_ohlcv_csv,
    save_dataset,
    summarize,
)

HEADER = "Date,Open,High,Low,Close,Adj Close,Volume"


def _csv(*rows):
    return "\n".join([HEADER, *rows]) + "\n"


def _fng(*entries):
    return json.dumps({"data": [
        {"value": str(v), "value_classification": "Fear", "timestamp": str(fng_timestamp(d))}
        for d, v in entries
    ]})


class TestParseOhlcv:
    def test_parses_rows(self):
        result = parse_ohlcv_csv(_csv(
            "2022-01-01,10,12,9,11,11,100",
            "2022-01-02,11,13,10,12,12,200",
        ))
        assert result.skipped_rows == 0
        assert [b.date for b in result.bars] == [date(2022, 1, 1), date(2022, 1, 2)]
        assert result.bars[1] == Bar(date(2022, 1, 2), 11.0, 13.0, 10.0, 12.0, 200.0)

    def test_output_sorted_by_date(self):
        result = parse_ohlcv_csv(_csv(
            "2022-01-03,10,12,9,11,11,100",
            "2022-01-01,10,12,9,11,11,100",
        ))
        assert [b.date.day for b in result.bars] == [1, 3]

    def test_null_rows_skipped_and_counted(self):
        result = parse_ohlcv_csv(_csv(
            "2022-01-01,10,12,9,11,11,100",
            "2022-01-02,null,null,null,null,null,null",
            "2022-01-03,10,12,9,11,11,100",
        ))
        assert len(result.bars) == 2
        assert result.skipped_rows == 1

    def test_missing_header_column(self):
        with pytest.raises(DataFormatError) as exc:
            parse_ohlcv_csv("Date,Open,High,Low,Close\n2022-01-01,1,1,1,1\n")
        assert exc.value.line == 1

    def test_non_numeric_field_reports_line(self):
        with pytest.raises(DataFormatError) as exc:
            parse_ohlcv_csv(_csv(
                "2022-01-01,10,12,9,11,11,100",
                "2022-01-02,10,abc,9,11,11,100",
            ))
        assert exc.value.line == 3
        assert "line 3" in str(exc.value)

    def test_empty_numeric_field_rejected(self):
        with pytest.raises(DataFormatError, match="non-numeric") as exc:
            parse_ohlcv_csv(_csv(
                "2022-01-01,10,12,9,11,11,100",
                "2022-01-02,10,12,9,,11,100",
            ))
        assert exc.value.line == 3

    def test_extra_field_reports_line(self):
        with pytest.raises(DataFormatError) as exc:
            parse_ohlcv_csv(_csv(
                "2022-01-01,10,12,9,11,11,100",
                "2022-01-02,10,12,9,11,11,100,7",
            ))
        assert exc.value.line == 3
        assert str(exc.value).startswith("line 3:")

    def test_bad_date(self):
        with pytest.raises(DataFormatError, match="invalid date"):
            parse_ohlcv_csv(_csv("01/02/2022,10,12,9,11,11,100"))

    def test_duplicate_date(self):
        with pytest.raises(DataFormatError, match="duplicate date"):
            parse_ohlcv_csv(_csv(
                "2022-01-01,10,12,9,11,11,100",
                "2022-01-01,10,12,9,11,11,100",
            ))

    def test_inconsistent_bar(self):
        with pytest.raises(DataFormatError, match="low <= open/close <= high"):
            parse_ohlcv_csv(_csv("2022-01-01,10,12,9,13,13,100"))

    def test_empty_document(self):
        with pytest.raises(DataFormatError):
            parse_ohlcv_csv("")

    def test_generated_fixture(self):
        assert len(parse_ohlcv_csv(make_ohlcv_csv(n=50)).bars) == 50


class TestParseFng:
    def test_newest_first_is_sorted(self):
        points = parse_fng_json(_fng((date(2022, 1, 2), 40), (date(2022, 1, 1), 25)))
        assert points == [
            SentimentPoint(date(2022, 1, 1), 25, "Fear"),
            SentimentPoint(date(2022, 1, 2), 40, "Fear"),
        ]

    def test_duplicate_day_keeps_first(self):
        points = parse_fng_json(_fng((date(2022, 1, 1), 10), (date(2022, 1, 1), 90)))
        assert len(points) == 1
        assert points[0].value == 10

    def test_value_out_of_range(self):
        with pytest.raises(DataFormatError, match="outside 0-100"):
            parse_fng_json(_fng((date(2022, 1, 1), 101)))

    def test_non_integer_value(self):
        doc = json.dumps({"data": [{"value": "high", "timestamp": "1640995200"}]})
        with pytest.raises(DataFormatError, match="non-integer"):
            parse_fng_json(doc)

    def test_missing_data_key(self):
        with pytest.raises(DataFormatError):
            parse_fng_json(json.dumps({"metadata": {}}))

    def test_invalid_json(self):
        with pytest.raises(DataFormatError, match="invalid JSON"):
            parse_fng_json("{not json")

    def test_timestamps_use_utc(self):
        # 2022-01-01T23:30:00Z must stay on Jan 1 regardless of the local zone.
        doc = json.dumps({"data": [{"value": "50", "timestamp": str(fng_timestamp(date(2022, 1, 1)) + 84600)}]})
        assert parse_fng_json(doc)[0].date == date(2022, 1, 1)


class TestAlign:
    def test_inner_join_counts(self):
        bars = parse_ohlcv_csv(make_ohlcv_csv(n=10, start=date(2022, 1, 1))).bars
        sentiment = parse_fng_json(make_fng_json(n=10, start=date(2022, 1, 4)))
        dataset = align(bars, sentiment)
        assert len(dataset) == 7
        assert dataset.dropped_bars == 3
        assert dataset.dropped_sentiment == 3
        assert dataset.columns == list(BASE_COLUMNS)
        assert dataset.dates[0] == pd.Timestamp("2022-01-04")

    def test_no_overlap(self):
        bars = parse_ohlcv_csv(make_ohlcv_csv(n=5, start=date(2022, 1, 1))).bars
        sentiment = parse_fng_json(make_fng_json(n=5, start=date(2023, 1, 1)))
        with pytest.raises(AlignmentError):
            align(bars, sentiment)

    def test_sentiment_values_carried(self, base_dataset, fng_text):
        expected = {p.date: p.value for p in parse_fng_json(fng_text)}
        first = base_dataset.dates[0].date()
        assert base_dataset.column("fng")[0] == expected[first]

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_date_set_intersection(self, seed):
        rng = np.random.default_rng(seed)
        origin = date(2022, 1, 1)
        bar_days = sorted(origin + timedelta(days=int(d)) for d in rng.choice(60, size=35, replace=False))
        fng_days = [origin + timedelta(days=int(d)) for d in rng.choice(60, size=35, replace=False)]
        bars = [Bar(d, 10.0, 12.0, 9.0, 11.0, 100.0) for d in bar_days]
        sentiment = [SentimentPoint(d, int(rng.integers(0, 101)), "Neutral") for d in fng_days]

        common = sorted(set(bar_days) & set(fng_days))
        dataset = align(bars, sentiment)
        assert [t.date() for t in dataset.dates] == common
        assert dataset.dropped_bars == len(bar_days) - len(common)
        assert dataset.dropped_sentiment == len(fng_days) - len(common)
        by_day = {p.date: p.value for p in sentiment}
        np.testing.assert_array_equal(dataset.column("fng"), [by_day[d] for d in common])


class TestSummarize:
    def test_matches_pandas_describe(self, base_dataset):
        stats = summarize(base_dataset)
        described = base_dataset.frame["close"].describe()
        close = stats["close"]
        assert close.count == int(described["count"])
        for key, attr in (("mean", "mean"), ("std", "std"), ("min", "min"), ("25%", "q25"),
                          ("50%", "q50"), ("75%", "q75"), ("max", "max")):
            assert getattr(close, attr) == pytest.approx(described[key], rel=1e-12)

    def test_default_columns_are_ohlcv(self, base_dataset):
        assert list(summarize(base_dataset).to_dict()) == ["open", "high", "low", "close", "volume"]

    def test_single_value_std_zero(self, base_dataset):
        one = base_dataset.between(base_dataset.dates[0].date(), base_dataset.dates[0].date())
        assert summarize(one, ["close"])["close"].std == 0.0

    def test_ignores_warmup_nans(self, full_dataset):
        stats = summarize(full_dataset, ["ma_30"])
        assert stats["ma_30"].count == len(full_dataset) - full_dataset.warmup

    def test_unknown_column(self, base_dataset):
        with pytest.raises(KeyError):
            summarize(base_dataset, ["marketcap"])


class TestBetween:
    def test_inclusive_bounds(self, base_dataset):
        start, end = base_dataset.dates[5].date(), base_dataset.dates[9].date()
        assert len(base_dataset.between(start, end)) == 5

    def test_warmup_shifts_with_cut(self, full_dataset):
        cut = full_dataset.between(full_dataset.dates[10].date(), None)
        assert cut.warmup == full_dataset.warmup - 10
        later = full_dataset.between(full_dataset.dates[50].date(), None)
        assert later.warmup == 0


class TestPersistence:
    def test_round_trip_with_indicators(self, full_dataset, tmp_path):
        path = str(tmp_path / "dataset.csv")
        save_dataset(full_dataset, path)
        loaded = load_dataset(path)
        assert loaded.equals(full_dataset)
        assert loaded.warmup == full_dataset.warmup

    def test_round_trip_base_only(self, base_dataset, tmp_path):
        path = str(tmp_path / "dataset.csv")
        save_dataset(base_dataset, path)
        assert load_dataset(path).equals(base_dataset)

    def test_warmup_written_as_empty_fields(self, full_dataset, tmp_path):
        path = tmp_path / "dataset.csv"
        save_dataset(full_dataset, str(path))
        second_line = path.read_text().splitlines()[1]
        assert second_line.endswith(",,")

    def test_unexpected_header(self, tmp_path):
        path = tmp_path / "dataset.csv"
        path.write_text("date,open,close\n2022-01-01,1,2\n")
        with pytest.raises(SchemaError):
            load_dataset(str(path))

    def test_custom_indicator_columns(self, base_dataset, tmp_path):
        from indicators import attach_indicators

        config = IndicatorConfig(ma_periods=(5,), rsi_periods=(6,))
        dataset = attach_indicators(base_dataset, config)
        path = str(tmp_path / "dataset.csv")
        save_dataset(dataset, path)
        loaded = load_dataset(path, indicator_columns(config))
        assert loaded.equals(dataset)
        assert np.isnan(loaded.column("ma_5")[0])
