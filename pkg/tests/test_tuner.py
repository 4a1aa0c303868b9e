"""Tests for grids, expanding-window CV and the grid search."""

import json

import numpy as np
import pandas as pd
import pytest

from featurizer import FeatureMatrix, fit_normalizer
from models import FitError, ModelSpec
from tuner import (
    GRIDS,
    CandidateScore,
    CvPlanError,
    TuneResult,
    best_params_table,
    derive_seed,
    evaluate_candidate,
    expand_grid,
    load_tune_result,
    make_cv_plan,
    mse,
    selected_candidates,
    tune,
    validation_mse_table,
)


def _matrix(n=48, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, 3))
    y = 100.0 + 50.0 * X[:, 0] - 20.0 * X[:, 1] + rng.normal(0.0, 0.5, n)
    dates = pd.date_range("2021-01-01", periods=n, freq="D")
    return FeatureMatrix(X, y, dates, ["a", "b", "c"])


def _score(family, mse_value, **params):
    return CandidateScore(ModelSpec(family, params), [mse_value])


class TestGrids:
    @pytest.mark.parametrize("family,size", [
        ("mlp", 36), ("xgb_variant", 54), ("gradient_boosting", 108),
        ("random_forest", 24), ("svr", 8), ("linear_regression", 1),
    ])
    def test_sizes(self, family, size):
        assert GRIDS[family].size == size
        assert len(expand_grid(family)) == size

    def test_order_is_declared_order(self):
        specs = expand_grid("svr")
        assert [s.hyperparameters["C"] for s in specs[:3]] == [0.001, 0.001, 0.01]
        assert [s.hyperparameters["kernel"] for s in specs[:2]] == ["linear", "rbf"]

    def test_mlp_grid_values(self):
        params = expand_grid("mlp")[0].hyperparameters
        assert params == {"max_iter": 250, "learning_rate_init": 0.01, "hidden_layer_sizes": (10, 10, 10),
                          "early_stopping": True}

    def test_overrides_and_fixed(self):
        specs = expand_grid("svr", overrides={"C": [5]}, fixed={"epsilon": 0.02}, seed=3)
        assert len(specs) == 2
        assert all(s.hyperparameters["C"] == 5 and s.hyperparameters["epsilon"] == 0.02 for s in specs)
        assert all(s.seed == 3 for s in specs)

    def test_list_overrides_become_tuples(self):
        specs = expand_grid("mlp", overrides={"hidden_layer_sizes": [[4, 4]], "max_iter": [5]})
        assert specs[0].hyperparameters["hidden_layer_sizes"] == (4, 4)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            expand_grid("lstm")

    def test_stable_across_calls(self):
        assert expand_grid("gradient_boosting") == expand_grid("gradient_boosting")


class TestCvPlan:
    def test_eight_samples(self):
        plan = make_cv_plan(8, 3)
        assert [(f.train, f.val) for f in plan.folds] == [
            (range(0, 2), range(2, 4)),
            (range(0, 4), range(4, 6)),
            (range(0, 6), range(6, 8)),
        ]

    def test_four_samples(self):
        plan = make_cv_plan(4, 3)
        assert [len(f.train) for f in plan.folds] == [1, 2, 3]
        assert all(len(f.val) == 1 for f in plan.folds)

    def test_remainder_goes_to_earliest_blocks(self):
        assert make_cv_plan(10, 3).boundaries() == [(3, 3, 6), (6, 6, 8), (8, 8, 10)]

    @pytest.mark.parametrize("n", range(10, 201))
    def test_no_leakage(self, n):
        plan = make_cv_plan(n, 3)
        previous_train = 0
        for fold in plan.folds:
            assert fold.train.start == 0
            assert max(fold.train) < min(fold.val)
            assert fold.val.start == fold.train.stop
            assert fold.train.stop > previous_train
            previous_train = fold.train.stop
        assert plan.folds[-1].val.stop == n

    def test_too_few_samples(self):
        with pytest.raises(CvPlanError):
            make_cv_plan(3, 3)

    def test_invalid_split_count(self):
        with pytest.raises(CvPlanError):
            make_cv_plan(10, 0)


class TestMse:
    def test_identical(self):
        assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_unit(self):
        assert mse([0.0, 0.0], [1.0, 1.0]) == 1.0

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(5)
        a, b = rng.normal(size=50), rng.normal(size=50)
        assert mse(a, b) == pytest.approx(sum((x - y) ** 2 for x, y in zip(a, b)) / 50, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            mse([], [])


class TestSeeds:
    def test_streams_differ(self):
        seeds = {derive_seed(42, family, stream) for family in ("svr", "mlp") for stream in range(4)}
        assert len(seeds) == 8

    def test_reproducible(self):
        assert derive_seed(42, "mlp", 1) == derive_seed(42, "mlp", 1)
        assert derive_seed(42, "mlp", 1) != derive_seed(43, "mlp", 1)



class TestEvaluateCandidate:
    def test_linear_regression_fold_scores(self):
        raw = _matrix()
        score = evaluate_candidate(ModelSpec("linear_regression"), raw, make_cv_plan(raw.n_samples, 3))
        assert score.ok
        assert len(score.fold_mse) == 3
        assert score.mean_mse == pytest.approx(np.mean(score.fold_mse))
        assert score.mean_mse < 0.05

    def test_mean_predictor_matches_hand_computation(self):
        raw = _matrix(n=12)
        plan = make_cv_plan(12, 3)
        score = evaluate_candidate(ModelSpec("gradient_boosting", {"n_estimators": 0}), raw, plan)
        expected = []
        for fold in plan.folds:
            normalizer = fit_normalizer(raw, fold.train)
            span = normalizer.target_max - normalizer.target_min
            y_train = (raw.y[fold.train.start:fold.train.stop] - normalizer.target_min) / span
            y_val = np.clip((raw.y[fold.val.start:fold.val.stop] - normalizer.target_min) / span, 0.0, 1.0)
            expected.append(np.mean((y_val - y_train.mean()) ** 2))
        np.testing.assert_allclose(score.fold_mse, expected, rtol=1e-10)

    def test_validation_rows_do_not_change_scores_of_earlier_folds(self):
        raw = _matrix()
        plan = make_cv_plan(raw.n_samples, 3)
        clean = evaluate_candidate(ModelSpec("linear_regression"), raw, plan)
        y = raw.y.copy()
        y[plan.folds[-1].val.start:] *= 10.0
        corrupted = FeatureMatrix(raw.X, y, raw.sample_dates, raw.feature_names)
        dirty = evaluate_candidate(ModelSpec("linear_regression"), corrupted, plan)
        assert dirty.fold_mse[:2] == clean.fold_mse[:2]
        assert dirty.fold_mse[2] != clean.fold_mse[2]

    def test_fit_failure_is_captured(self):
        raw = _matrix()
        score = evaluate_candidate(ModelSpec("svr", {"C": -1.0}), raw, make_cv_plan(raw.n_samples, 3))
        assert not score.ok
        assert "C must be positive" in score.error
        assert score.mean_mse == float("inf")

    def test_plan_must_match_matrix(self):
        with pytest.raises(CvPlanError):
            evaluate_candidate(ModelSpec("linear_regression"), _matrix(n=20), make_cv_plan(30, 3))


class TestTune:
    def test_singleton_grid(self):
        raw = _matrix()
        result = tune("linear_regression", raw, make_cv_plan(raw.n_samples, 3), seed=1)
        assert len(result.scores) == 1
        assert result.best_spec == ModelSpec("linear_regression", {}, 1)

    def test_sorted_and_best_is_minimum(self):
        raw = _matrix()
        result = tune("svr", raw, make_cv_plan(raw.n_samples, 3), overrides={"C": [0.01, 1]}, fixed={"epsilon": 0.01})
        means = [s.mean_mse for s in result.scores]
        assert means == sorted(means)
        assert result.best.mean_mse == min(means)
        assert len(result.scores) == 4

    def test_same_seed_same_table(self):
        raw = _matrix()
        plan = make_cv_plan(raw.n_samples, 3)
        overrides = {"n_estimators": [3], "max_leaf_nodes": [5], "min_samples_leaf": [1, 3]}
        first = tune("random_forest", raw, plan, seed=7, overrides=overrides)
        second = tune("random_forest", raw, plan, seed=7, overrides=overrides)
        assert first.to_dict() == second.to_dict()

    def test_failed_candidates_excluded(self, caplog):
        raw = _matrix()
        result = tune("svr", raw, make_cv_plan(raw.n_samples, 3), overrides={"C": [1, -1], "kernel": ["linear"]})
        assert [s.spec.hyperparameters["C"] for s in result.scores] == [1]
        assert len(result.failed) == 1
        assert "1 of 2 candidates failed" in caplog.text

    def test_all_candidates_failing_raises(self):
        raw = _matrix()
        with pytest.raises(FitError, match="all 2 svr candidates failed"):
            tune("svr", raw, make_cv_plan(raw.n_samples, 3), overrides={"C": [-1]})

    def test_parallel_matches_serial(self):
        raw = _matrix()
        plan = make_cv_plan(raw.n_samples, 3)
        overrides = {"C": [0.1, 1], "kernel": ["linear"]}
        serial = tune("svr", raw, plan, overrides=overrides)
        parallel = tune("svr", raw, plan, overrides=overrides, max_workers=2)
        assert serial.to_dict() == parallel.to_dict()


class TestTuneResult:
    def _svr_result(self):
        return TuneResult("svr", [
            _score("svr", 0.1, C=1, kernel="rbf"),
            _score("svr", 0.2, C=0.1, kernel="rbf"),
            _score("svr", 0.3, C=1, kernel="linear"),
        ])

    def test_svr_split_by_kernel(self):
        rows = selected_candidates([self._svr_result(), TuneResult("linear_regression", [_score("linear_regression", 0.5)])])
        assert [label for label, _ in rows] == ["svr_linear", "svr_rbf", "linear_regression"]
        assert rows[1][1].mean_mse == 0.1

    def test_best_where(self):
        result = self._svr_result()
        assert result.best_where(kernel="linear").mean_mse == 0.3
        assert result.best_where(kernel="poly") is None

    def test_tables(self):
        results = [self._svr_result(), TuneResult("linear_regression", [_score("linear_regression", 0.5)])]
        params = best_params_table(results)
        assert list(params.columns) == ["model", "parameters"]
        assert json.loads(params.loc[0, "parameters"]) == {"C": 1, "kernel": "linear"}
        mse_table = validation_mse_table(results)
        assert mse_table["mse"].tolist() == [0.3, 0.1, 0.5]

    def test_frame_columns(self):
        frame = self._svr_result().to_frame()
        assert list(frame.columns) == ["rank", "family", "hyperparameters", "fold_1_mse", "mean_mse"]
        assert frame["rank"].tolist() == [1, 2, 3]

    def test_json_round_trip(self, tmp_path):
        result = self._svr_result()
        result.failed.append(CandidateScore(ModelSpec("svr", {"C": -1}), error="ValueError: bad C"))
        path = str(tmp_path / "svr.json")
        result.save_json(path)
        loaded = load_tune_result(path)
        assert loaded.to_dict() == result.to_dict()
        assert loaded.best_spec == result.best_spec

    def test_csv_written(self, tmp_path):
        path = tmp_path / "svr.csv"
        self._svr_result().save_csv(str(path))
        assert path.read_text().splitlines()[0] == "rank,family,hyperparameters,fold_1_mse,mean_mse"
