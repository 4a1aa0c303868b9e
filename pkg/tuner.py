"""Grid search under expanding-window cross-validation.

Each candidate is scored by the mean validation MSE over the folds, in
normalized target units. The normalizer is refitted on every fold's training
rows so validation ranges never leak into the scaling.
"""

from __future__ import annotations

import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd

import storage
from featurizer import FeatureMatrix, fit_normalizer, transform
from models import MODELS, FitError, ModelSpec, fit_model

logger = logging.getLogger(__name__)


class CvPlanError(ValueError):
    """Raised when a cross-validation plan cannot be built."""


@dataclass(frozen=True)
class GridDefinition:
    family: str
    axes: tuple[tuple[str, tuple], ...] = ()

    @property
    def size(self) -> int:
        return int(np.prod([len(values) for _, values in self.axes])) if self.axes else 1

    def points(self) -> list[dict[str, Any]]:
        names = [name for name, _ in self.axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in self.axes))]

    def with_overrides(self, overrides: dict[str, Sequence] | None) -> "GridDefinition":
        """Replace (or append) axes; list values become tuples so they stay hashable."""
        if not overrides:
            return self
        axes = dict(self.axes)
        for name, values in overrides.items():
            axes[name] = tuple(tuple(v) if isinstance(v, list) else v for v in values)
        return GridDefinition(self.family, tuple(axes.items()))


GRIDS: dict[str, GridDefinition] = {
    "mlp": GridDefinition("mlp", (
        ("max_iter", (250, 500, 1000)),
        ("learning_rate_init", (0.01, 0.001)),
        ("hidden_layer_sizes", (
            (10, 10, 10), (25, 25, 25), (50, 50, 50),
            (10, 10, 10, 10, 10), (25, 25, 25, 25, 25), (50, 50, 50, 50, 50),
        )),
        ("early_stopping", (True,)),
    )),
    "xgb_variant": GridDefinition("xgb_variant", (
        ("booster", ("gbtree", "gblinear", "dart")),
        ("max_delta_step", (0, 1, 5)),
        ("lambda", (1, 3, 5, 10, 50, 100)),
    )),
    "gradient_boosting": GridDefinition("gradient_boosting", (
        ("criterion", ("friedman_mse",)),
        ("n_estimators", (150,)),
        ("learning_rate", (0.001, 0.01, 0.1)),
        ("max_depth", (3, 5, 10)),
        ("max_leaf_nodes", (5, 10, 35, None)),
        ("min_samples_leaf", (1, 3, 5)),
    )),
    "random_forest": GridDefinition("random_forest", (
        ("criterion", ("squared_error", "poisson")),
        ("n_estimators", (150,)),
        ("max_leaf_nodes", (5, 10, 35, None)),
        ("min_samples_leaf", (1, 3, 5)),
    )),
    "svr": GridDefinition("svr", (
        ("C", (0.001, 0.01, 0.1, 1)),
        ("kernel", ("linear", "rbf")),
    )),
    "linear_regression": GridDefinition("linear_regression"),
}


def expand_grid(
    family: str,
    overrides: dict[str, Sequence] | None = None,
    fixed: dict[str, Any] | None = None,
    seed: int = 0,
) -> list[ModelSpec]:
    """Candidates in grid order: axes as declared, values as listed.

    ``fixed`` adds hyperparameters shared by every point (e.g. the SVR epsilon).
    """
    if family not in GRIDS:
        raise ValueError(f"no grid for model family {family!r}")
    grid = GRIDS[family].with_overrides(overrides)
    return [ModelSpec(family, {**point, **(fixed or {})}, seed) for point in grid.points()]


def derive_seed(root_seed: int, family: str, stream: int = 0) -> int:
    """Per-family, per-fold seed fanned out from the run's root seed."""
    family_index = list(MODELS).index(family)
    return int(np.random.SeedSequence([root_seed, family_index, stream]).generate_state(1)[0])


@dataclass(frozen=True)
class Fold:
    index: int
    train: range
    val: range


@dataclass(frozen=True)
class CvPlan:
    n_samples: int
    n_splits: int
    folds: tuple[Fold, ...]

    def boundaries(self) -> list[tuple[int, int, int]]:
        """``(train_end, val_start, val_end)`` per fold, ends exclusive."""
        return [(f.train.stop, f.val.start, f.val.stop) for f in self.folds]


def make_cv_plan(n_samples: int, n_splits: int = 3) -> CvPlan:
    """Split ``n_samples`` into ``n_splits + 1`` contiguous blocks (remainder to the
    earliest ones); fold k trains on blocks 0..k and validates on block k+1."""
    if n_splits < 1:
        raise CvPlanError(f"n_splits must be >= 1, got {n_splits}")
    n_blocks = n_splits + 1
    if n_samples < n_blocks:
        raise CvPlanError(f"{n_samples} samples cannot form {n_blocks} blocks for {n_splits} splits")
    base, remainder = divmod(n_samples, n_blocks)
    sizes = [base + 1 if i < remainder else base for i in range(n_blocks)]
    edges = np.concatenate([[0], np.cumsum(sizes)]).astype(int).tolist()
    folds = tuple(
        Fold(k, range(0, edges[k + 1]), range(edges[k + 1], edges[k + 2]))
        for k in range(n_splits)
    )
    return CvPlan(n_samples, n_splits, folds)


def mse(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ValueError(f"mse needs equal non-empty shapes, got {y_true.shape} and {y_pred.shape}")
    return float(np.mean((y_true - y_pred) ** 2))


@dataclass
class CandidateScore:
    spec: ModelSpec
    fold_mse: list[float] = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.fold_mse)) if self.ok and self.fold_mse else float("inf")


def evaluate_candidate(spec: ModelSpec, raw: FeatureMatrix, plan: CvPlan) -> CandidateScore:
    """Fit and score ``spec`` on every fold; fit failures are captured, not raised."""
    if plan.n_samples != raw.n_samples:
        raise CvPlanError(f"plan covers {plan.n_samples} samples, matrix has {raw.n_samples}")
    score = CandidateScore(spec)
    try:
        for fold in plan.folds:
            normalizer = fit_normalizer(raw, fold.train)
            train = transform(raw.take(fold.train), normalizer)
            val = transform(raw.take(fold.val), normalizer)
            model = fit_model(spec.with_seed(derive_seed(spec.seed, spec.family, fold.index)), train.X, train.y)
            score.fold_mse.append(mse(val.y, model.predict(val.X)))
    except (FitError, ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
        score.error = f"{type(e).__name__}: {e}"
    return score


@dataclass
class TuneResult:
    family: str
    scores: list[CandidateScore]
    failed: list[CandidateScore] = field(default_factory=list)

    @property
    def best(self) -> CandidateScore:
        return self.scores[0]

    @property
    def best_spec(self) -> ModelSpec:
        return self.best.spec

    def best_where(self, **params) -> CandidateScore | None:
        for score in self.scores:
            if all(score.spec.hyperparameters.get(k) == v for k, v in params.items()):
                return score
        return None

    def to_frame(self) -> pd.DataFrame:
        n_folds = max((len(s.fold_mse) for s in self.scores), default=0)
        rows = []
        for rank, score in enumerate(self.scores, start=1):
            row = {
                "rank": rank,
                "family": self.family,
                "hyperparameters": json.dumps(score.spec.to_dict()["hyperparameters"], sort_keys=True),
            }
            row.update({f"fold_{i + 1}_mse": score.fold_mse[i] for i in range(n_folds)})
            row["mean_mse"] = score.mean_mse
            rows.append(row)
        columns = ["rank", "family", "hyperparameters",
                   *(f"fold_{i + 1}_mse" for i in range(n_folds)), "mean_mse"]
        return pd.DataFrame(rows, columns=columns)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n_candidates": len(self.scores) + len(self.failed),
            "n_failed": len(self.failed),
            "scores": [
                {"rank": rank, "spec": s.spec.to_dict(), "fold_mse": s.fold_mse, "mean_mse": s.mean_mse}
                for rank, s in enumerate(self.scores, start=1)
            ],
            "failed": [{"spec": s.spec.to_dict(), "error": s.error} for s in self.failed],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TuneResult":
        scores = [CandidateScore(ModelSpec.from_dict(s["spec"]), list(s["fold_mse"])) for s in data["scores"]]
        failed = [CandidateScore(ModelSpec.from_dict(s["spec"]), error=s["error"]) for s in data.get("failed", [])]
        return cls(data["family"], scores, failed)

    def save_json(self, path: str) -> None:
        storage.write_json(path, self.to_dict())

    def save_csv(self, path: str) -> None:
        storage.write_text(path, self.to_frame().to_csv(index=False))


def load_tune_result(path: str) -> TuneResult:
    return TuneResult.from_dict(storage.read_json(path))


def tune(
    family: str,
    raw: FeatureMatrix,
    plan: CvPlan,
    seed: int = 0,
    overrides: dict[str, Sequence] | None = None,
    fixed: dict[str, Any] | None = None,
    max_workers: int = 1,
) -> TuneResult:
    """Score every grid point of ``family`` on the raw (unnormalized) matrix."""
    candidates = expand_grid(family, overrides, fixed, seed)
    logger.info("Tuning %s: %d candidates x %d folds", family, len(candidates), plan.n_splits)
    if max_workers > 1 and len(candidates) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(evaluate_candidate, candidates, repeat(raw), repeat(plan)))
    else:
        results = [evaluate_candidate(spec, raw, plan) for spec in candidates]

    failed = [r for r in results if not r.ok]
    for r in failed:
        logger.warning("Candidate %s failed: %s", r.spec.label(), r.error)
    # Stable sort: equal scores keep grid order.
    scores = sorted((r for r in results if r.ok), key=lambda r: r.mean_mse)
    if not scores:
        raise FitError(f"all {len(candidates)} {family} candidates failed")
    if failed:
        logger.warning("%s: %d of %d candidates failed and were excluded", family, len(failed), len(candidates))
    logger.info("Best %s: %s (mean MSE %.6g)", family, scores[0].spec.label(), scores[0].mean_mse)
    return TuneResult(family, scores, failed)


def selected_candidates(results: Iterable[TuneResult]) -> list[tuple[str, CandidateScore]]:
    """One labelled winner per family; SVR yields one row per kernel."""
    rows = []
    for result in results:
        if result.family == "svr":
            for kernel in ("linear", "rbf"):
                best = result.best_where(kernel=kernel)
                if best is not None:
                    rows.append((f"svr_{kernel}", best))
        else:
            rows.append((result.family, result.best))
    return rows


def best_params_table(results: Iterable[TuneResult]) -> pd.DataFrame:
    rows = [
        {"model": label, "parameters": json.dumps(score.spec.to_dict()["hyperparameters"], sort_keys=True)}
        for label, score in selected_candidates(results)
    ]
    return pd.DataFrame(rows, columns=["model", "parameters"])


def validation_mse_table(results: Iterable[TuneResult]) -> pd.DataFrame:
    rows = [{"model": label, "mse": score.mean_mse} for label, score in selected_candidates(results)]
    return pd.DataFrame(rows, columns=["model", "mse"])
