"""BTC forecast pipeline -- command-line entry point.

Verbs: ingest, tune, train, simulate, report. Every artifact is written under
the configured output directory.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Sequence

import config as app_config
import reporting
import storage
from backtester import StrategyConfig, simulate_all
from featurizer import FeatureMatrix, build_samples, fit_normalizer, load_normalizer, save_normalizer, transform
from fng_client import FetchError, FngClient
from indicators import attach_indicators
from market_data import AlignedDataset, align, load_dataset, parse_fng_json, parse_ohlcv_csv, save_dataset, summarize
from models import ModelSpec, fit_model
from models.persistence import load_model, save_model
from tuner import (
    TuneResult,
    best_params_table,
    derive_seed,
    load_tune_result,
    make_cv_plan,
    selected_candidates,
    tune,
    validation_mse_table,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2


def _out(cfg: dict, *parts: str) -> str:
    return os.path.join(app_config.get_output_dir(cfg), *parts)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _load_run_dataset(cfg: dict) -> AlignedDataset:
    path = _out(cfg, reporting.DATASET_FILE)
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path} not found; run `ingest` first")
    return load_dataset(path)


def _training_samples(cfg: dict, raw: FeatureMatrix) -> FeatureMatrix:
    start, end = app_config.get_train_range(cfg)
    train = raw.between(start, end)
    if train.n_samples == 0:
        raise ValueError(f"no training samples between {start} and {end}")
    return train


def cmd_ingest(args, cfg: dict) -> int:
    ohlcv = parse_ohlcv_csv(_read_text(cfg["ohlcvPath"]))
    if args.fetch_fng:
        fng_text = FngClient(cfg["fngUrl"]).fetch_text(cfg["fngLimit"])
    else:
        fng_text = _read_text(cfg["fngPath"])
    sentiment = parse_fng_json(fng_text)

    aligned = align(ohlcv.bars, sentiment)
    start, end = app_config.get_data_range(cfg)
    window = aligned.between(start, end)
    dataset = attach_indicators(window)
    stats = summarize(window)

    if args.fetch_fng:
        storage.write_text(_out(cfg, reporting.FNG_FILE), fng_text)
    save_dataset(dataset, _out(cfg, reporting.DATASET_FILE))
    storage.write_json(_out(cfg, reporting.SUMMARY_FILE), stats.to_dict())
    reporting.plot_price_history(window, _out(cfg, reporting.PLOTS_DIR, "price.svg"))
    reporting.plot_sentiment_history(window, _out(cfg, reporting.PLOTS_DIR, "sentiment.svg"))

    print(
        f"Ingested {len(dataset)} days ({dataset.dates[0]:%Y-%m-%d} .. {dataset.dates[-1]:%Y-%m-%d}); "
        f"skipped {ohlcv.skipped_rows} null OHLCV rows, dropped {aligned.dropped_bars} bars "
        f"and {aligned.dropped_sentiment} sentiment days without a match."
    )
    return EXIT_OK


def cmd_tune(args, cfg: dict) -> int:
    raw = build_samples(_load_run_dataset(cfg), lags=cfg["lagDays"])
    train = _training_samples(cfg, raw)
    plan = make_cv_plan(train.n_samples, cfg["nSplits"])

    results: list[TuneResult] = []
    for family in app_config.get_families(cfg):
        fixed = {"epsilon": cfg["svrEpsilon"]} if family == "svr" else None
        result = tune(
            family,
            train,
            plan,
            seed=cfg["seed"],
            overrides=cfg["gridOverrides"].get(family),
            fixed=fixed,
            max_workers=cfg["maxWorkers"],
        )
        result.save_json(_out(cfg, reporting.TUNING_DIR, f"{family}.json"))
        result.save_csv(_out(cfg, reporting.TUNING_DIR, f"{family}.csv"))
        results.append(result)

    storage.write_text(_out(cfg, reporting.BEST_PARAMS_FILE), best_params_table(results).to_csv(index=False))
    storage.write_text(_out(cfg, reporting.VALIDATION_MSE_FILE), validation_mse_table(results).to_csv(index=False))
    storage.write_json(
        _out(cfg, reporting.SELECTED_SPECS_FILE),
        {label: score.spec.to_dict() for label, score in selected_candidates(results)},
    )
    print(validation_mse_table(results).to_string(index=False))
    return EXIT_OK


def _selected_specs(cfg: dict) -> dict[str, ModelSpec]:
    families = set(app_config.get_families(cfg))
    path = _out(cfg, reporting.SELECTED_SPECS_FILE)
    if os.path.exists(path):
        specs = {label: ModelSpec.from_dict(doc) for label, doc in storage.read_json(path).items()}
    else:
        # Tuning results written by earlier `tune --families` runs.
        results = []
        for family in sorted(families):
            result_path = _out(cfg, reporting.TUNING_DIR, f"{family}.json")
            if os.path.exists(result_path):
                results.append(load_tune_result(result_path))
        specs = {label: score.spec for label, score in selected_candidates(results)}
    specs = {label: spec for label, spec in specs.items() if spec.family in families}
    if not specs:
        raise FileNotFoundError(f"no tuned specs under {app_config.get_output_dir(cfg)}; run `tune` first")
    return specs


def _train_selected(cfg: dict, raw: FeatureMatrix) -> dict:
    train = _training_samples(cfg, raw)
    normalizer = fit_normalizer(train, range(train.n_samples))
    scaled = transform(train, normalizer)
    save_normalizer(normalizer, _out(cfg, reporting.NORMALIZER_FILE))

    trained = {}
    for label, spec in _selected_specs(cfg).items():
        seed = derive_seed(cfg["seed"], spec.family, cfg["nSplits"])
        model = fit_model(spec.with_seed(seed), scaled.X, scaled.y)
        save_model(model, _out(cfg, reporting.MODELS_DIR, f"{label}.json"))
        logger.info("Trained %s in %.2fs", label, model.info.wall_time)
        trained[label] = model
    return trained


def cmd_train(args, cfg: dict) -> int:
    raw = build_samples(_load_run_dataset(cfg), lags=cfg["lagDays"])
    trained = _train_selected(cfg, raw)
    print(f"Trained {len(trained)} models: {', '.join(trained)}")
    return EXIT_OK


def cmd_simulate(args, cfg: dict) -> int:
    dataset = _load_run_dataset(cfg)
    raw = build_samples(dataset, lags=cfg["lagDays"])
    if args.reuse_models:
        normalizer = load_normalizer(_out(cfg, reporting.NORMALIZER_FILE))
        trained = {
            label: load_model(_out(cfg, reporting.MODELS_DIR, f"{label}.json"))
            for label in _selected_specs(cfg)
        }
    else:
        trained = _train_selected(cfg, raw)
        normalizer = load_normalizer(_out(cfg, reporting.NORMALIZER_FILE))

    start, end = app_config.get_test_range(cfg)
    prices = dataset.between(start, end).frame["close"]
    if len(prices) < 2:
        raise ValueError(f"test range {start}..{end} holds fewer than two closes")
    # Samples target every price date after the first one actually present.
    test = raw.between(prices.index[1].date(), end)
    strategy = StrategyConfig(cfg["initialCapital"], cfg["fees"])
    report = simulate_all(trained.items(), test, normalizer, prices, strategy)

    report.save_json(_out(cfg, reporting.SIMULATION_FILE))
    curves = report.equity_curves()
    storage.write_text(_out(cfg, reporting.EQUITY_FILE), curves.to_csv(index_label="date", date_format="%Y-%m-%d"))
    predicted = {}
    for outcome in report.outcomes:
        outcome.ledger.to_csv(_out(cfg, reporting.LEDGER_DIR, f"{outcome.model}.csv"))
        frame = outcome.ledger.frame
        predicted[outcome.model] = frame["predicted_close"].iloc[:-1].set_axis(frame.index[1:])
    reporting.plot_equity_curves(curves, _out(cfg, reporting.PLOTS_DIR, "equity_curves.svg"))
    reporting.plot_predictions(prices, predicted, _out(cfg, reporting.PLOTS_DIR, "predictions.svg"))
    reporting.plot_model_predictions(prices, predicted, _out(cfg, reporting.PLOTS_DIR))

    print(report.to_frame().to_string(index=False))
    return EXIT_OK


def cmd_report(args, cfg: dict) -> int:
    path = reporting.write_report(app_config.get_output_dir(cfg))
    print(f"Report written to {path}")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "tune": cmd_tune,
    "train": cmd_train,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="btc-forecast", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="root random seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="parse, align and attach indicators")
    ingest.add_argument("--ohlcv", help="daily OHLCV CSV export")
    source = ingest.add_mutually_exclusive_group()
    source.add_argument("--fng", help="Fear & Greed JSON document")
    source.add_argument("--fetch-fng", action="store_true", help="download the Fear & Greed history")

    for name, text in (("tune", "grid search per family"),
                       ("train", "fit the selected specs on the training range"),
                       ("simulate", "train, predict the test range and backtest")):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--families", help="comma-separated model families")
        if name == "tune":
            cmd.add_argument("--max-workers", type=int, help="parallel candidate evaluations")
        if name == "simulate":
            cmd.add_argument("--reuse-models", action="store_true", help="use models saved by `train`")

    sub.add_parser("report", help="render the Markdown run summary")
    return parser


def _overrides(args) -> dict:
    return {
        "seed": args.seed,
        "outputDir": args.out,
        "ohlcvPath": getattr(args, "ohlcv", None),
        "fngPath": getattr(args, "fng", None),
        "families": getattr(args, "families", None),
        "maxWorkers": getattr(args, "max_workers", None),
    }


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
    )
    try:
        cfg = app_config.load_config(args.config, _overrides(args))
        code = COMMANDS[args.command](args, cfg)
        if args.command != "report":
            app_config.save_config(cfg, _out(cfg, reporting.RUN_CONFIG_FILE))
        return code
    except (ValueError, OSError, FetchError) as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        logger.exception("%s failed with an internal error", args.command)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
