"""Plots and the Markdown run summary.

Plots are written as SVG through the Agg backend; every artifact a run
produces is named here so the CLI and the report agree on file names.
"""

from __future__ import annotations

import io
import logging
import os
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

import storage  # noqa: E402
from market_data import AlignedDataset  # noqa: E402

logger = logging.getLogger(__name__)

DATASET_FILE = "dataset.csv"
SUMMARY_FILE = "summary.json"
FNG_FILE = "fng.json"
RUN_CONFIG_FILE = "run_config.json"
TUNING_DIR = "tuning"
MODELS_DIR = "models"
LEDGER_DIR = "ledgers"
PLOTS_DIR = "plots"
NORMALIZER_FILE = "normalizer.json"
BEST_PARAMS_FILE = "best_params.csv"
VALIDATION_MSE_FILE = "validation_mse.csv"
SELECTED_SPECS_FILE = "selected_specs.json"
SIMULATION_FILE = "simulation.json"
EQUITY_FILE = "equity_curves.csv"
REPORT_FILE = "report.md"

# Stable element ids so reruns produce identical SVG bytes.
plt.rcParams["svg.hashsalt"] = "btc-forecast"


def _save_svg(fig, path: str) -> None:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    storage.write_text(path, buf.getvalue())


def plot_price_history(dataset: AlignedDataset, path: str) -> None:
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(dataset.dates, dataset.column("close"), color="tab:orange", linewidth=1)
    ax.set_title("BTC-USD close")
    ax.set_ylabel("USD")
    ax.grid(alpha=0.3)
    _save_svg(fig, path)


def plot_sentiment_history(dataset: AlignedDataset, path: str) -> None:
    fig, ax = plt.subplots(figsize=(10, 3))
    ax.plot(dataset.dates, dataset.column("fng"), color="tab:blue", linewidth=1)
    ax.set_ylim(0, 100)
    ax.set_title("Fear & Greed index")
    ax.grid(alpha=0.3)
    _save_svg(fig, path)


def plot_equity_curves(curves: pd.DataFrame, path: str) -> None:
    fig, ax = plt.subplots(figsize=(10, 5))
    for name in curves.columns:
        style = "--" if name == "buy_hold" else "-"
        ax.plot(curves.index, curves[name], style, linewidth=1, label=name)
    ax.set_title("Investment simulation")
    ax.set_ylabel("Equity (USD)")
    ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    _save_svg(fig, path)


def plot_predictions(actual: pd.Series, predicted: Mapping[str, pd.Series], path: str,
                     title: str = "Predicted vs actual close") -> None:
    """Actual closes against each model's next-day predictions."""
    fig, ax = plt.subplots(figsize=(10, 5))
    ax.plot(actual.index, actual.to_numpy(), color="black", linewidth=1.5, label="actual")
    for name, series in predicted.items():
        ax.plot(series.index, series.to_numpy(), linewidth=0.8, label=name)
    ax.set_title(title)
    ax.set_ylabel("USD")
    ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    _save_svg(fig, path)


def plot_model_predictions(actual: pd.Series, predicted: Mapping[str, pd.Series], plots_dir: str) -> list[str]:
    """One ``predictions_<model>.svg`` per model, each against the actual closes."""
    paths = []
    for name, series in predicted.items():
        path = os.path.join(plots_dir, f"predictions_{name}.svg")
        plot_predictions(actual, {name: series}, path, title=f"{name}: predicted vs actual close")
        paths.append(path)
    return paths


def markdown_table(frame: pd.DataFrame, formats: Mapping[str, str] | None = None) -> str:
    formats = formats or {}
    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    lines = [header, rule]
    for _, row in frame.iterrows():
        cells = []
        for col in frame.columns:
            value = row[col]
            if value is None or (isinstance(value, float) and pd.isna(value)):
                cells.append("")
            elif col in formats:
                cells.append(format(value, formats[col]))
            else:
                cells.append(str(value))
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)


def _section(title: str, body: str | None) -> str:
    return f"## {title}\n\n{body if body else '_not available_'}\n"


def _summary_table(run_dir: str) -> str | None:
    path = os.path.join(run_dir, SUMMARY_FILE)
    if not os.path.exists(path):
        return None
    stats = storage.read_json(path)
    frame = pd.DataFrame(stats).T.reset_index().rename(columns={"index": "column"})
    formats = {c: ".2f" for c in frame.columns if c != "column"}
    formats["count"] = ".0f"
    return markdown_table(frame, formats)


def _csv_table(run_dir: str, name: str, formats: Mapping[str, str]) -> str | None:
    path = os.path.join(run_dir, name)
    if not os.path.exists(path):
        return None
    return markdown_table(pd.read_csv(path, keep_default_na=False), formats)


def _simulation_table(run_dir: str) -> str | None:
    path = os.path.join(run_dir, SIMULATION_FILE)
    if not os.path.exists(path):
        return None
    doc = storage.read_json(path)
    frame = pd.DataFrame(doc["rows"], columns=["model", "hits", "denominator", "final_value"], dtype=object)
    table = markdown_table(frame, {"final_value": ".2f"})
    if doc.get("rejected"):
        rejected = "\n".join(f"- {name}: {reason}" for name, reason in sorted(doc["rejected"].items()))
        table += "\n\nRejected models:\n\n" + rejected
    return table


def render_report(run_dir: str) -> str:
    """Markdown summary of the artifacts found in ``run_dir``."""
    if not os.path.isdir(run_dir):
        raise FileNotFoundError(f"run directory {run_dir} does not exist")
    parts = [
        "# BTC forecast run\n",
        _section("Dataset summary", _summary_table(run_dir)),
        _section("Selected hyperparameters", _csv_table(run_dir, BEST_PARAMS_FILE, {})),
        _section("Validation MSE", _csv_table(run_dir, VALIDATION_MSE_FILE, {"mse": ".6g"})),
        _section("Investment simulation", _simulation_table(run_dir)),
    ]
    return "\n".join(parts)


def write_report(run_dir: str) -> str:
    path = os.path.join(run_dir, REPORT_FILE)
    storage.write_text(path, render_report(run_dir))
    logger.info("Wrote %s", path)
    return path
