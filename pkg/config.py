"""Configuration management for the BTC forecasting pipeline.

Reads a flat JSON document (``--config`` flag, ``BTC_FORECAST_CONFIG_PATH`` or
~/.config/btc-forecast/config.json), merges it over the defaults and applies
environment and command-line overrides on top.
"""

from __future__ import annotations

import json
import logging
import os
from datetime import date
from typing import Any

import storage

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_DIR = os.path.expanduser("~/.config/btc-forecast")
DEFAULT_CONFIG_PATH = os.path.join(DEFAULT_CONFIG_DIR, "config.json")
DEFAULT_FNG_URL = "https://api.alternative.me/fng/"

CONFIG_PATH_ENV = "BTC_FORECAST_CONFIG_PATH"
FNG_URL_ENV = "BTC_FORECAST_FNG_URL"

FAMILIES = (
    "linear_regression",
    "svr",
    "random_forest",
    "gradient_boosting",
    "xgb_variant",
    "mlp",
)

DEFAULT_CONFIG = {
    "ohlcvPath": "data/BTC-USD.csv",
    "fngPath": "data/fng.json",
    "outputDir": "runs/latest",
    "dataStart": "2018-02-01",
    "dataEnd": "2023-01-01",
    "trainStart": "2018-02-01",
    "trainEnd": "2022-05-31",
    "testStart": "2022-06-01",
    "testEnd": "2022-12-31",
    "families": list(FAMILIES),
    "seed": 42,
    "nSplits": 3,
    "lagDays": 3,
    "maxWorkers": 1,
    "fngUrl": DEFAULT_FNG_URL,
    "fngLimit": 0,
    "initialCapital": 200000.0,
    "fees": 0.0,
    "svrEpsilon": 0.01,
    "gridOverrides": {},
}

_DATE_KEYS = ("dataStart", "dataEnd", "trainStart", "trainEnd", "testStart", "testEnd")


class ConfigError(ValueError):
    """Raised when the configuration is contradictory."""


def get_config_path() -> str:
    """Return the path to the config file."""
    return os.environ.get(CONFIG_PATH_ENV, DEFAULT_CONFIG_PATH)


def load_config(
    config_path: str | None = None,
    overrides: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Load configuration from disk, merging with defaults.

    Bad JSON falls back to defaults with a warning. ``overrides`` holds
    command-line values; ``None`` entries mean "flag not given".
    Precedence: overrides > environment > file > defaults.
    """
    path = config_path or get_config_path()
    config = _deep_copy_dict(DEFAULT_CONFIG)

    if os.path.exists(path):
        try:
            with open(path, "r") as f:
                user_config = json.load(f)
            if isinstance(user_config, dict):
                config = _deep_merge(config, user_config)
            else:
                logger.warning("Config file is not a JSON object, using defaults.")
        except (json.JSONDecodeError, OSError) as e:
            logger.warning("Failed to load config from %s: %s, using defaults.", path, e)
    elif config_path:
        logger.warning("Config file %s not found, using defaults.", path)

    env_url = os.environ.get(FNG_URL_ENV)
    if env_url:
        config["fngUrl"] = env_url

    for key, value in (overrides or {}).items():
        if value is not None:
            config[key] = value

    return _validate_config(config)


def save_config(config: dict[str, Any], config_path: str) -> None:
    """Save the resolved configuration; the file reloads through ``load_config``."""
    storage.write_json(config_path, config)


def _validate_config(config: dict[str, Any]) -> dict[str, Any]:
    """Validate and coerce config values to correct types/ranges."""
    for key, low in (("seed", 0), ("nSplits", 1), ("lagDays", 1), ("maxWorkers", 1), ("fngLimit", 0)):
        try:
            value = int(config.get(key, DEFAULT_CONFIG[key]))
        except (TypeError, ValueError):
            logger.warning("Invalid %s=%r, using default.", key, config.get(key))
            value = DEFAULT_CONFIG[key]
        config[key] = max(low, value)

    try:
        capital = float(config.get("initialCapital", DEFAULT_CONFIG["initialCapital"]))
    except (TypeError, ValueError):
        capital = DEFAULT_CONFIG["initialCapital"]
    config["initialCapital"] = capital if capital > 0 else DEFAULT_CONFIG["initialCapital"]

    try:
        fees = float(config.get("fees", 0.0))
    except (TypeError, ValueError):
        fees = 0.0
    config["fees"] = fees if 0.0 <= fees < 1.0 else 0.0

    try:
        epsilon = float(config.get("svrEpsilon", DEFAULT_CONFIG["svrEpsilon"]))
    except (TypeError, ValueError):
        epsilon = DEFAULT_CONFIG["svrEpsilon"]
    config["svrEpsilon"] = max(0.0, epsilon)

    url = config.get("fngUrl")
    if not isinstance(url, str) or not url.strip():
        config["fngUrl"] = DEFAULT_FNG_URL

    for key in ("ohlcvPath", "fngPath", "outputDir"):
        if not isinstance(config.get(key), str) or not config[key].strip():
            config[key] = DEFAULT_CONFIG[key]

    if not isinstance(config.get("gridOverrides"), dict):
        config["gridOverrides"] = {}

    families = config.get("families")
    if isinstance(families, str):
        families = [f.strip() for f in families.split(",") if f.strip()]
    if not isinstance(families, list) or not families:
        families = list(FAMILIES)
    unknown = [f for f in families if f not in FAMILIES]
    if unknown:
        raise ConfigError(f"Unknown model families: {', '.join(map(str, unknown))}")
    config["families"] = families

    for key in _DATE_KEYS:
        try:
            date.fromisoformat(str(config.get(key)))
        except ValueError:
            logger.warning("Invalid date %s=%r, using default.", key, config.get(key))
            config[key] = DEFAULT_CONFIG[key]
        else:
            config[key] = str(config[key])

    train_start, train_end = get_train_range(config)
    test_start, test_end = get_test_range(config)
    if not train_start <= train_end < test_start <= test_end:
        raise ConfigError(
            f"Date ranges must satisfy trainStart <= trainEnd < testStart <= testEnd, "
            f"got {train_start}..{train_end} / {test_start}..{test_end}"
        )

    return config


def get_train_range(config: dict[str, Any]) -> tuple[date, date]:
    """Get the (start, end) training dates, both inclusive."""
    return date.fromisoformat(config["trainStart"]), date.fromisoformat(config["trainEnd"])


def get_test_range(config: dict[str, Any]) -> tuple[date, date]:
    """Get the (start, end) test/simulation dates, both inclusive."""
    return date.fromisoformat(config["testStart"]), date.fromisoformat(config["testEnd"])


def get_data_range(config: dict[str, Any]) -> tuple[date, date]:
    """Get the (start, end) span kept by ingest."""
    return date.fromisoformat(config["dataStart"]), date.fromisoformat(config["dataEnd"])


def get_families(config: dict[str, Any]) -> list[str]:
    return list(config["families"])


def get_output_dir(config: dict[str, Any]) -> str:
    return os.path.expanduser(config["outputDir"])


def _deep_merge(base: dict, override: dict) -> dict:
    """Deep merge override into base."""
    result = base.copy()
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = _deep_merge(result[key], value)
        else:
            result[key] = value
    return result


def _deep_copy_dict(d: dict) -> dict:
    """Simple deep copy for nested dicts/lists."""
    return json.loads(json.dumps(d))
