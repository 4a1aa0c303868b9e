"""Versioned JSON documents for trained models."""

from __future__ import annotations

import logging

import storage
from models import build_model
from models.base import BaseModel, ModelSpec, TrainingInfo

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised for model documents this version cannot read."""


def model_to_dict(model: BaseModel) -> dict:
    if model.info is None:
        raise ValueError(f"cannot save an unfitted {model.family} model")
    info = model.info
    return {
        "format_version": FORMAT_VERSION,
        **model.spec.to_dict(),
        "training": {
            "n_samples": info.n_samples,
            "n_features": info.n_features,
            "converged": info.converged,
            "n_iter": info.n_iter,
        },
        "metadata": {"wall_time": info.wall_time},
        "state": model.get_state(),
    }


def model_from_dict(doc: dict) -> BaseModel:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version!r}")
    model = build_model(ModelSpec.from_dict(doc))
    model.set_state(doc["state"])
    training = doc["training"]
    model.info = TrainingInfo(
        n_samples=int(training["n_samples"]),
        n_features=int(training["n_features"]),
        seed=model.seed,
        wall_time=float(doc.get("metadata", {}).get("wall_time", 0.0)),
        converged=bool(training.get("converged", True)),
        n_iter=training.get("n_iter"),
    )
    return model


def save_model(model: BaseModel, path: str) -> None:
    storage.write_json(path, model_to_dict(model))
    logger.debug("Saved %s model to %s", model.family, path)


def load_model(path: str) -> BaseModel:
    return model_from_dict(storage.read_json(path))
