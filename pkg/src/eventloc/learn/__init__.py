"""Trainable classifiers, feature selection and heuristic baselines."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baselines import dictionary_baseline, focus_baseline, nearest_verb_baseline
from .common import THRESHOLD, FeatureMismatchError, TrainingError, row_vector
from .forest import RandomForestModel, train_random_forest
from .mlp import MlpDivergenceError, MlpModel, train_mlp
from .rfe import FeatureSubset, rfe_select
from .svm import SvmConvergenceError, SvmModel, train_svm_rbf

FORMAT_VERSION = 1

MODEL_TYPES = {
    "rforest": RandomForestModel,
    "svm": SvmModel,
    "mlp": MlpModel,
}

TRAINERS = {
    "rforest": train_random_forest,
    "svm": train_svm_rbf,
    "mlp": train_mlp,
}


def train(model_type: str, data, **params):
    try:
        trainer = TRAINERS[model_type]
    except KeyError:
        raise TrainingError(f"unknown model type {model_type!r}") from None
    return trainer(data, **params)


def predict_proba(model, row) -> float:
    """Probability that ``row``'s location is a correct event location."""
    return float(model.predict_proba(row_vector(row, model.feature_names))[0])


def predict_rows(model, rows, threshold: float = THRESHOLD):
    """(probabilities, 0/1 predictions) for a sequence of FeatureRows."""
    if not rows:
        return np.zeros(0), np.zeros(0, dtype=int)
    X = np.vstack([row_vector(r, model.feature_names) for r in rows])
    proba = model.predict_proba(X)
    return proba, (proba > threshold).astype(int)


def model_to_json(model) -> str:
    envelope = {
        "model_type": model.model_type,
        "version": FORMAT_VERSION,
        "params": model.params,
        "payload": model.to_payload(),
    }
    return json.dumps(envelope, sort_keys=True)


def model_from_json(text: str):
    envelope = json.loads(text)
    if envelope.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {envelope.get('version')!r}")
    cls = MODEL_TYPES[envelope["model_type"]]
    return cls.from_payload(envelope["params"], envelope["payload"])


def save_model(model, path) -> None:
    Path(path).write_text(model_to_json(model) + "\n")


def load_model(path):
    return model_from_json(Path(path).read_text())


__all__ = [
    "FeatureMismatchError",
    "FeatureSubset",
    "MlpDivergenceError",
    "MlpModel",
    "RandomForestModel",
    "SvmConvergenceError",
    "SvmModel",
    "THRESHOLD",
    "TrainingError",
    "dictionary_baseline",
    "focus_baseline",
    "load_model",
    "model_from_json",
    "model_to_json",
    "nearest_verb_baseline",
    "predict_proba",
    "predict_rows",
    "rfe_select",
    "save_model",
    "train",
    "train_mlp",
    "train_random_forest",
    "train_svm_rbf",
]
