from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..features import Dataset, FeatureRow

THRESHOLD = 0.5


class TrainingError(ValueError):
    """A classifier could not be fitted."""


class FeatureMismatchError(KeyError):
    """A row lacks a feature the model was trained on."""

    def __str__(self):
        return str(self.args[0])


def as_xy(data, features: Sequence[str] | None = None):
    """Return (X, y, feature_names, groups) from a Dataset or an (X, y) pair."""
    if isinstance(data, Dataset):
        names = list(features) if features is not None else list(data.feature_names)
        return data.matrix(names), data.labels(), names, data.story_ids()
    X, y = data
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise TrainingError("X must be two-dimensional")
    y = np.asarray(y, dtype=int)
    names = list(features) if features is not None else [f"x{i}" for i in range(X.shape[1])]
    return X, y, names, list(range(len(y)))


def check_binary(y: np.ndarray, min_rows: int = 2) -> None:
    if len(y) < min_rows:
        raise TrainingError(f"need at least {min_rows} rows, got {len(y)}")
    if not np.all((y == 0) | (y == 1)):
        raise TrainingError("labels must be 0 or 1")
    if y.min() == y.max():
        raise TrainingError("both classes must be present")


def assign_folds(ids: Sequence, k: int, rng: np.random.Generator) -> dict:
    """Shuffled round-robin assignment of distinct ids to k folds."""
    unique = sorted(set(ids), key=str)
    if len(unique) < k:
        raise ValueError(f"{len(unique)} groups cannot fill {k} folds")
    order = rng.permutation(len(unique))
    return {unique[idx]: pos % k for pos, idx in enumerate(order)}


def row_vector(row: FeatureRow | Mapping[str, float], names: Sequence[str]) -> np.ndarray:
    values = row.covariates if isinstance(row, FeatureRow) else row
    missing = [n for n in names if n not in values]
    if missing:
        raise FeatureMismatchError(f"row lacks feature(s): {', '.join(missing)}")
    return np.array([[float(values[n]) for n in names]])


def accuracy(pred: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return float("nan")
    return float(np.mean(np.asarray(pred) == np.asarray(y)))
