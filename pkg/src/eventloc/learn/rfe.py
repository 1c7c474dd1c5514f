"""Recursive feature elimination driven by forest permutation importance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .common import accuracy, as_xy, assign_folds, check_binary
from .forest import train_random_forest


@dataclass
class FeatureSubset:
    retained: list[str]
    accuracy_by_size: dict[int, float] = field(default_factory=dict)
    elimination_order: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "retained": self.retained,
            "accuracy_by_size": {str(k): v for k, v in sorted(self.accuracy_by_size.items())},
            "elimination_order": self.elimination_order,
        }


def _true_class_score(proba, y):
    return float(np.mean(np.where(y == 1, proba, 1.0 - proba)))


def permutation_importance(model, X, y, rng, n_repeats=3) -> np.ndarray:
    """Drop in mean true-class probability when each column is shuffled."""
    base = _true_class_score(model.predict_proba(X), y)
    out = np.zeros(X.shape[1])
    for f in range(X.shape[1]):
        drops = []
        for _ in range(n_repeats):
            Xp = X.copy()
            Xp[:, f] = X[rng.permutation(len(X)), f]
            drops.append(base - _true_class_score(model.predict_proba(Xp), y))
        out[f] = np.mean(drops)
    return out


def rfe_select(
    data,
    *,
    cv_folds: int = 3,
    seed: int = 0,
    n_trees: int = 100,
    features=None,
) -> FeatureSubset:
    """Drop the least important feature until one is left.

    Each round scores the current subset by grouped inner CV accuracy and
    averages held-out permutation importances across folds. The best
    subset wins; ties go to the smaller one.
    """
    X, y, names, groups = as_xy(data, features)
    check_binary(y)
    if len(names) < 2:
        raise ValueError("feature elimination needs at least two features")
    folds = assign_folds(groups, min(cv_folds, len(set(groups))), np.random.default_rng(seed))
    fold_of = np.array([folds[g] for g in groups])
    rng = np.random.default_rng(seed + 1)
    current = list(range(len(names)))
    result = FeatureSubset(retained=[])
    best_size, best_acc = None, -1.0
    while current:
        accs, imps = [], []
        for k in sorted(set(fold_of.tolist())):
            train, test = fold_of != k, fold_of == k
            if y[train].min() == y[train].max():
                continue
            model = train_random_forest(
                (X[train][:, current], y[train]), n_trees=n_trees, seed=seed + k
            )
            proba = model.predict_proba(X[test][:, current])
            accs.append(accuracy((proba > 0.5).astype(int), y[test]))
            imps.append(permutation_importance(model, X[test][:, current], y[test], rng))
        acc = float(np.mean(accs))
        result.accuracy_by_size[len(current)] = acc
        if acc >= best_acc:
            best_size, best_acc = len(current), acc
            result.retained = [names[i] for i in current]
        if len(current) == 1:
            break
        weakest = int(np.argmin(np.mean(imps, axis=0)))
        result.elimination_order.append(names[current[weakest]])
        del current[weakest]
    return result
