"""Random forest of Gini-split classification trees."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .common import TrainingError, as_xy, check_binary

LEAF = -1


@dataclass
class DecisionTree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf.

    ``value`` holds the positive-class fraction of the bootstrap rows that
    reached each node. Rows with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=int)
        while True:
            f = self.feature[node]
            active = np.nonzero(f != LEAF)[0]
            if active.size == 0:
                return node
            cur = node[active]
            go_left = X[active, f[active]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            np.array(d["feature"], dtype=int),
            np.array(d["threshold"], dtype=float),
            np.array(d["left"], dtype=int),
            np.array(d["right"], dtype=int),
            np.array(d["value"], dtype=float),
        )


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Lowest weighted Gini split on one feature: (score, threshold) or None."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    left_n = np.arange(1, n)
    left_pos = np.cumsum(ys)[:-1]
    right_n = n - left_n
    right_pos = ys.sum() - left_pos
    valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    if not valid.any():
        return None
    pl = left_pos / left_n
    pr = right_pos / right_n
    score = left_n * 2 * pl * (1 - pl) + right_n * 2 * pr * (1 - pr)
    score = np.where(valid, score, np.inf)
    k = int(np.argmin(score))
    lo, hi = xs[k], xs[k + 1]
    threshold = lo + (hi - lo) / 2
    if not lo <= threshold < hi:
        threshold = lo
    return float(score[k]), float(threshold)


def grow_tree(X, y, rng: np.random.Generator, features_per_split: int, min_leaf: int = 1,
              bootstrap: bool = True) -> DecisionTree:
    n, p = X.shape
    sample = rng.integers(0, n, n) if bootstrap else np.arange(n)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    stack = [(new_node(sample), sample)]
    while stack:
        node, idx = stack.pop()
        yy = y[idx]
        if yy.min() == yy.max() or len(idx) < 2 * min_leaf:
            continue
        best = None
        tried = 0
        for f in rng.permutation(p):
            col = X[idx, f]
            if col.min() == col.max():
                continue
            tried += 1
            found = _best_split(col, yy, min_leaf)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], found[1], int(f))
            if tried >= features_per_split:
                break
        if best is None:
            continue
        _, thr, f = best
        goes_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        # right child pushed first so the left subtree is numbered first
        l_idx, r_idx = idx[goes_left], idx[~goes_left]
        left[node] = new_node(l_idx)
        right[node] = new_node(r_idx)
        stack.append((right[node], r_idx))
        stack.append((left[node], l_idx))
    return DecisionTree(
        np.array(feature, dtype=int),
        np.array(threshold, dtype=float),
        np.array(left, dtype=int),
        np.array(right, dtype=int),
        np.array(value, dtype=float),
    )


def _grow_batch(args):
    X, y, seeds, m, min_leaf = args
    return [grow_tree(X, y, np.random.default_rng(s), m, min_leaf) for s in seeds]


@dataclass
class RandomForestModel:
    trees: list[DecisionTree]
    feature_names: list[str]
    n_trees: int
    features_per_split: int
    min_leaf: int = 1
    seed: int = 0
    model_type: str = field(default="rforest", init=False)

    @property
    def params(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "features_per_split": self.features_per_split,
            "min_leaf": self.min_leaf,
            "seed": self.seed,
        }

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict_proba(X)
        return total / len(self.trees)

    def to_payload(self) -> dict:
        return {
            "feature_names": self.feature_names,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_payload(cls, params: dict, payload: dict) -> "RandomForestModel":
        return cls(
            trees=[DecisionTree.from_dict(t) for t in payload["trees"]],
            feature_names=list(payload["feature_names"]),
            **params,
        )


def train_random_forest(
    data,
    *,
    n_trees: int = 1000,
    features_per_split: int | None = None,
    min_leaf: int = 1,
    seed: int = 0,
    features=None,
    n_jobs: int = 1,
) -> RandomForestModel:
    """Bagged Gini trees with a random feature subset tried at each split.

    Tree ``i`` draws from the ``i``-th child of ``SeedSequence(seed)``, so
    the result does not depend on ``n_jobs``.
    """
    X, y, names, _ = as_xy(data, features)
    check_binary(y)
    if n_trees < 1:
        raise TrainingError("n_trees must be positive")
    p = X.shape[1]
    m = features_per_split or max(1, math.ceil(math.sqrt(p)))
    seeds = np.random.SeedSequence(seed).spawn(n_trees)
    if n_jobs > 1 and n_trees > 1:
        chunks = [seeds[i::n_jobs] for i in range(n_jobs)]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            grown = list(pool.map(_grow_batch, [(X, y, c, m, min_leaf) for c in chunks]))
        # undo the strided split so tree i keeps seed i
        trees = [None] * n_trees
        for offset, batch in enumerate(grown):
            for pos, tree in enumerate(batch):
                trees[offset + pos * n_jobs] = tree
    else:
        trees = _grow_batch((X, y, seeds, m, min_leaf))
    return RandomForestModel(trees, names, n_trees, m, min_leaf, seed)
