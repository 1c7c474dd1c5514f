"""One-hidden-layer logistic network trained by full-batch gradient descent."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .common import TrainingError, accuracy, as_xy, assign_folds, check_binary

DEFAULT_HIDDEN = (3, 5, 7, 9)
DEFAULT_DECAY = (0.0, 1e-3, 1e-2, 1e-1)


class MlpDivergenceError(TrainingError):
    pass


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class MlpParams:
    W1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    @classmethod
    def unflat(cls, theta: np.ndarray, n_inputs: int, hidden: int) -> "MlpParams":
        k = hidden * n_inputs
        return cls(
            theta[:k].reshape(hidden, n_inputs).copy(),
            theta[k : k + hidden].copy(),
            theta[k + hidden : k + 2 * hidden].copy(),
            float(theta[-1]),
        )


def forward(params: MlpParams, X: np.ndarray):
    H = sigmoid(X @ params.W1.T + params.b1)
    z = H @ params.w2 + params.b2
    return H, z


def loss_and_grad(params: MlpParams, X: np.ndarray, y: np.ndarray, decay: float):
    """Mean over rows of (cross-entropy) plus decay * ||W||^2 / N.

    Biases are not penalised. Returns (loss, gradient as MlpParams).
    """
    N = len(y)
    H, z = forward(params, X)
    ce = np.maximum(z, 0) - y * z + np.log1p(np.exp(-np.abs(z)))
    penalty = np.sum(params.W1**2) + np.sum(params.w2**2)
    loss = (ce.sum() + decay * penalty) / N
    d_out = (sigmoid(z) - y) / N
    g_w2 = H.T @ d_out + 2 * decay * params.w2 / N
    g_b2 = d_out.sum()
    d_hidden = np.outer(d_out, params.w2) * H * (1 - H)
    g_W1 = d_hidden.T @ X + 2 * decay * params.W1 / N
    g_b1 = d_hidden.sum(0)
    return float(loss), MlpParams(g_W1, g_b1, g_w2, float(g_b2))


def init_params(n_inputs: int, hidden: int, rng: np.random.Generator, scale: float = 0.5):
    return MlpParams(
        rng.uniform(-scale, scale, (hidden, n_inputs)),
        rng.uniform(-scale, scale, hidden),
        rng.uniform(-scale, scale, hidden),
        float(rng.uniform(-scale, scale)),
    )


def fit_params(X, y, hidden, decay, *, epochs=2000, learning_rate=0.5, momentum=0.9, seed=0):
    rng = np.random.default_rng(seed)
    p = init_params(X.shape[1], hidden, rng)
    W1, b1, w2, b2 = p.W1, p.b1, p.w2, p.b2
    vW1, vb1, vw2, vb2 = np.zeros_like(W1), np.zeros_like(b1), np.zeros_like(w2), 0.0
    N = len(y)
    shrink = 2 * decay / N
    for epoch in range(epochs):
        # inlined loss_and_grad; keep the two in sync
        H = sigmoid(X @ W1.T + b1)
        z = H @ w2 + b2
        if epoch % 100 == 0 or epoch == epochs - 1:
            loss = (np.sum(np.maximum(z, 0) - y * z + np.log1p(np.exp(-np.abs(z))))
                    + decay * (np.sum(W1 * W1) + np.sum(w2 * w2))) / N
            if not np.isfinite(loss):
                raise MlpDivergenceError(
                    f"loss became non-finite at epoch {epoch} (hidden={hidden}, decay={decay})"
                )
        d_out = (sigmoid(z) - y) / N
        d_hidden = np.outer(d_out, w2) * H * (1 - H)
        vw2 = momentum * vw2 - learning_rate * (H.T @ d_out + shrink * w2)
        vb2 = momentum * vb2 - learning_rate * d_out.sum()
        vW1 = momentum * vW1 - learning_rate * (d_hidden.T @ X + shrink * W1)
        vb1 = momentum * vb1 - learning_rate * d_hidden.sum(0)
        W1, b1, w2, b2 = W1 + vW1, b1 + vb1, w2 + vw2, b2 + vb2
    if not (np.all(np.isfinite(W1)) and np.all(np.isfinite(w2)) and np.isfinite(b2)):
        raise MlpDivergenceError(f"parameters became non-finite (hidden={hidden}, decay={decay})")
    return MlpParams(W1, b1, w2, float(b2))


@dataclass
class MlpModel:
    params_: MlpParams
    feature_names: list[str]
    hidden: int
    decay: float
    activation: str = "logistic"
    validation: dict = field(default_factory=dict)
    model_type: str = field(default="mlp", init=False)

    @property
    def params(self) -> dict:
        return {"hidden": self.hidden, "decay": self.decay, "activation": self.activation}

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        _, z = forward(self.params_, np.asarray(X, dtype=float))
        return sigmoid(z)

    def to_payload(self) -> dict:
        return {
            "feature_names": self.feature_names,
            "W1": self.params_.W1.tolist(),
            "b1": self.params_.b1.tolist(),
            "w2": self.params_.w2.tolist(),
            "b2": self.params_.b2,
            "validation": self.validation,
        }

    @classmethod
    def from_payload(cls, params: dict, payload: dict) -> "MlpModel":
        n_in = len(payload["feature_names"])
        p = MlpParams(
            np.array(payload["W1"], dtype=float).reshape(params["hidden"], n_in),
            np.array(payload["b1"], dtype=float),
            np.array(payload["w2"], dtype=float),
            float(payload["b2"]),
        )
        return cls(p, list(payload["feature_names"]), validation=payload.get("validation", {}), **params)


def train_mlp(
    data,
    *,
    hidden=DEFAULT_HIDDEN,
    decay=DEFAULT_DECAY,
    epochs: int = 2000,
    learning_rate: float = 0.5,
    momentum: float = 0.9,
    seed: int = 0,
    inner_folds: int = 3,
    features=None,
) -> MlpModel:
    """Grid-search (hidden, decay) on inner folds, then refit the winner.

    Inner folds are grouped by story when ``data`` is a Dataset. Ties go to
    the earlier grid entry.
    """
    X, y, names, groups = as_xy(data, features)
    check_binary(y)
    grid = list(itertools.product(tuple(hidden), tuple(decay)))
    fit = dict(epochs=epochs, learning_rate=learning_rate, momentum=momentum, seed=seed)
    scores: dict[str, float] = {}
    if len(grid) > 1:
        folds = assign_folds(groups, min(inner_folds, len(set(groups))),
                             np.random.default_rng(seed))
        fold_of = np.array([folds[g] for g in groups])
        best = None
        for h, lam in grid:
            accs = []
            for k in sorted(set(fold_of.tolist())):
                train, test = fold_of != k, fold_of == k
                if y[train].min() == y[train].max():
                    continue
                p = fit_params(X[train], y[train], h, lam, **fit)
                _, z = forward(p, X[test])
                accs.append(accuracy((z > 0).astype(int), y[test]))
            score = float(np.mean(accs)) if accs else 0.0
            scores[f"{h}/{lam!r}"] = score
            if best is None or score > best[0]:
                best = (score, h, lam)
        _, h, lam = best
    else:
        h, lam = grid[0]
    params = fit_params(X, y, h, lam, **fit)
    return MlpModel(params, names, int(h), float(lam), validation=scores)
