"""RBF-kernel support vector machine trained by SMO, with Platt scaling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .common import TrainingError, as_xy, check_binary

TAU = 1e-12


class SvmConvergenceError(TrainingError):
    def __init__(self, message: str, violation: float):
        super().__init__(message)
        self.violation = violation


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class SmoResult:
    alpha: np.ndarray
    rho: float
    violation: float
    iterations: int
    objective: list[float] = field(default_factory=list)


def _violation_bounds(alpha, grad, y, C):
    score = -y * grad
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    return score, up, low


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_iter: int = 100_000, trace: bool = False) -> SmoResult:
    """Minimise 0.5 a'Qa - e'a s.t. 0 <= a <= C, y'a = 0, Q = yy'K.

    Working pairs use the maximal violating index plus second-order
    selection of its partner. Stops once the KKT gap m - M drops below
    ``tol``.
    """
    n = len(y)
    y = y.astype(float)
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    grad = -np.ones(n)
    objective = [0.0] if trace else []
    diag = np.diag(K)
    for it in range(max_iter + 1):
        score, up, low = _violation_bounds(alpha, grad, y, C)
        i = int(np.argmax(np.where(up, score, -np.inf)))
        m_up = score[i]
        m_low = np.min(np.where(low, score, np.inf))
        gap = m_up - m_low
        if gap < tol:
            break
        if it == max_iter:
            raise SvmConvergenceError(
                f"SMO did not converge in {max_iter} iterations (KKT gap {gap:.3g})",
                float(gap),
            )
        b = m_up - score
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        cand = low & (score < m_up)
        j = int(np.argmin(np.where(cand, -(b * b) / a, np.inf)))

        old_i, old_j = alpha[i], alpha[j]
        quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], TAU)
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += Q[:, i] * (ai - old_i) + Q[:, j] * (aj - old_j)
        if trace:
            objective.append(float(alpha.sum() - 0.5 * alpha @ (grad + 1.0)))

    score, up, low = _violation_bounds(alpha, grad, y, C)
    free = (alpha > 0) & (alpha < C)
    # decision values are K(y*alpha) - rho, so rho is minus the free-vector score
    if free.any():
        rho = -float(np.mean(score[free]))
    else:
        rho = -float((np.max(np.where(up, score, -np.inf)) + np.min(np.where(low, score, np.inf))) / 2)
    return SmoResult(alpha, rho, float(gap), it, objective)


def fit_platt(decision: np.ndarray, y: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Sigmoid P(y=1|f) = 1 / (1 + exp(A f + B)) by Newton's method.

    Uses prior-smoothed targets and the numerically stable formulation of
    Lin, Lin and Weng's note on Platt's probabilistic outputs.
    """
    pos = int((y == 1).sum())
    neg = len(y) - pos
    hi, lo = (pos + 1.0) / (pos + 2.0), 1.0 / (neg + 2.0)
    t = np.where(y == 1, hi, lo)
    A, B = 0.0, np.log((neg + 1.0) / (pos + 1.0))
    sigma, min_step, eps = 1e-12, 1e-10, 1e-5

    def objective(A, B):
        fApB = decision * A + B
        return float(np.sum(np.where(
            fApB >= 0,
            t * fApB + np.log1p(np.exp(-np.abs(fApB))),
            (t - 1) * fApB + np.log1p(np.exp(-np.abs(fApB))),
        )))

    fval = objective(A, B)
    for _ in range(max_iter):
        fApB = decision * A + B
        p = np.where(fApB >= 0, np.exp(-np.abs(fApB)) / (1 + np.exp(-np.abs(fApB))),
                     1 / (1 + np.exp(-np.abs(fApB))))
        q = 1 - p
        d2 = p * q
        h11 = sigma + np.sum(decision * decision * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(decision * d2)
        d1 = t - p
        g1 = np.sum(decision * d1)
        g2 = np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            newA, newB = A + step * dA, B + step * dB
            newf = objective(newA, newB)
            if newf < fval + 1e-4 * step * gd:
                A, B, fval = newA, newB, newf
                break
            step /= 2
        else:
            break
    return float(A), float(B)


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    gamma: float
    C: float
    platt: tuple[float, float]
    feature_names: list[str]
    tol: float = 1e-3
    model_type: str = field(default="svm", init=False)

    @property
    def params(self) -> dict:
        return {"C": self.C, "gamma": self.gamma, "tol": self.tol}

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if len(self.dual_coef) == 0:
            return np.full(len(X), self.bias)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        A, B = self.platt
        z = A * self.decision_function(X) + B
        return 0.5 * (1.0 - np.tanh(0.5 * z))

    def to_payload(self) -> dict:
        return {
            "feature_names": self.feature_names,
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "platt": list(self.platt),
        }

    @classmethod
    def from_payload(cls, params: dict, payload: dict) -> "SvmModel":
        sv = np.array(payload["support_vectors"], dtype=float).reshape(
            -1, len(payload["feature_names"])
        )
        return cls(
            support_vectors=sv,
            dual_coef=np.array(payload["dual_coef"], dtype=float),
            bias=float(payload["bias"]),
            platt=tuple(payload["platt"]),
            feature_names=list(payload["feature_names"]),
            **params,
        )


def train_svm_rbf(
    data,
    *,
    C: float = 1.0,
    gamma: float | None = None,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    features=None,
) -> SvmModel:
    """Fit an RBF SVM; ``gamma`` defaults to 1 / n_features."""
    X, y01, names, _ = as_xy(data, features)
    check_binary(y01)
    if not np.all(np.isfinite(X)):
        raise TrainingError("features must be finite")
    gamma = float(gamma) if gamma is not None else 1.0 / X.shape[1]
    y = np.where(y01 == 1, 1.0, -1.0)
    K = rbf_kernel(X, X, gamma)
    result = smo_solve(K, y, C, tol=tol, max_iter=max_iter)
    sv = result.alpha > 0
    dual = (y * result.alpha)[sv]
    bias = -result.rho
    decision = K[:, sv] @ dual + bias
    platt = fit_platt(decision, y01)
    return SvmModel(X[sv], dual, bias, gamma, float(C), platt, names, tol)
