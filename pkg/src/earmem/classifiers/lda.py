"""Two-class linear discriminant with shrinkage of the pooled covariance."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from ..data import Label
from ..errors import MissingCondition, ShapeError, SingularCovariance


@dataclass(frozen=True)
class LdaModel:
    w: np.ndarray
    b: float
    gamma: float
    mean_remembered: np.ndarray
    mean_forgotten: np.ndarray
    pooled_cov: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {"w": self.w.tolist(), "b": self.b, "gamma": self.gamma,
                "mean_remembered": self.mean_remembered.tolist(),
                "mean_forgotten": self.mean_forgotten.tolist(),
                "pooled_cov": self.pooled_cov.tolist()}

    @classmethod
    def from_dict(cls, d) -> "LdaModel":
        arr = lambda k: np.array(d[k], dtype=np.float64)
        return cls(arr("w"), float(d["b"]), float(d["gamma"]), arr("mean_remembered"),
                   arr("mean_forgotten"), arr("pooled_cov"))


def shrunk_covariance(s: np.ndarray, gamma: float) -> np.ndarray:
    d = s.shape[0]
    return (1 - gamma) * s + gamma * np.trace(s) / d * np.eye(d)


def lda_fit(X, y, gamma: float = 0.1) -> LdaModel:
    """Fit ``w = S_gamma^-1 (mu_R - mu_F)`` with the equal-prior midpoint bias.

    ``S`` is the pooled within-class covariance with ``n - 2`` degrees of
    freedom, shrunk toward ``trace(S)/d * I``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError("X must be (n, d) with one label per row")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    rem = y == int(Label.REMEMBERED)
    fgt = y == int(Label.FORGOTTEN)
    if not rem.any() or not fgt.any():
        raise MissingCondition("LDA needs both remembered and forgotten samples")
    n = X.shape[0]
    if n <= 2:
        raise ValueError("LDA needs more than two samples")
    mu_r, mu_f = X[rem].mean(axis=0), X[fgt].mean(axis=0)
    centered = np.concatenate([X[rem] - mu_r, X[fgt] - mu_f])
    s = centered.T @ centered / (n - 2)
    s_g = shrunk_covariance(s, gamma)
    ev = np.linalg.eigvalsh(s_g)
    if ev[0] <= ev[-1] * s_g.shape[0] * np.finfo(float).eps:
        raise SingularCovariance("pooled covariance is singular; use gamma > 0")
    w = np.linalg.solve(s_g, mu_r - mu_f)
    b = float(-w @ (mu_r + mu_f) / 2)
    return LdaModel(w, b, float(gamma), mu_r, mu_f, s)


def lda_decision(model: LdaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.w.shape[0]:
        raise ShapeError(f"expected (n, {model.w.shape[0]}) features, got {X.shape}")
    return X @ model.w + model.b


def lda_predict(model: LdaModel, X) -> Tuple[np.ndarray, np.ndarray]:
    """Labels and signed scores; a zero score counts as forgotten."""
    scores = lda_decision(model, X)
    labels = np.where(scores > 0, int(Label.REMEMBERED), int(Label.FORGOTTEN))
    return labels, scores
