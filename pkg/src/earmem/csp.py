"""Common Spatial Patterns and its filter-bank extension.

Filters solve ``S_R w = lambda (S_R + S_F) w`` by whitening the composite
covariance and diagonalizing the whitened remembered-class covariance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .data import BandDef, EpochSet, Label
from .errors import DegenerateTrial, ShapeError, SingularCovariance
from .sigproc import bandpass_epochs

FEATURE_EPS = 1e-12
DEFAULT_M = 3
DEFAULT_RIDGE = 1e-6


def trial_covariances(data: np.ndarray) -> np.ndarray:
    """Trace-normalized ``X X^T`` for each trial in ``(n, C, T)``."""
    data = np.asarray(data, dtype=np.float64)
    cov = np.einsum("nct,ndt->ncd", data, data)
    tr = np.trace(cov, axis1=1, axis2=2)
    bad = np.flatnonzero(~(tr > 0))
    if bad.size:
        raise DegenerateTrial(f"trial {int(bad[0])} has zero signal power")
    return cov / tr[:, None, None]


def class_covariances(epochs: EpochSet) -> Tuple[np.ndarray, np.ndarray]:
    """Average trace-normalized covariance of remembered and forgotten trials."""
    epochs.require_both_classes()
    covs = []
    for lab in (Label.REMEMBERED, Label.FORGOTTEN):
        c = trial_covariances(epochs.class_data(lab)).mean(axis=0)
        covs.append((c + c.T) / 2)
    return covs[0], covs[1]


@dataclass(frozen=True)
class CspModel:
    filters: np.ndarray  # (2m, C)
    eigvals: np.ndarray  # m largest descending, then m smallest ascending
    m: int
    band: Optional[BandDef] = None
    shrinkage: float = 0.0
    ridge: float = DEFAULT_RIDGE
    ridge_applied: bool = False

    @property
    def n_channels(self) -> int:
        return self.filters.shape[1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "filters": self.filters.tolist(),
            "eigvals": self.eigvals.tolist(),
            "m": self.m,
            "band": self.band.to_dict() if self.band else None,
            "shrinkage": self.shrinkage,
            "ridge": self.ridge,
            "ridge_applied": self.ridge_applied,
        }

    @classmethod
    def from_dict(cls, d) -> "CspModel":
        return cls(np.array(d["filters"], dtype=np.float64), np.array(d["eigvals"], dtype=np.float64),
                   int(d["m"]), BandDef.from_dict(d["band"]) if d.get("band") else None,
                   float(d["shrinkage"]), float(d["ridge"]), bool(d["ridge_applied"]))


def shrink(cov: np.ndarray, gamma: float) -> np.ndarray:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("shrinkage must lie in [0, 1]")
    if gamma == 0.0:
        return cov
    c = cov.shape[0]
    return (1 - gamma) * cov + gamma * np.trace(cov) / c * np.eye(c)


def regularize(sigma_r, sigma_f, shrinkage=0.0, ridge=DEFAULT_RIDGE):
    """Shrink each class covariance, then ridge the composite when ill-conditioned.

    The ridge ``ridge * trace / C`` is split evenly between the two classes, so
    the regularized pair still sums to the regularized composite. It is only
    added when the composite's smallest eigenvalue falls below it.

    Returns ``(sigma_r, sigma_f, ridge_applied)``.
    """
    sigma_r = shrink(np.asarray(sigma_r, dtype=np.float64), shrinkage)
    sigma_f = shrink(np.asarray(sigma_f, dtype=np.float64), shrinkage)
    composite = sigma_r + sigma_f
    c = composite.shape[0]
    lam = ridge * np.trace(composite) / c
    applied = False
    if lam > 0 and np.linalg.eigvalsh((composite + composite.T) / 2)[0] < lam:
        sigma_r = sigma_r + lam / 2 * np.eye(c)
        sigma_f = sigma_f + lam / 2 * np.eye(c)
        applied = True
    return sigma_r, sigma_f, applied


def _fix_signs(filters):
    idx = np.argmax(np.abs(filters), axis=1)
    signs = np.sign(filters[np.arange(len(filters)), idx])
    signs[signs == 0] = 1.0
    return filters * signs[:, None]


def csp_fit(sigma_r, sigma_f, m: int = DEFAULT_M, shrinkage: float = 0.0,
            ridge: float = DEFAULT_RIDGE, band: Optional[BandDef] = None) -> CspModel:
    """Fit CSP filters from the two class covariances.

    Parameters
    ----------
    sigma_r, sigma_f : ndarray, shape (C, C)
        Remembered and forgotten class covariances.
    m : int
        Number of filter pairs; ``2m <= C``.
    shrinkage : float
        Blend of each class covariance toward ``trace/C * I``.
    ridge : float
        Relative ridge added when the composite is near singular.

    Returns
    -------
    CspModel
        Rows of ``filters`` satisfy ``W (S_R + S_F) W^T = I`` for the
        regularized covariances.
    """
    sigma_r = np.asarray(sigma_r, dtype=np.float64)
    sigma_f = np.asarray(sigma_f, dtype=np.float64)
    if sigma_r.ndim != 2 or sigma_r.shape[0] != sigma_r.shape[1] or sigma_r.shape != sigma_f.shape:
        raise ShapeError("class covariances must be equal-sized square matrices")
    c = sigma_r.shape[0]
    if m < 1 or 2 * m > c:
        raise ValueError(f"need 1 <= m and 2m <= C (C={c}, m={m})")
    sigma_r, sigma_f, applied = regularize(sigma_r, sigma_f, shrinkage, ridge)

    composite = sigma_r + sigma_f
    d, u = np.linalg.eigh((composite + composite.T) / 2)
    if not d[0] > 0 or d[0] < np.finfo(float).eps * d[-1]:
        raise SingularCovariance("composite covariance is not positive definite; "
                                 "increase ridge or shrinkage")
    whiten = (u / np.sqrt(d)).T
    s = whiten @ sigma_r @ whiten.T
    lam, b = np.linalg.eigh((s + s.T) / 2)
    all_filters = b.T @ whiten

    order = np.concatenate([np.arange(c - 1, c - 1 - m, -1), np.arange(m)])
    filters = _fix_signs(all_filters[order])
    return CspModel(filters, lam[order], int(m), band, float(shrinkage), float(ridge), applied)


def csp_features(model: CspModel, epochs) -> np.ndarray:
    """Log-normalized variance of each trial projected on each filter."""
    data = epochs.data if isinstance(epochs, EpochSet) else np.asarray(epochs, dtype=np.float64)
    if data.ndim != 3 or data.shape[1] != model.n_channels:
        raise ShapeError(f"expected (trials, {model.n_channels}, samples), got {data.shape}")
    proj = np.einsum("fc,nct->nft", model.filters, data)
    v = np.var(proj, axis=-1)
    k = model.filters.shape[0]
    return np.log((v + FEATURE_EPS) / (v.sum(axis=1, keepdims=True) + k * FEATURE_EPS))


@dataclass(frozen=True)
class FbcspModel:
    bands: Tuple[BandDef, ...]
    per_band: Tuple[CspModel, ...]
    fs: float

    @property
    def feature_dim(self) -> int:
        return sum(mod.filters.shape[0] for mod in self.per_band)

    def model_for(self, name: str) -> CspModel:
        for band, mod in zip(self.bands, self.per_band):
            if band.name == name:
                return mod
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {"fs": self.fs, "bands": [b.to_dict() for b in self.bands],
                "per_band": [mod.to_dict() for mod in self.per_band]}

    @classmethod
    def from_dict(cls, d) -> "FbcspModel":
        return cls(tuple(BandDef.from_dict(b) for b in d["bands"]),
                   tuple(CspModel.from_dict(p) for p in d["per_band"]), float(d["fs"]))


def fbcsp_fit(epochs: EpochSet, bands: Sequence[BandDef], m: int = DEFAULT_M,
              shrinkage: float = 0.0, ridge: float = DEFAULT_RIDGE) -> FbcspModel:
    models = []
    for band in bands:
        filtered = epochs.with_data(bandpass_epochs(epochs.data, band, epochs.fs))
        sr, sf = class_covariances(filtered)
        models.append(csp_fit(sr, sf, m, shrinkage, ridge, band=band))
    return FbcspModel(tuple(bands), tuple(models), float(epochs.fs))


def fbcsp_features(model: FbcspModel, epochs: EpochSet) -> np.ndarray:
    """Concatenated per-band CSP features in the model's band order."""
    blocks = [csp_features(mod, bandpass_epochs(epochs.data, band, epochs.fs))
              for band, mod in zip(model.bands, model.per_band)]
    return np.concatenate(blocks, axis=1)
