"""End-to-end classification pipelines: CSP-LDA, FBCSP-LDA and the CNN.

Each pipeline is fit on an EpochSet and predicts labels for another one.
Everything learned from data lives in the fitted object, so fitting on
training folds only cannot leak held-out information.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from . import __version__
from .classifiers import TrainConfig, cnn_predict, cnn_train, lda_fit, lda_predict, load_cnn, save_cnn
from .classifiers.cnn import CnnModel
from .classifiers.lda import LdaModel
from .csp import (CspModel, FbcspModel, class_covariances, csp_features, csp_fit, fbcsp_features,
                  fbcsp_fit)
from .data import DEFAULT_BANDS, EpochSet
from .errors import VersionError
from .io import dump_json

CSP_LDA = "csp-lda"
FBCSP_LDA = "fbcsp-lda"
CNN = "cnn"
METHODS = (CSP_LDA, FBCSP_LDA, CNN)
MODEL_FORMAT = "earmem-pipeline"


@dataclass(frozen=True)
class PipelineParams:
    """Hyperparameters for every method; each method reads the ones it needs."""

    m: int = 3
    gamma: float = 0.1
    shrinkage: float = 0.0
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int = 32

    def for_method(self, method: str) -> Dict[str, Any]:
        if method == CNN:
            return {"epochs": self.epochs, "lr": self.lr, "batch_size": self.batch_size}
        return {"m": self.m, "gamma": self.gamma, "shrinkage": self.shrinkage}

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(lr=self.lr, batch_size=self.batch_size, epochs=self.epochs, seed=int(seed))


@dataclass
class FittedCspLda:
    csp: CspModel
    lda: LdaModel
    method: str = CSP_LDA

    def predict(self, epochs: EpochSet) -> np.ndarray:
        return lda_predict(self.lda, csp_features(self.csp, epochs))[0]

    def to_dict(self) -> Dict[str, Any]:
        return {"csp": self.csp.to_dict(), "lda": self.lda.to_dict()}


@dataclass
class FittedFbcspLda:
    fbcsp: FbcspModel
    lda: LdaModel
    method: str = FBCSP_LDA

    def predict(self, epochs: EpochSet) -> np.ndarray:
        return lda_predict(self.lda, fbcsp_features(self.fbcsp, epochs))[0]

    def to_dict(self) -> Dict[str, Any]:
        return {"fbcsp": self.fbcsp.to_dict(), "lda": self.lda.to_dict()}


@dataclass
class FittedCnn:
    model: CnnModel
    method: str = CNN

    def predict(self, epochs: EpochSet) -> np.ndarray:
        return cnn_predict(self.model, epochs)[0]


def fit_pipeline(method: str, train: EpochSet, seed: int = 0,
                 params: Optional[PipelineParams] = None):
    """Fit ``method`` on ``train``; ``seed`` only matters for the CNN."""
    params = params or PipelineParams()
    if method == CSP_LDA:
        csp = csp_fit(*class_covariances(train), m=params.m, shrinkage=params.shrinkage)
        return FittedCspLda(csp, lda_fit(csp_features(csp, train), train.labels, params.gamma))
    if method == FBCSP_LDA:
        fb = fbcsp_fit(train, DEFAULT_BANDS, m=params.m, shrinkage=params.shrinkage)
        return FittedFbcspLda(fb, lda_fit(fbcsp_features(fb, train), train.labels, params.gamma))
    if method == CNN:
        return FittedCnn(cnn_train(train, DEFAULT_BANDS, params.train_config(seed)))
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def save_pipeline(fitted, path, params: PipelineParams, seed: int) -> None:
    """Serialize a fitted pipeline.

    LDA pipelines become one JSON document. The CNN is a JSON manifest at
    ``path`` plus a raw float64 block at ``<path>.f64``.
    """
    path = Path(path)
    if isinstance(fitted, FittedCnn):
        save_cnn(fitted.model, path)
        return
    doc = {"format": MODEL_FORMAT, "version": 1, "tool_version": __version__,
           "method": fitted.method, "seed": int(seed),
           "params": params.for_method(fitted.method), **fitted.to_dict()}
    dump_json(doc, path)


def load_pipeline(path):
    path = Path(path)
    doc = json.loads(path.read_text())
    if doc.get("format") == "earmem-cnn":
        return FittedCnn(load_cnn(path))
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != 1:
        raise VersionError(f"{path}: unsupported model format")
    lda = LdaModel.from_dict(doc["lda"])
    if doc["method"] == CSP_LDA:
        return FittedCspLda(CspModel.from_dict(doc["csp"]), lda)
    return FittedFbcspLda(FbcspModel.from_dict(doc["fbcsp"]), lda)
