"""Stratified k-fold cross-validation and its report."""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np

from . import __version__
from .data import EpochSet, balanced_accuracy
from .errors import MissingCondition, TooFewTrials
from .pipelines import PipelineParams, fit_pipeline

REPORT_FORMAT = "earmem-cv-report"
STD_NOTE = "std uses the population denominator (k)"


def stratified_kfold(labels, k: int = 10, seed: int = 0) -> List[np.ndarray]:
    """Split trial indices into ``k`` disjoint folds with balanced classes.

    Each class is shuffled with ``seed`` and dealt round-robin; the dealing
    position carries over from one class to the next, so overall fold sizes
    and per-class counts both differ by at most one.
    """
    labels = np.asarray(labels)
    n = labels.size
    if k < 2:
        raise ValueError("k must be at least 2")
    if n < k:
        raise TooFewTrials(f"{n} trials cannot fill {k} folds")
    classes = np.unique(labels)
    if classes.size < 2:
        raise MissingCondition("stratification needs both conditions present")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    offset = 0
    for c in classes:
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        fold_of[idx] = (offset + np.arange(idx.size)) % k
        offset = (offset + idx.size) % k
    return [np.flatnonzero(fold_of == f) for f in range(k)]


def fold_seed(seed: int, fold: int) -> int:
    """Seed for one fold, independent of the order folds are run in."""
    return int(np.random.SeedSequence([int(seed), int(fold)]).generate_state(1)[0])


def dataset_id(epochs: EpochSet) -> str:
    """Short content hash of the data and labels."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(epochs.data, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(epochs.labels, dtype="<i8").tobytes())
    return "sha256:" + h.hexdigest()[:12]


@dataclass
class CvReport:
    method_name: str
    seed: int
    k: int
    fold_accuracies: List[float]
    balanced_accuracies: List[float]
    fold_sizes: List[int]
    dataset: str = ""
    segment: str = ""
    params: Dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_accuracies))

    @property
    def balanced_mean(self) -> float:
        return float(np.mean(self.balanced_accuracies))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": REPORT_FORMAT,
            "tool_version": self.version,
            "method": self.method_name,
            "seed": self.seed,
            "k": self.k,
            "dataset": self.dataset,
            "segment": self.segment,
            "params": self.params,
            "fold_accuracies": self.fold_accuracies,
            "balanced_accuracies": self.balanced_accuracies,
            "fold_sizes": self.fold_sizes,
            "mean": self.mean,
            "std": self.std,
            "balanced_mean": self.balanced_mean,
            "note": STD_NOTE,
        }

    @classmethod
    def from_dict(cls, d) -> "CvReport":
        if d.get("format") != REPORT_FORMAT:
            raise ValueError("not a cross-validation report")
        return cls(d["method"], int(d["seed"]), int(d["k"]),
                   [float(a) for a in d["fold_accuracies"]],
                   [float(a) for a in d["balanced_accuracies"]],
                   [int(s) for s in d["fold_sizes"]], d.get("dataset", ""),
                   d.get("segment", ""), dict(d.get("params", {})), d.get("tool_version", ""))

    def to_csv(self) -> str:
        buf = _io.StringIO()
        buf.write(f"# method: {self.method_name}\n# seed: {self.seed}\n# k: {self.k}\n")
        buf.write(f"# dataset: {self.dataset}\n# segment: {self.segment}\n")
        buf.write(f"# params: {json.dumps(self.params, sort_keys=True)}\n")
        buf.write(f"# tool_version: {self.version}\n# {STD_NOTE}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold", "n_test", "accuracy", "balanced_accuracy"])
        for i, (a, b, s) in enumerate(zip(self.fold_accuracies, self.balanced_accuracies,
                                          self.fold_sizes)):
            w.writerow([i, s, repr(a), repr(b)])
        w.writerow(["mean", sum(self.fold_sizes), repr(self.mean), repr(self.balanced_mean)])
        w.writerow(["std", "", repr(self.std), repr(float(np.std(self.balanced_accuracies)))])
        return buf.getvalue()

    def write(self, path) -> None:
        """Write JSON or CSV depending on the file suffix."""
        path = Path(path)
        if path.suffix.lower() == ".csv":
            path.write_text(self.to_csv())
        else:
            path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def load_report(path) -> CvReport:
    return CvReport.from_dict(json.loads(Path(path).read_text()))


Method = Union[str, Callable[[EpochSet, int], Any]]


def cross_validate(dataset: EpochSet, method: Method, k: int = 10, seed: int = 0,
                   params: Optional[PipelineParams] = None, return_models: bool = False):
    """Run stratified k-fold cross-validation of a whole pipeline.

    Parameters
    ----------
    dataset : EpochSet
    method : str or callable
        One of ``csp-lda``, ``fbcsp-lda``, ``cnn``, or a callable
        ``fit(train, seed)`` returning an object with ``predict(epochs)``.
    k, seed : int
        Fold count and master seed. Fold assignment uses ``seed``; each
        fold's training uses a seed derived from ``(seed, fold)``.
    params : PipelineParams, optional
    return_models : bool
        Also return the fitted per-fold pipelines.

    Returns
    -------
    CvReport, or ``(CvReport, models)`` when ``return_models`` is set.
    """
    params = params or PipelineParams()
    if isinstance(method, str):
        name = method
        fit = lambda train, s: fit_pipeline(name, train, s, params)
        used = params.for_method(name)
    else:
        name = getattr(method, "__name__", type(method).__name__)
        fit, used = method, {}
    folds = stratified_kfold(dataset.labels, k, seed)
    accs, baccs, sizes, models = [], [], [], []
    for f, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(dataset.n_trials), test_idx)
        fitted = fit(dataset.subset(train_idx), fold_seed(seed, f))
        test = dataset.subset(test_idx)
        pred = np.asarray(fitted.predict(test))
        accs.append(float(np.mean(pred == test.labels)))
        baccs.append(balanced_accuracy(test.labels, pred))
        sizes.append(int(test_idx.size))
        if return_models:
            models.append(fitted)
    report = CvReport(name, int(seed), int(k), accs, baccs, sizes, dataset_id(dataset),
                      dataset.segment.value, used)
    return (report, models) if return_models else report
