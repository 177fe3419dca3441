"""Core containers shared by every stage of the pipeline."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import MissingCondition, ShapeError


class Label(enum.IntEnum):
    FORGOTTEN = 0
    REMEMBERED = 1

    @classmethod
    def from_name(cls, name: str) -> "Label":
        return cls[name.upper()]


class Segment(enum.Enum):
    PRE_STIMULUS = "pre"
    ON_GOING = "ongoing"


@dataclass(frozen=True)
class BandDef:
    """A named frequency band in Hz, ``lo < hi``."""

    name: str
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError(f"band {self.name!r}: need 0 < lo < hi, got {self.lo}, {self.hi}")

    def check(self, fs: float) -> None:
        if self.hi > fs / 2:
            raise ValueError(f"band {self.name!r} exceeds Nyquist for fs={fs}")

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d) -> "BandDef":
        return cls(d["name"], float(d["lo"]), float(d["hi"]))


THETA = BandDef("theta", 4.0, 8.0)
ALPHA = BandDef("alpha", 8.0, 12.0)
BETA = BandDef("beta", 12.0, 30.0)
GAMMA = BandDef("gamma", 30.0, 40.0)
DEFAULT_BANDS: Tuple[BandDef, ...] = (THETA, ALPHA, BETA, GAMMA)
BROADBAND = BandDef("broadband", 0.5, 40.0)

TARGET_FS = 250.0
EPOCH_SECONDS = 1.0


@dataclass(frozen=True)
class Event:
    sample: int
    confidence: int
    was_old: bool


@dataclass
class ContinuousRecording:
    """Multichannel continuous signal with stimulus events.

    ``samples`` has shape (channels, time) and is held in float64.
    """

    samples: np.ndarray
    fs: float
    channel_names: List[str]
    events: List[Event] = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ShapeError("samples must be (channels, time)")
        if self.fs <= 0:
            raise ValueError("fs must be positive")
        if len(self.channel_names) != self.samples.shape[0]:
            raise ShapeError("channel_names length does not match channel count")
        n_time = self.samples.shape[1]
        for ev in self.events:
            if not 0 <= ev.sample < n_time:
                raise ValueError(f"event sample {ev.sample} outside [0, {n_time})")
            if ev.confidence not in (1, 2, 3, 4):
                raise ValueError(f"confidence {ev.confidence} not in 1..4")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_times(self) -> int:
        return self.samples.shape[1]


@dataclass
class EpochSet:
    """Trials x channels x samples with one label per trial."""

    data: np.ndarray
    fs: float
    labels: np.ndarray
    segment: Segment
    channel_names: List[str]
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.data.ndim != 3:
            raise ShapeError("data must be (trials, channels, samples)")
        if self.labels.shape != (self.data.shape[0],):
            raise ShapeError("one label per trial required")
        if len(self.channel_names) != self.data.shape[1]:
            raise ShapeError("channel_names length does not match channel count")
        if not np.all(np.isin(self.labels, (Label.FORGOTTEN, Label.REMEMBERED))):
            raise ValueError("labels must be 0 (forgotten) or 1 (remembered)")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("epoch data contains NaN or Inf")
        self.segment = Segment(self.segment)

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    def subset(self, idx: Sequence[int]) -> "EpochSet":
        idx = np.asarray(idx, dtype=np.int64)
        return EpochSet(self.data[idx], self.fs, self.labels[idx], self.segment,
                        list(self.channel_names), dict(self.provenance))

    def with_data(self, data: np.ndarray) -> "EpochSet":
        return EpochSet(data, self.fs, self.labels.copy(), self.segment,
                        list(self.channel_names), dict(self.provenance))

    def class_data(self, label: Label) -> np.ndarray:
        return self.data[self.labels == int(label)]

    def require_both_classes(self, minimum: int = 1) -> None:
        for lab in Label:
            count = int(np.sum(self.labels == int(lab)))
            if count < minimum:
                raise MissingCondition(
                    f"need at least {minimum} {lab.name.lower()} trial(s), found {count}")


def label_names(labels: np.ndarray) -> List[str]:
    return [Label(int(v)).name.lower() for v in labels]


def labels_from_names(names: Sequence[str]) -> np.ndarray:
    return np.array([int(Label.from_name(n)) for n in names], dtype=np.int64)


def balanced_accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    recalls = []
    for lab in Label:
        mask = y_true == int(lab)
        if mask.any():
            recalls.append(np.mean(y_pred[mask] == int(lab)))
    return float(np.mean(recalls))


def default_bands(names: Optional[Sequence[str]] = None) -> List[BandDef]:
    if names is None:
        return list(DEFAULT_BANDS)
    by_name = {b.name: b for b in DEFAULT_BANDS}
    return [by_name[n] for n in names]
