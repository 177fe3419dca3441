"""On-disk containers: a JSON manifest next to a raw little-endian float32 block.

An epoch container is a directory holding ``manifest.json`` and
``epochs.f32`` (trials x channels x samples, row-major). A recording
container holds ``recording.json`` and ``recording.f32`` (channels x time).
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict

import numpy as np

from .data import ContinuousRecording, EpochSet, Event, Segment
from .errors import CorruptContainer, VersionError

CONTAINER_VERSION = 1
EPOCH_MANIFEST = "manifest.json"
EPOCH_BLOB = "epochs.f32"
RECORDING_MANIFEST = "recording.json"
RECORDING_BLOB = "recording.f32"
_F32 = np.dtype("<f4")


def dump_json(obj: Any, path) -> None:
    """Write JSON with sorted keys so equal content gives equal bytes."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_manifest(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise FileNotFoundError(f"missing {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CorruptContainer(f"{path} is not valid JSON: {exc}") from exc
    if manifest.get("version") != CONTAINER_VERSION:
        raise VersionError(f"{path}: unsupported container version {manifest.get('version')!r}")
    return manifest


def _read_block(path: Path, shape) -> np.ndarray:
    raw = path.read_bytes()
    expected = _F32.itemsize * int(np.prod(shape))
    if len(raw) != expected:
        raise CorruptContainer(f"{path} holds {len(raw)} bytes, manifest implies {expected}")
    return np.frombuffer(raw, dtype=_F32).reshape(shape).astype(np.float64)


def save_epochs(epochs: EpochSet, path) -> Path:
    """Write ``epochs`` into directory ``path`` (created if needed)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": CONTAINER_VERSION,
        "fs": float(epochs.fs),
        "n_trials": epochs.n_trials,
        "n_channels": epochs.n_channels,
        "n_samples": epochs.n_samples,
        "segment": epochs.segment.value,
        "channel_names": list(epochs.channel_names),
        "labels": [int(v) for v in epochs.labels],
        "provenance": epochs.provenance,
    }
    (path / EPOCH_BLOB).write_bytes(np.ascontiguousarray(epochs.data, dtype=_F32).tobytes())
    dump_json(manifest, path / EPOCH_MANIFEST)
    return path


def load_epochs(path) -> EpochSet:
    path = Path(path)
    m = _read_manifest(path / EPOCH_MANIFEST)
    try:
        shape = (int(m["n_trials"]), int(m["n_channels"]), int(m["n_samples"]))
        labels = np.asarray(m["labels"], dtype=np.int64)
        names, fs, segment = list(m["channel_names"]), float(m["fs"]), Segment(m["segment"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptContainer(f"{path / EPOCH_MANIFEST}: malformed manifest ({exc})") from exc
    if labels.shape != (shape[0],) or len(names) != shape[1]:
        raise CorruptContainer("manifest labels or channel names disagree with its counts")
    data = _read_block(path / EPOCH_BLOB, shape)
    return EpochSet(data, fs, labels, segment, names, dict(m.get("provenance") or {}))


def save_recording(rec: ContinuousRecording, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": CONTAINER_VERSION,
        "fs": float(rec.fs),
        "n_channels": rec.n_channels,
        "n_times": rec.n_times,
        "channel_names": list(rec.channel_names),
        "events": [{"sample": int(e.sample), "confidence": int(e.confidence),
                    "was_old": bool(e.was_old)} for e in rec.events],
    }
    (path / RECORDING_BLOB).write_bytes(np.ascontiguousarray(rec.samples, dtype=_F32).tobytes())
    dump_json(manifest, path / RECORDING_MANIFEST)
    return path


def load_recording(path) -> ContinuousRecording:
    path = Path(path)
    m = _read_manifest(path / RECORDING_MANIFEST)
    try:
        shape = (int(m["n_channels"]), int(m["n_times"]))
        events = [Event(int(e["sample"]), int(e["confidence"]), bool(e["was_old"]))
                  for e in m["events"]]
        names, fs = list(m["channel_names"]), float(m["fs"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptContainer(f"{path / RECORDING_MANIFEST}: malformed manifest ({exc})") from exc
    return ContinuousRecording(_read_block(path / RECORDING_BLOB, shape), fs, names, events)
