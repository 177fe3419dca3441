"""Single-convolution network on band-filtered EEG, trained with Adam.

Layer sequence: input dropout -> conv (30 x C kernel, stride 25 in time,
4 band input maps, 20 output maps) -> batch norm -> ReLU -> fully connected
(2 logits). Softmax only appears inside the cross-entropy loss.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..data import BandDef, EpochSet, Label
from ..errors import CorruptContainer, ShapeError, UninitializedStats, VersionError
from ..sigproc import bandpass_epochs
from .optim import AdamState, TrainConfig, adam_step

N_MAPS = 20
KERNEL_T = 30
STRIDE_T = 25
DROPOUT_P = 0.25
BN_EPS = 1e-5
BN_MOMENTUM = 0.9
NORM_FLOOR = 1e-12

TRAIN, EVAL = "train", "eval"
PARAM_KEYS = ("conv_w", "conv_b", "bn_gamma", "bn_beta", "fc_w", "fc_b")
BUFFER_KEYS = ("bn_running_mean", "bn_running_var", "norm_mean", "norm_std")


def conv_output_length(n_samples: int, kernel: int = KERNEL_T, stride: int = STRIDE_T) -> int:
    return (n_samples - kernel) // stride + 1


@dataclass
class CnnModel:
    conv_w: np.ndarray  # (maps, bands, kernel, channels)
    conv_b: np.ndarray
    bn_gamma: np.ndarray
    bn_beta: np.ndarray
    fc_w: np.ndarray  # (2, maps * t_out)
    fc_b: np.ndarray
    bn_running_mean: Optional[np.ndarray] = None
    bn_running_var: Optional[np.ndarray] = None
    norm_mean: Optional[np.ndarray] = None  # (bands, channels)
    norm_std: Optional[np.ndarray] = None
    n_samples: int = 250
    dropout_p: float = DROPOUT_P
    mode: str = TRAIN
    bands: Tuple[BandDef, ...] = ()
    config: Optional[TrainConfig] = None

    @property
    def n_bands(self) -> int:
        return self.conv_w.shape[1]

    @property
    def n_channels(self) -> int:
        return self.conv_w.shape[3]

    @property
    def t_out(self) -> int:
        return conv_output_length(self.n_samples)

    def params(self) -> Dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_KEYS}

    def set_params(self, params: Dict[str, np.ndarray]) -> None:
        for k in PARAM_KEYS:
            setattr(self, k, params[k])

    def n_parameters(self) -> int:
        return sum(p.size for p in self.params().values())


def init_cnn(n_channels: int, n_bands: int = 4, n_samples: int = 250,
             rng: Optional[np.random.Generator] = None, seed: int = 0) -> CnnModel:
    """He-style uniform fan-in initialization."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    t_out = conv_output_length(n_samples)
    if t_out < 1:
        raise ShapeError(f"{n_samples} samples is shorter than the {KERNEL_T}-tap kernel")
    fan_conv = n_bands * KERNEL_T * n_channels
    fan_fc = N_MAPS * t_out
    lim_conv = np.sqrt(6.0 / fan_conv)
    lim_fc = np.sqrt(6.0 / fan_fc)
    return CnnModel(
        conv_w=rng.uniform(-lim_conv, lim_conv, (N_MAPS, n_bands, KERNEL_T, n_channels)),
        conv_b=np.zeros(N_MAPS),
        bn_gamma=np.ones(N_MAPS),
        bn_beta=np.zeros(N_MAPS),
        fc_w=rng.uniform(-lim_fc, lim_fc, (2, fan_fc)),
        fc_b=np.zeros(2),
        n_samples=n_samples,
    )


def _windows(x: np.ndarray, t_out: int) -> np.ndarray:
    """(B, bands, T, C) -> (B, t_out, bands * kernel * C)."""
    b = x.shape[0]
    cols = np.stack([x[:, :, s * STRIDE_T:s * STRIDE_T + KERNEL_T, :] for s in range(t_out)], axis=1)
    return cols.reshape(b, t_out, -1)


def dropout_mask(shape, p: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout multiplier: 0 with probability p, else 1/(1-p)."""
    keep = rng.random(shape) >= p
    return keep / (1.0 - p)


def cnn_forward(model: CnnModel, batch, mode: str = EVAL, rng=None, mask=None):
    """Return ``(logits, cache)`` for a ``(B, bands, T, C)`` batch.

    In ``train`` mode dropout uses ``mask`` if given, else a mask drawn from
    ``rng``; batch norm uses batch statistics over (batch, time positions).
    In ``eval`` mode dropout is off and running statistics are used.
    """
    x = np.asarray(batch, dtype=np.float64)
    expected = (model.n_bands, model.n_samples, model.n_channels)
    if x.ndim != 4 or x.shape[1:] != expected:
        raise ShapeError(f"expected batch (B, {expected[0]}, {expected[1]}, {expected[2]}), got {x.shape}")
    if mode not in (TRAIN, EVAL):
        raise ValueError(f"unknown mode {mode!r}")
    t_out = model.t_out
    cache: Dict[str, Any] = {"mode": mode}

    if mode == TRAIN and model.dropout_p > 0:
        if mask is None:
            if rng is None:
                raise ValueError("train mode needs a dropout mask or an rng")
            mask = dropout_mask(x.shape, model.dropout_p, rng)
        x = x * mask
    cols = _windows(x, t_out)
    z = cols @ model.conv_w.reshape(N_MAPS, -1).T + model.conv_b  # (B, t_out, maps)

    if mode == TRAIN:
        mu = z.mean(axis=(0, 1))
        var = z.var(axis=(0, 1))
    else:
        if model.bn_running_mean is None or model.bn_running_var is None:
            raise UninitializedStats("eval mode requires batch-norm running statistics")
        mu, var = model.bn_running_mean, model.bn_running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (z - mu) * inv_std
    y = model.bn_gamma * xhat + model.bn_beta
    a = np.maximum(y, 0.0)
    flat = a.transpose(0, 2, 1).reshape(a.shape[0], -1)  # map-major (maps, t_out)
    logits = flat @ model.fc_w.T + model.fc_b
    cache.update(cols=cols, z=z, mu=mu, var=var, inv_std=inv_std, xhat=xhat, y=y, flat=flat)
    return logits, cache


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(len(labels)), labels].mean())


def cnn_backward(model: CnnModel, cache, labels: np.ndarray, logits: np.ndarray):
    """Exact gradients of the mean cross-entropy for a train-mode forward."""
    n = len(labels)
    dlogits = softmax(logits)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    grads = {"fc_w": dlogits.T @ cache["flat"], "fc_b": dlogits.sum(axis=0)}

    t_out = model.t_out
    dflat = dlogits @ model.fc_w
    da = dflat.reshape(n, N_MAPS, t_out).transpose(0, 2, 1)
    dy = da * (cache["y"] > 0)
    xhat = cache["xhat"]
    grads["bn_gamma"] = (dy * xhat).sum(axis=(0, 1))
    grads["bn_beta"] = dy.sum(axis=(0, 1))

    dxhat = dy * model.bn_gamma
    m = n * t_out
    dz = (cache["inv_std"] / m) * (m * dxhat - dxhat.sum(axis=(0, 1))
                                   - xhat * (dxhat * xhat).sum(axis=(0, 1)))
    grads["conv_b"] = dz.sum(axis=(0, 1))
    cols = cache["cols"]
    grads["conv_w"] = (dz.reshape(-1, N_MAPS).T @ cols.reshape(-1, cols.shape[-1])
                       ).reshape(model.conv_w.shape)
    return grads


def cnn_loss_and_grads(model: CnnModel, batch, labels, dropout_mask_seed: int):
    """Train-mode loss and gradients; the dropout mask is drawn from the seed."""
    labels = np.asarray(labels, dtype=np.int64)
    x = np.asarray(batch, dtype=np.float64)
    if labels.shape != (x.shape[0],):
        raise ShapeError("one label per batch item required")
    rng = np.random.default_rng(dropout_mask_seed)
    logits, cache = cnn_forward(model, x, TRAIN, rng=rng)
    return cross_entropy(logits, labels), cnn_backward(model, cache, labels, logits)


def gradient_check(model: CnnModel, batch, labels, dropout_mask_seed: int = 0, h: float = 1e-5,
                   max_entries: Optional[int] = None, seed: int = 0,
                   floor: float = 1e-6) -> Dict[str, float]:
    """Largest relative error of backprop against central differences, per group.

    The error of one entry is ``|g - n| / max(|g|, |n|, floor)``. ``max_entries``
    caps how many entries of each group are probed (chosen at random with
    ``seed``); ``None`` probes all of them. The dropout mask is held fixed.
    """
    _, grads = cnn_loss_and_grads(model, batch, labels, dropout_mask_seed)
    rng = np.random.default_rng(seed)
    worst = {}
    for key in PARAM_KEYS:
        param = getattr(model, key)
        flat_idx = np.arange(param.size)
        if max_entries is not None and param.size > max_entries:
            flat_idx = rng.choice(param.size, max_entries, replace=False)
        err = 0.0
        for i in flat_idx:
            pos = np.unravel_index(i, param.shape)
            orig = param[pos]
            param[pos] = orig + h
            up, _ = cnn_loss_and_grads(model, batch, labels, dropout_mask_seed)
            param[pos] = orig - h
            down, _ = cnn_loss_and_grads(model, batch, labels, dropout_mask_seed)
            param[pos] = orig
            num = (up - down) / (2 * h)
            ana = grads[key][pos]
            err = max(err, abs(ana - num) / max(abs(ana), abs(num), floor))
        worst[key] = err
    return worst


# ---------------------------------------------------------------- data -> network input

def build_input(epochs: EpochSet, bands: Sequence[BandDef]) -> np.ndarray:
    """Band-pass each epoch in every band: (trials, bands, time, channels)."""
    stacked = np.stack([bandpass_epochs(epochs.data, band, epochs.fs) for band in bands], axis=1)
    return np.ascontiguousarray(stacked.transpose(0, 1, 3, 2))


def _normalize(model: CnnModel, x: np.ndarray) -> np.ndarray:
    return (x - model.norm_mean[None, :, None, :]) / model.norm_std[None, :, None, :]


def _update_running(model: CnnModel, mu, var):
    if model.bn_running_mean is None:
        model.bn_running_mean, model.bn_running_var = mu.copy(), var.copy()
    else:
        model.bn_running_mean = BN_MOMENTUM * model.bn_running_mean + (1 - BN_MOMENTUM) * mu
        model.bn_running_var = BN_MOMENTUM * model.bn_running_var + (1 - BN_MOMENTUM) * var


def _finalize_bn(model: CnnModel, x: np.ndarray, chunk: int = 256) -> None:
    """Set running statistics to the exact conv-output moments over ``x``."""
    flat_w = model.conv_w.reshape(N_MAPS, -1).T
    total = np.zeros(N_MAPS)
    total_sq = np.zeros(N_MAPS)
    count = 0
    for start in range(0, len(x), chunk):
        z = _windows(x[start:start + chunk], model.t_out) @ flat_w + model.conv_b
        total += z.sum(axis=(0, 1))
        total_sq += (z * z).sum(axis=(0, 1))
        count += z.shape[0] * z.shape[1]
    mu = total / count
    model.bn_running_mean = mu
    model.bn_running_var = np.maximum(total_sq / count - mu * mu, 0.0)


def cnn_train(epochs: EpochSet, bands: Sequence[BandDef], config: Optional[TrainConfig] = None,
              callback=None) -> CnnModel:
    """Train the network on an EpochSet and return an eval-mode model.

    Inputs are z-scored per (band, channel) with statistics of ``epochs``
    only; those statistics travel with the model. After the last epoch the
    batch-norm running statistics are replaced by the exact moments over the
    whole (dropout-free) training input.
    """
    config = config or TrainConfig()
    epochs.require_both_classes(minimum=2)
    rng = np.random.default_rng(config.seed)
    x = build_input(epochs, bands)
    y = epochs.labels.astype(np.int64)

    model = init_cnn(epochs.n_channels, len(bands), epochs.n_samples, rng=rng)
    model.bands = tuple(bands)
    model.config = config
    model.norm_mean = x.mean(axis=(0, 2))
    model.norm_std = np.maximum(x.std(axis=(0, 2)), NORM_FLOOR)
    x = _normalize(model, x)

    params = model.params()
    state = AdamState.zeros_like(params)
    n = len(y)
    for ep in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            logits, cache = cnn_forward(model, x[idx], TRAIN, rng=rng)
            grads = cnn_backward(model, cache, y[idx], logits)
            _update_running(model, cache["mu"], cache["var"])
            params, state = adam_step(params, grads, state, config)
            model.set_params(params)
        if callback is not None:
            callback(ep, model)

    _finalize_bn(model, x)
    model.mode = EVAL
    return model


def cnn_predict(model: CnnModel, epochs: EpochSet, chunk: int = 256):
    """Labels and class probabilities for raw epochs."""
    if epochs.n_channels != model.n_channels:
        raise ShapeError(f"model expects {model.n_channels} channels, got {epochs.n_channels}")
    x = _normalize(model, build_input(epochs, model.bands))
    probs = []
    for start in range(0, len(x), chunk):
        logits, _ = cnn_forward(model, x[start:start + chunk], EVAL)
        probs.append(softmax(logits))
    probs = np.concatenate(probs) if probs else np.zeros((0, 2))
    labels = np.where(probs[:, 1] > probs[:, 0], int(Label.REMEMBERED), int(Label.FORGOTTEN))
    return labels, probs


# ---------------------------------------------------------------- serialization

_BLOCK_ORDER = PARAM_KEYS + BUFFER_KEYS


def save_cnn(model: CnnModel, path) -> Tuple[Path, Path]:
    """Write a JSON manifest at ``path`` and a raw ``<f8`` block next to it."""
    path = Path(path)
    blob_path = path.with_name(path.name + ".f64")
    arrays = []
    layout = []
    for k in _BLOCK_ORDER:
        arr = getattr(model, k)
        if arr is None:
            raise UninitializedStats(f"cannot serialize model with unset {k}")
        arr = np.ascontiguousarray(arr, dtype="<f8")
        layout.append({"name": k, "shape": list(arr.shape)})
        arrays.append(arr.ravel())
    manifest = {
        "format": "earmem-cnn",
        "version": 1,
        "n_channels": model.n_channels,
        "n_bands": model.n_bands,
        "n_samples": model.n_samples,
        "dropout_p": model.dropout_p,
        "bn_eps": BN_EPS,
        "bn_momentum": BN_MOMENTUM,
        "mode": model.mode,
        "bands": [b.to_dict() for b in model.bands],
        "config": model.config.to_dict() if model.config else None,
        "blob": blob_path.name,
        "layout": layout,
    }
    blob_path.write_bytes(np.concatenate(arrays).tobytes())
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path, blob_path


def cnn_from_manifest(manifest: Dict[str, Any], blob: bytes) -> CnnModel:
    if manifest.get("format") != "earmem-cnn" or manifest.get("version") != 1:
        raise VersionError(f"unsupported model format {manifest.get('format')!r} "
                           f"version {manifest.get('version')!r}")
    flat = np.frombuffer(blob[:len(blob) - len(blob) % 8], dtype="<f8")
    expected = sum(int(np.prod(e["shape"])) for e in manifest["layout"])
    if len(blob) % 8 or flat.size != expected:
        raise CorruptContainer(f"parameter block holds {flat.size} values, expected {expected}")
    values = {}
    offset = 0
    for entry in manifest["layout"]:
        size = int(np.prod(entry["shape"]))
        values[entry["name"]] = flat[offset:offset + size].reshape(entry["shape"]).astype(np.float64)
        offset += size
    cfg = manifest.get("config")
    return CnnModel(
        **values,
        n_samples=int(manifest["n_samples"]),
        dropout_p=float(manifest["dropout_p"]),
        mode=manifest["mode"],
        bands=tuple(BandDef.from_dict(b) for b in manifest["bands"]),
        config=TrainConfig(**cfg) if cfg else None,
    )


def load_cnn(path) -> CnnModel:
    path = Path(path)
    manifest = json.loads(path.read_text())
    return cnn_from_manifest(manifest, (path.parent / manifest["blob"]).read_bytes())
