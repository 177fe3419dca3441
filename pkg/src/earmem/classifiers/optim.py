"""Adam with bias correction, operating on dicts of arrays."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from ..errors import ShapeError


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("lr must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class AdamState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """One Adam update; returns ``(new_params, new_state)`` without mutating inputs."""
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ShapeError("params, grads and optimizer state must share keys")
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    new_params, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape or state.m[k].shape != p.shape:
            raise ShapeError(f"shape mismatch for {k}")
        m = b1 * state.m[k] + (1 - b1) * g
        v = b2 * state.v[k] + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_params[k] = p - config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
        new_m[k], new_v[k] = m, v
    return new_params, AdamState(new_m, new_v, t)
