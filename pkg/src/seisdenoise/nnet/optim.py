"""Adam optimizer and training-state container."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, TrainingDivergedError
from .unet import UNetConfig, UNetParams, init_params


@dataclass
class TrainState:
    """Parameters plus optimizer moments and training bookkeeping.

    ``loss_history`` holds one row per finished epoch:
    (epoch, train_msle, val_msle, lr, wall_seconds).
    """

    params: UNetParams
    m: dict[str, np.ndarray] = field(repr=False)
    v: dict[str, np.ndarray] = field(repr=False)
    step: int = 0
    epoch: int = 0
    seed: int = 0
    loss_history: list[tuple] = field(default_factory=list)


def init_train_state(cfg: UNetConfig, seed: int = 0) -> TrainState:
    params = init_params(cfg, seed)
    zeros = {n: np.zeros_like(params.arrays[n]) for n in params.learnable_names()}
    return TrainState(params=params,
                      m={n: z.copy() for n, z in zeros.items()},
                      v=zeros, seed=seed)


def adam_step(state: TrainState, grads: dict[str, np.ndarray], lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> TrainState:
    """Bias-corrected Adam update, applied in place; returns the state."""
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name in state.m:
        g = grads[name]
        p = state.params.arrays[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient in parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state
