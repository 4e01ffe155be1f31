"""Training loop: shuffled epochs, Adam, plateau LR halving, checkpoints."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ParameterError, TrainingDivergedError
from ..nnet import (TrainState, UNetConfig, adam_step, init_train_state, msle_loss,
                    save_params, unet_backward, unet_forward)
from .dataset import DatasetManifest, load_example


@dataclass(frozen=True)
class LrSchedule:
    """Constant rate, halved when the train loss plateaus."""

    initial: float = 1e-3
    plateau_patience: int = 50
    plateau_factor: float = 0.5
    min_lr: float = 1e-5


def _load_split(manifest: DatasetManifest, split: str):
    recs = manifest.split_examples(split)
    if not recs:
        return None, None
    xs, ys = zip(*(load_example(manifest, r) for r in recs))
    return np.stack(xs), np.stack(ys)


def _eval_loss(cfg, state, x, y, batch_size) -> float:
    total, n = 0.0, 0
    for i in range(0, x.shape[0], batch_size):
        xb, yb = x[i:i + batch_size], y[i:i + batch_size]
        pred, _ = unet_forward(cfg, state.params, xb, "infer")
        loss, _ = msle_loss(pred, yb)
        total += loss * xb.shape[0]
        n += xb.shape[0]
    return total / n


def train(manifest: DatasetManifest, cfg: UNetConfig, epochs: int, batch_size: int,
          seed: int, out_dir, lr: LrSchedule | float = LrSchedule(),
          checkpoint_every: int = 30, deterministic_timestamps: bool = False
          ) -> TrainState:
    """Fit the network on the manifest's train split.

    One epoch is a full shuffled pass; per-epoch mean train and val losses
    go to ``loss_history`` and ``loss_history.csv``. Checkpoints are written
    every ``checkpoint_every`` epochs, at the best val loss, and at the end.
    A non-finite loss or gradient aborts with the failing epoch/batch; the
    last checkpoint on disk is retained.
    """
    if isinstance(lr, float):
        lr = LrSchedule(initial=lr)
    if batch_size < 1:
        raise ParameterError(f"batch_size must be >= 1, got {batch_size}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    x_train, y_train = _load_split(manifest, "train")
    if x_train is None:
        raise ParameterError("manifest has no train examples")
    x_val, y_val = _load_split(manifest, "val")

    n_ch = x_train.shape[1]
    if n_ch != cfg.in_channels:
        raise ParameterError(
            f"dataset has {n_ch} input channels but config expects {cfg.in_channels}"
        )
    div = 2 ** cfg.levels
    if x_train.shape[2] % div or x_train.shape[3] % div:
        raise ParameterError(
            f"patch {x_train.shape[2]}x{x_train.shape[3]} not divisible by 2^levels={div}"
        )

    ss = np.random.SeedSequence(seed)
    init_seed, shuffle_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    state = init_train_state(cfg, init_seed)
    state.seed = seed
    shuffle_rng = np.random.default_rng(shuffle_seed)

    n = x_train.shape[0]
    rate = lr.initial
    best_val = np.inf
    best_train = np.inf
    since_improve = 0
    csv_path = out / "loss_history.csv"

    for epoch in range(epochs):
        t_start = time.perf_counter()
        perm = shuffle_rng.permutation(n)
        total, seen = 0.0, 0
        for bi, i in enumerate(range(0, n, batch_size)):
            sel = perm[i:i + batch_size]
            xb = x_train[sel]
            yb = y_train[sel]
            pred, cache = unet_forward(cfg, state.params, xb, "train")
            loss, grad = msle_loss(pred, yb)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch} batch {bi}; last checkpoint retained"
                )
            try:
                grads = unet_backward(cfg, state.params, cache, grad)
                adam_step(state, grads, rate)
            except TrainingDivergedError as exc:
                raise TrainingDivergedError(
                    f"epoch {epoch} batch {bi}: {exc}; last checkpoint retained"
                ) from exc
            total += loss * len(sel)
            seen += len(sel)
        train_loss = total / seen
        val_loss = _eval_loss(cfg, state, x_val, y_val, batch_size) if x_val is not None \
            else float("nan")
        wall = 0.0 if deterministic_timestamps else time.perf_counter() - t_start
        state.epoch = epoch + 1
        state.loss_history.append((epoch, train_loss, val_loss, rate, wall))

        if train_loss < best_train * (1.0 - 1e-4):
            best_train = train_loss
            since_improve = 0
        else:
            since_improve += 1
            if since_improve >= lr.plateau_patience and rate > lr.min_lr:
                rate = max(lr.min_lr, rate * lr.plateau_factor)
                since_improve = 0
        if x_val is not None and val_loss < best_val:
            best_val = val_loss
            save_params(state.params, out / "ckpt_best.unet")
        if checkpoint_every and (epoch + 1) % checkpoint_every == 0:
            save_params(state.params, out / f"ckpt_epoch{epoch + 1:04d}.unet")

    save_params(state.params, out / "ckpt_final.unet")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_msle", "val_msle", "lr", "wall_seconds"])
        for row in state.loss_history:
            writer.writerow([row[0], f"{row[1]:.8e}", f"{row[2]:.8e}",
                             f"{row[3]:.3e}", f"{row[4]:.3f}"])
    return state
