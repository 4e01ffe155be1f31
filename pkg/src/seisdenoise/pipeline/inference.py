"""Full-gather denoising: normalize, patch, infer, stitch, denormalize."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..nnet import UNetParams, unet_forward
from ..wavesim import ShotGather
from .normalize import compute_norm
from .patches import patchify, unpatchify


def _largest_divisible(size: int, div: int) -> int:
    out = (size // div) * div
    if out == 0:
        raise ShapeError(f"extent {size} smaller than the network granularity {div}")
    return out


def default_patch(nt: int, nrec: int, levels: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Full gather when divisible by 2^levels, else the largest divisible
    patch with 50% overlap."""
    div = 2 ** levels
    if nt % div == 0 and nrec % div == 0:
        return (nt, nrec), (nt, nrec)
    ph = _largest_divisible(nt, div)
    pw = _largest_divisible(nrec, div)
    return (ph, pw), (max(1, ph // 2), max(1, pw // 2))


def denoise(gather, params: UNetParams,
            patch_hw: tuple[int, int] | None = None,
            stride_hw: tuple[int, int] | None = None,
            batch_size: int = 8) -> ShotGather:
    """Apply a trained network to a gather (or channel list of gathers).

    The input is normalized with its own robust scale (computed from the
    first channel, the same convention the dataset builders use), processed
    patch-wise in infer mode, stitched with tapered overlap weights, and
    mapped back to physical amplitudes.
    """
    channels = gather if isinstance(gather, (list, tuple)) else [gather]
    primary = channels[0]
    cfg = params.config
    if len(channels) != cfg.in_channels:
        raise ShapeError(
            f"got {len(channels)} input channels, network expects {cfg.in_channels}"
        )
    for g in channels[1:]:
        if g.data.shape != primary.data.shape:
            raise ShapeError("input channels must share gather dimensions")

    stack = np.stack([g.data for g in channels]).astype(np.float32)
    if patch_hw is None:
        patch_hw, auto_stride = default_patch(primary.nt, primary.nrec, cfg.levels)
        stride_hw = auto_stride if stride_hw is None else stride_hw
    div = 2 ** cfg.levels
    if patch_hw[0] % div or patch_hw[1] % div:
        raise ShapeError(f"patch {patch_hw} not divisible by 2^levels={div}")

    norm = compute_norm(stack[0])
    xn = norm.forward(stack).astype(np.float32)

    pieces = patchify(xn, patch_hw[0], patch_hw[1],
                      None if stride_hw is None else stride_hw[0],
                      None if stride_hw is None else stride_hw[1])
    outputs = []
    for i in range(0, len(pieces), batch_size):
        xb = np.stack([p for p, _ in pieces[i:i + batch_size]])
        yb, _ = unet_forward(cfg, params, xb, "infer")
        outputs.extend(yb[:, 0])
    stitched = unpatchify(
        [(o, org) for o, (_, org) in zip(outputs, pieces)],
        (primary.nt, primary.nrec))
    result = norm.inverse(stitched).astype(np.float32)
    return primary.with_data(result, tag="denoised")
