"""Sliding-window patch extraction and tapered overlap stitching."""

from __future__ import annotations

import numpy as np

from ..errors import CoverageError, ParameterError


def patch_origins(size: int, patch: int, stride: int) -> list[int]:
    """Window start offsets along one axis, edge window anchored flush.

    The last window is shifted inward so it ends exactly at ``size`` (no
    zero padding), which may make the final stride shorter.
    """
    if patch > size:
        raise ParameterError(f"patch {patch} exceeds extent {size}; use patch <= {size}")
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    origins = list(range(0, size - patch + 1, stride))
    if origins[-1] != size - patch:
        origins.append(size - patch)
    return origins


def patchify(panel: np.ndarray, patch_h: int, patch_w: int,
             stride_h: int | None = None, stride_w: int | None = None):
    """Extract (patch, (row0, col0)) windows in row-major origin order.

    ``panel`` is (H, W) or (C, H, W); strides default to the patch size
    (non-overlapping tiling except for the flush-anchored edge windows).
    """
    if panel.ndim == 2:
        panel = panel[None]
    if panel.ndim != 3:
        raise ParameterError(f"panel must be (H, W) or (C, H, W), got {panel.shape}")
    _, H, W = panel.shape
    stride_h = patch_h if stride_h is None else stride_h
    stride_w = patch_w if stride_w is None else stride_w
    try:
        rows = patch_origins(H, patch_h, stride_h)
        cols = patch_origins(W, patch_w, stride_w)
    except ParameterError:
        raise ParameterError(
            f"patch {patch_h}x{patch_w} does not fit panel {H}x{W}; "
            f"maximal admissible patch is {H}x{W}"
        )
    out = []
    for r in rows:
        for c in cols:
            out.append((panel[:, r:r + patch_h, c:c + patch_w], (r, c)))
    return out


def _hann_weight(h: int, w: int) -> np.ndarray:
    """Strictly positive 2D taper (half-sample offset keeps edges nonzero)."""
    wh = 0.5 - 0.5 * np.cos(2.0 * np.pi * (np.arange(h) + 0.5) / h)
    ww = 0.5 - 0.5 * np.cos(2.0 * np.pi * (np.arange(w) + 0.5) / w)
    return np.outer(wh, ww)


def unpatchify(patches, out_hw: tuple[int, int]) -> np.ndarray:
    """Stitch (patch, origin) pairs back into a panel.

    Overlaps are blended with a Hann taper per patch, renormalized so the
    weights sum to one at every pixel. Raises if any pixel is uncovered.
    """
    H, W = out_hw
    first = patches[0][0]
    C = 1 if first.ndim == 2 else first.shape[0]
    num = np.zeros((C, H, W))
    den = np.zeros((H, W))
    for patch, (r, c) in patches:
        if patch.ndim == 2:
            patch = patch[None]
        ph, pw = patch.shape[1], patch.shape[2]
        wgt = _hann_weight(ph, pw)
        num[:, r:r + ph, c:c + pw] += wgt * patch.astype(np.float64)
        den[r:r + ph, c:c + pw] += wgt
    bad = np.argwhere(den == 0.0)
    if bad.size:
        r, c = bad[0]
        raise CoverageError(f"pixel ({r}, {c}) not covered by any patch")
    out = num / den
    return out[0] if first.ndim == 2 else out
