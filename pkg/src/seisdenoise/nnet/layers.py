"""Layer forward/backward passes.

All functions are pure and dtype-polymorphic: float32 in training, float64
for finite-difference gradient verification. Backward passes return exact
gradients of the corresponding forward map.
"""

from __future__ import annotations

import numpy as np

from ..errors import NormalizationError, ParameterError, ShapeError
from .kernels import (_maxpool2, _maxpool2_backward, _upsample2,
                      _upsample2_adjoint, conv_forward_raw, conv_grad_w_raw)

BN_EPS = 1e-5


def _check4d(x: np.ndarray, name: str = "x") -> None:
    if x.ndim != 4:
        raise ShapeError(f"{name} must be 4D (batch, channels, h, w), got shape {x.shape}")


# ---------------------------------------------------------------------------
# convolution (same padding, stride 1, odd kernel)

def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check4d(x)
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ShapeError(f"weights must be (out, in, k, k), got {w.shape}")
    if w.shape[2] % 2 == 0:
        raise ShapeError(f"kernel must be odd, got k={w.shape[2]}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"input channels {x.shape} incompatible with weights {w.shape}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"bias shape {b.shape} incompatible with weights {w.shape}")
    return conv_forward_raw(x, w, b)


def conv2d_backward(x: np.ndarray, w: np.ndarray,
                    grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if grad_out.shape != (x.shape[0], w.shape[0], x.shape[2], x.shape[3]):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} incompatible with x {x.shape}, w {w.shape}"
        )
    k = w.shape[2]
    gy = np.ascontiguousarray(grad_out)
    # Input gradient is the same-padded correlation with channel-swapped,
    # spatially flipped weights.
    wt = np.ascontiguousarray(w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    gx = conv_forward_raw(gy, wt, np.zeros(w.shape[1], dtype=x.dtype))
    gw = conv_grad_w_raw(x, gy, k)
    gb = gy.sum(axis=(0, 2, 3))
    return gx, gw, gb


# ---------------------------------------------------------------------------
# rectifier

def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0)


# ---------------------------------------------------------------------------
# batch normalization

def batchnorm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                      running_mean: np.ndarray, running_var: np.ndarray,
                      mode: str, momentum: float = 0.9):
    """Per-channel normalization over (batch, h, w).

    Train mode uses batch statistics and returns running stats updated as
    ``momentum * old + (1 - momentum) * batch``; infer mode uses the running
    statistics unchanged.

    Returns (y, cache, running_mean, running_var); cache is None in infer
    mode (no backward defined there).
    """
    _check4d(x)
    if mode not in ("train", "infer"):
        raise ParameterError(f"mode must be train or infer, got {mode!r}")
    if mode == "infer":
        inv = 1.0 / np.sqrt(running_var + BN_EPS)
        y = gamma[:, None, None] * (x - running_mean[:, None, None]) * inv[:, None, None] \
            + beta[:, None, None]
        return y.astype(x.dtype), None, running_mean, running_var
    n = x.shape[0] * x.shape[2] * x.shape[3]
    if n < 2:
        raise ParameterError("train-mode batch norm needs batch*h*w >= 2 per channel")
    mean = np.einsum("bchw->c", x) / n
    sq = np.einsum("bchw,bchw->c", x, x) / n
    var = np.maximum(sq - mean * mean, 0)
    inv = (1.0 / np.sqrt(var + BN_EPS)).astype(x.dtype)
    # y = a*x + c with per-channel a, c: one fused elementwise pass.
    a = gamma * inv
    c = beta - a * mean
    y = a[:, None, None] * x + c[:, None, None]
    new_mean = momentum * running_mean + (1.0 - momentum) * mean
    new_var = momentum * running_var + (1.0 - momentum) * var
    cache = (x, mean.astype(x.dtype), inv, gamma)
    return y, cache, new_mean.astype(x.dtype), new_var.astype(x.dtype)


def batchnorm_backward(cache, grad_out: np.ndarray):
    """Gradient through train-mode normalization, batch statistics included.

    Folded to gx = alpha*gy + beta*x + const per channel, which needs only
    two reductions and one fused elementwise pass.
    """
    x, mean, inv, gamma = cache
    n = grad_out.shape[0] * grad_out.shape[2] * grad_out.shape[3]
    s1 = np.einsum("bchw->c", grad_out)                 # sum gy
    s2 = np.einsum("bchw,bchw->c", grad_out, x)         # sum gy*x
    sxh = (s2 - mean * s1) * inv                        # sum gy*xhat
    ggamma = sxh
    gbeta = s1
    al = (gamma * inv).astype(grad_out.dtype)
    be = (-gamma * inv * inv * sxh / n).astype(grad_out.dtype)
    const = (-gamma * inv * s1 / n - be * mean).astype(grad_out.dtype)
    gx = al[:, None, None] * grad_out + be[:, None, None] * x + const[:, None, None]
    return gx, ggamma, gbeta


# ---------------------------------------------------------------------------
# 2x2 max pooling, stride 2

def maxpool2_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    _check4d(x)
    B, C, H, W = x.shape
    if H % 2 or W % 2:
        raise ShapeError(f"maxpool needs even spatial dims, got {H}x{W}")
    y = np.empty((B, C, H // 2, W // 2), dtype=x.dtype)
    # Strict > comparisons keep the first maximum: ties route to top-left.
    arg = np.empty((B, C, H // 2, W // 2), dtype=np.int8)
    _maxpool2(np.ascontiguousarray(x), y, arg)
    return y, arg


def maxpool2_backward(arg: np.ndarray, grad_out: np.ndarray,
                      x_shape: tuple) -> np.ndarray:
    gx = np.zeros(x_shape, dtype=grad_out.dtype)
    _maxpool2_backward(arg, np.ascontiguousarray(grad_out), gx)
    return gx


# ---------------------------------------------------------------------------
# bilinear 2x upsampling (half-pixel convention, edges clamped)

def upsample2_forward(x: np.ndarray) -> np.ndarray:
    """2x bilinear upsampling, half-pixel convention; corners map to corners."""
    _check4d(x)
    B, C, H, W = x.shape
    out = np.empty((B, C, 2 * H, 2 * W), dtype=x.dtype)
    _upsample2(np.ascontiguousarray(x), out)
    return out


def upsample2_adjoint(gy: np.ndarray) -> np.ndarray:
    """Exact adjoint of upsample2_forward (used by the up-conv backward)."""
    _check4d(gy)
    B, C, H2, W2 = gy.shape
    gx = np.empty((B, C, H2 // 2, W2 // 2), dtype=gy.dtype)
    _upsample2_adjoint(np.ascontiguousarray(gy), gx)
    return gx


# ---------------------------------------------------------------------------
# up-convolution: bilinear 2x upsample followed by a same-padded conv

def upconv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return conv2d_forward(upsample2_forward(x), w, b)


def upconv_backward(x: np.ndarray, w: np.ndarray, grad_out: np.ndarray):
    up = upsample2_forward(x)
    g_up, gw, gb = conv2d_backward(up, w, grad_out)
    return upsample2_adjoint(g_up), gw, gb


# ---------------------------------------------------------------------------
# mean squared logarithmic error on the normalized non-negative domain

def msle_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """loss = mean((ln(1+pred) - ln(1+target))^2), pred clamped at 0 first.

    Targets must already be non-negative (within float noise); that is the
    normalizer's contract, so a violation raises rather than clamps silently.
    """
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    if np.any(target < -1e-6):
        raise NormalizationError(
            f"target contains values < -1e-6 (min {target.min()}): inputs must go "
            f"through the non-negative normalizer before the loss"
        )
    p = np.maximum(pred, 0)
    t = np.maximum(target, 0)
    d = np.log1p(p) - np.log1p(t)
    loss = float(np.mean(d.astype(np.float64) ** 2))
    grad = (2.0 / d.size) * d / (1.0 + p)
    grad = grad * (pred > 0)
    return loss, grad.astype(pred.dtype)
