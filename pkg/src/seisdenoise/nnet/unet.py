"""U-Net assembly: encoder, bottleneck, decoder with skip concatenation.

Every block layer is conv -> batch norm -> rectifier. Max pooling halves
the feature maps between encoder levels; the decoder upsamples with a
bilinear-interpolation-plus-conv stage whose output supplies half the
channels of each concatenation, the same-level encoder features the other
half. A final 1x1 conv maps to the output channel with no activation.

Canonical parameter order (used by the checkpoint format and the optimizer)
is the construction order:

    enc{L}.conv{i}.w|b, enc{L}.bn{i}.gamma|beta|running_mean|running_var
        for L = 0..levels-1, i = 0..convs_per_block-1
    bottleneck.conv{i}.* , bottleneck.bn{i}.*
    dec{L}.up.w|b, dec{L}.conv{i}.*, dec{L}.bn{i}.*   for L = levels-1..0
    head.w, head.b
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import IntegrityError, ParameterError, ShapeError
from .layers import (batchnorm_backward, batchnorm_forward, conv2d_backward,
                     conv2d_forward, maxpool2_backward, maxpool2_forward,
                     relu_backward, relu_forward, upsample2_adjoint,
                     upsample2_forward)

LEARNABLE_SUFFIXES = (".w", ".b", ".gamma", ".beta")


@dataclass(frozen=True)
class UNetConfig:
    levels: int = 3
    base_channels: int = 16
    convs_per_block: int = 2
    kernel: int = 3
    in_channels: int = 1
    out_channels: int = 1
    bn_momentum: float = 0.9
    upsample: str = "bilinear_then_conv"

    def __post_init__(self):
        if not (2 <= self.levels <= 5):
            raise ParameterError(f"levels={self.levels} outside [2, 5]")
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise ParameterError(f"kernel must be odd and positive, got {self.kernel}")
        if self.in_channels not in (1, 2):
            raise ParameterError(f"in_channels must be 1 or 2, got {self.in_channels}")
        if self.out_channels != 1:
            raise ParameterError(f"out_channels must be 1, got {self.out_channels}")
        if self.upsample != "bilinear_then_conv":
            raise ParameterError(f"unsupported upsample mode {self.upsample!r}")
        if self.base_channels < 1 or self.convs_per_block < 1:
            raise ParameterError("base_channels and convs_per_block must be >= 1")

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "UNetConfig":
        return cls(**json.loads(text))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def channels(self, level: int) -> int:
        return self.base_channels * (2 ** level)


def _conv_specs(cfg: UNetConfig):
    """Yield (name, c_in, c_out, kernel, with_bn) in canonical order."""
    k = cfg.kernel
    for lev in range(cfg.levels):
        c = cfg.channels(lev)
        c_in = cfg.in_channels if lev == 0 else cfg.channels(lev - 1)
        for i in range(cfg.convs_per_block):
            yield f"enc{lev}.conv{i}", c_in if i == 0 else c, c, k, True
    cb = cfg.channels(cfg.levels)
    c_in = cfg.channels(cfg.levels - 1)
    for i in range(cfg.convs_per_block):
        yield f"bottleneck.conv{i}", c_in if i == 0 else cb, cb, k, True
    for lev in reversed(range(cfg.levels)):
        c = cfg.channels(lev)
        yield f"dec{lev}.up", cfg.channels(lev + 1), c, k, False
        for i in range(cfg.convs_per_block):
            yield f"dec{lev}.conv{i}", 2 * c if i == 0 else c, c, k, True
    yield "head", cfg.channels(0), cfg.out_channels, 1, False


@dataclass
class UNetParams:
    """All weights, biases, batch-norm affine terms and running statistics."""

    config: UNetConfig
    arrays: dict[str, np.ndarray] = field(repr=False)
    fingerprint: str = ""

    def __post_init__(self):
        if not self.fingerprint:
            self.fingerprint = self.config.fingerprint()

    def names(self) -> list[str]:
        return list(self.arrays.keys())

    def learnable_names(self) -> list[str]:
        return [n for n in self.arrays if n.endswith(LEARNABLE_SUFFIXES)]

    def astype(self, dtype) -> "UNetParams":
        return UNetParams(config=self.config,
                          arrays={k: v.astype(dtype) for k, v in self.arrays.items()},
                          fingerprint=self.fingerprint)

    def copy(self) -> "UNetParams":
        return UNetParams(config=self.config,
                          arrays={k: v.copy() for k, v in self.arrays.items()},
                          fingerprint=self.fingerprint)


def init_params(cfg: UNetConfig, seed: int = 0, dtype=np.float32) -> UNetParams:
    """He-normal conv weights (std = sqrt(2/fan_in)), zero biases, unit BN."""
    rng = np.random.default_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for name, c_in, c_out, k, with_bn in _conv_specs(cfg):
        std = np.sqrt(2.0 / (c_in * k * k))
        arrays[f"{name}.w"] = (std * rng.standard_normal((c_out, c_in, k, k))).astype(dtype)
        arrays[f"{name}.b"] = np.zeros(c_out, dtype)
        if with_bn:
            bn = name.replace(".conv", ".bn")
            arrays[f"{bn}.gamma"] = np.ones(c_out, dtype)
            arrays[f"{bn}.beta"] = np.zeros(c_out, dtype)
            arrays[f"{bn}.running_mean"] = np.zeros(c_out, dtype)
            arrays[f"{bn}.running_var"] = np.ones(c_out, dtype)
    return UNetParams(config=cfg, arrays=arrays)


def param_count(cfg: UNetConfig) -> int:
    """Learnable parameter count (conv w/b plus BN gamma/beta)."""
    total = 0
    for _, c_in, c_out, k, with_bn in _conv_specs(cfg):
        total += c_out * c_in * k * k + c_out
        if with_bn:
            total += 2 * c_out
    return total


def _block_forward(params: UNetParams, prefix: str, x, mode: str, cache: list):
    """convs_per_block repetitions of conv -> BN -> ReLU."""
    cfg = params.config
    a = x
    for i in range(cfg.convs_per_block):
        cname, bname = f"{prefix}.conv{i}", f"{prefix}.bn{i}"
        w, b = params.arrays[f"{cname}.w"], params.arrays[f"{cname}.b"]
        z = conv2d_forward(a, w, b)
        y, bn_cache, new_mean, new_var = batchnorm_forward(
            z, params.arrays[f"{bname}.gamma"], params.arrays[f"{bname}.beta"],
            params.arrays[f"{bname}.running_mean"], params.arrays[f"{bname}.running_var"],
            mode, cfg.bn_momentum)
        if mode == "train":
            params.arrays[f"{bname}.running_mean"] = new_mean
            params.arrays[f"{bname}.running_var"] = new_var
        r = relu_forward(y)
        cache.append((cname, bname, a, bn_cache, y))
        a = r
    return a


def _block_backward(params: UNetParams, grads: dict, cache_iter, grad):
    for cname, bname, a, bn_cache, y in cache_iter:
        grad = relu_backward(y, grad)
        grad, ggamma, gbeta = batchnorm_backward(bn_cache, grad)
        grads[f"{bname}.gamma"] = ggamma
        grads[f"{bname}.beta"] = gbeta
        grad, gw, gb = conv2d_backward(a, params.arrays[f"{cname}.w"], grad)
        grads[f"{cname}.w"] = gw
        grads[f"{cname}.b"] = gb
    return grad


def unet_forward(cfg: UNetConfig, params: UNetParams, x: np.ndarray,
                 mode: str = "infer"):
    """Run the network; returns (y, cache). Cache feeds unet_backward.

    In train mode the batch-norm running statistics inside ``params`` are
    updated as a side effect; infer mode is a pure function of (params, x).
    """
    if params.fingerprint != cfg.fingerprint():
        raise IntegrityError(
            "parameter fingerprint does not match the network config; "
            "checkpoint and architecture disagree"
        )
    if x.ndim != 4 or x.shape[1] != cfg.in_channels:
        raise ShapeError(
            f"input shape {x.shape} incompatible with in_channels={cfg.in_channels}"
        )
    div = 2 ** cfg.levels
    if x.shape[2] % div or x.shape[3] % div:
        raise ShapeError(
            f"spatial dims {x.shape[2]}x{x.shape[3]} must be divisible by 2^levels={div}"
        )

    cache: dict = {"mode": mode, "x_shape": x.shape, "blocks": {}, "pools": {}, "skips": {}}
    a = x
    for lev in range(cfg.levels):
        blk: list = []
        a = _block_forward(params, f"enc{lev}", a, mode, blk)
        cache["blocks"][f"enc{lev}"] = blk
        cache["skips"][lev] = a
        pooled, arg = maxpool2_forward(a)
        cache["pools"][lev] = (arg, a.shape)
        a = pooled
    blk = []
    a = _block_forward(params, "bottleneck", a, mode, blk)
    cache["blocks"]["bottleneck"] = blk

    for lev in reversed(range(cfg.levels)):
        w, b = params.arrays[f"dec{lev}.up.w"], params.arrays[f"dec{lev}.up.b"]
        ups = upsample2_forward(a)
        up = conv2d_forward(ups, w, b)
        cache["blocks"][f"dec{lev}.up_in"] = ups
        skip = cache["skips"][lev]
        a = np.concatenate([up, skip], axis=1)
        blk = []
        a = _block_forward(params, f"dec{lev}", a, mode, blk)
        cache["blocks"][f"dec{lev}"] = blk

    cache["head_in"] = a
    y = conv2d_forward(a, params.arrays["head.w"], params.arrays["head.b"])
    return y, cache


def unet_backward(cfg: UNetConfig, params: UNetParams, cache: dict,
                  grad_y: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of every learnable parameter for the cached forward pass."""
    if cache["mode"] != "train":
        raise ParameterError("backward requires a train-mode forward cache")
    grads: dict[str, np.ndarray] = {}
    grad, gw, gb = conv2d_backward(cache["head_in"], params.arrays["head.w"], grad_y)
    grads["head.w"] = gw
    grads["head.b"] = gb

    skip_grads: dict[int, np.ndarray] = {}
    for lev in range(cfg.levels):
        c = cfg.channels(lev)
        grad = _block_backward(params, grads, reversed(cache["blocks"][f"dec{lev}"]), grad)
        g_up, g_skip = grad[:, :c], grad[:, c:]
        skip_grads[lev] = g_skip
        ups = cache["blocks"][f"dec{lev}.up_in"]
        g_ups, gw, gb = conv2d_backward(ups, params.arrays[f"dec{lev}.up.w"],
                                        np.ascontiguousarray(g_up))
        grad = upsample2_adjoint(g_ups)
        grads[f"dec{lev}.up.w"] = gw
        grads[f"dec{lev}.up.b"] = gb

    grad = _block_backward(params, grads, reversed(cache["blocks"]["bottleneck"]), grad)

    for lev in reversed(range(cfg.levels)):
        arg, shape = cache["pools"][lev]
        grad = maxpool2_backward(arg, grad, shape)
        grad = grad + skip_grads[lev]
        grad = _block_backward(params, grads, reversed(cache["blocks"][f"enc{lev}"]), grad)
    return grads
