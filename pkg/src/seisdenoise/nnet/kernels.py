"""Convolution compute kernels.

Two interchangeable paths: direct numba loops tuned for large feature maps
(streaming accumulation, input rows reused across output channels), and
im2col + batched BLAS matmul which wins on small, channel-heavy maps. The
dispatch threshold is spatial size only, so a given layer always takes the
same path regardless of dtype — float64 runs exercise the exact code the
float32 training path uses.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

# Feature maps with H*W above this use the direct numba path (3x3 only).
GEMM_SPATIAL_LIMIT = 1024


@njit(cache=True, parallel=True, fastmath=True)
def _conv3x3_direct(xp, w, b, y):
    """Same-size 3x3 correlation of pre-padded xp; y[b,co] = sum_ci xp*w + b.

    Output channels are processed in pairs so each loaded input-row triple
    feeds 18 multiply-adds instead of 9 (halves the load pressure).
    """
    B, Ci, Hp, Wp = xp.shape
    Co = w.shape[0]
    H, W = Hp - 2, Wp - 2
    for bb in prange(B):
        acc = np.empty((Co, W), dtype=xp.dtype)
        for i in range(H):
            for co in range(Co):
                for j in range(W):
                    acc[co, j] = b[co]
            for ci in range(Ci):
                r0 = xp[bb, ci, i]
                r1 = xp[bb, ci, i + 1]
                r2 = xp[bb, ci, i + 2]
                for co0 in range(0, Co - 1, 2):
                    co1 = co0 + 1
                    a00 = w[co0, ci, 0, 0]; a01 = w[co0, ci, 0, 1]; a02 = w[co0, ci, 0, 2]
                    a10 = w[co0, ci, 1, 0]; a11 = w[co0, ci, 1, 1]; a12 = w[co0, ci, 1, 2]
                    a20 = w[co0, ci, 2, 0]; a21 = w[co0, ci, 2, 1]; a22 = w[co0, ci, 2, 2]
                    c00 = w[co1, ci, 0, 0]; c01 = w[co1, ci, 0, 1]; c02 = w[co1, ci, 0, 2]
                    c10 = w[co1, ci, 1, 0]; c11 = w[co1, ci, 1, 1]; c12 = w[co1, ci, 1, 2]
                    c20 = w[co1, ci, 2, 0]; c21 = w[co1, ci, 2, 1]; c22 = w[co1, ci, 2, 2]
                    pa = acc[co0]
                    pc = acc[co1]
                    for j in range(W):
                        v0 = r0[j]; v1 = r0[j + 1]; v2 = r0[j + 2]
                        u0 = r1[j]; u1 = r1[j + 1]; u2 = r1[j + 2]
                        t0 = r2[j]; t1 = r2[j + 1]; t2 = r2[j + 2]
                        pa[j] += (a00 * v0 + a01 * v1 + a02 * v2 + a10 * u0 + a11 * u1
                                  + a12 * u2 + a20 * t0 + a21 * t1 + a22 * t2)
                        pc[j] += (c00 * v0 + c01 * v1 + c02 * v2 + c10 * u0 + c11 * u1
                                  + c12 * u2 + c20 * t0 + c21 * t1 + c22 * t2)
                if Co % 2 == 1:
                    co = Co - 1
                    a00 = w[co, ci, 0, 0]; a01 = w[co, ci, 0, 1]; a02 = w[co, ci, 0, 2]
                    a10 = w[co, ci, 1, 0]; a11 = w[co, ci, 1, 1]; a12 = w[co, ci, 1, 2]
                    a20 = w[co, ci, 2, 0]; a21 = w[co, ci, 2, 1]; a22 = w[co, ci, 2, 2]
                    pa = acc[co]
                    for j in range(W):
                        pa[j] += (a00 * r0[j] + a01 * r0[j + 1] + a02 * r0[j + 2]
                                  + a10 * r1[j] + a11 * r1[j + 1] + a12 * r1[j + 2]
                                  + a20 * r2[j] + a21 * r2[j + 1] + a22 * r2[j + 2])
            for co in range(Co):
                for j in range(W):
                    y[bb, co, i, j] = acc[co, j]


@njit(cache=True, parallel=True, fastmath=True)
def _conv3x3_grad_w(xp, gy, gw):
    """gw[co,ci,u,v] = sum_{b,i,j} xp[b,ci,i+u,j+v] * gy[b,co,i,j].

    Streaming form: per (co, ci) pair the products accumulate into nine
    row buffers (no loop-carried scalar reduction), reduced once at the end.
    """
    B, Ci, Hp, Wp = xp.shape
    Co = gy.shape[1]
    H, W = Hp - 2, Wp - 2
    zero = xp[0, 0, 0, 0] * 0
    for pair in prange(Co * Ci):
        co = pair // Ci
        ci = pair % Ci
        buf = np.zeros((3, 3, W), dtype=xp.dtype)
        for bb in range(B):
            for i in range(H):
                g = gy[bb, co, i]
                for u in range(3):
                    xu = xp[bb, ci, i + u]
                    b0 = buf[u, 0]; b1 = buf[u, 1]; b2 = buf[u, 2]
                    for j in range(W):
                        gj = g[j]
                        b0[j] += xu[j] * gj
                        b1[j] += xu[j + 1] * gj
                        b2[j] += xu[j + 2] * gj
        for u in range(3):
            for v in range(3):
                s = zero
                for j in range(W):
                    s += buf[u, v, j]
                gw[co, ci, u, v] = s


@njit(cache=True, parallel=True, fastmath=True)
def _upsample2(x, out):
    """Bilinear 2x in both axes, half-pixel convention with clamped edges."""
    B, C, H, W = x.shape
    for bc in prange(B * C):
        bb = bc // C
        c = bc % C
        xs = x[bb, c]
        rowu = np.empty((H, 2 * W), dtype=x.dtype)
        for i in range(H):
            r = xs[i]
            t = rowu[i]
            t[0] = r[0]
            for j in range(1, W):
                t[2 * j] = 0.75 * r[j] + 0.25 * r[j - 1]
            for j in range(W - 1):
                t[2 * j + 1] = 0.75 * r[j] + 0.25 * r[j + 1]
            t[2 * W - 1] = r[W - 1]
        o = out[bb, c]
        for i in range(H):
            tcur = rowu[i]
            tprev = rowu[i - 1] if i > 0 else rowu[0]
            tnext = rowu[i + 1] if i < H - 1 else rowu[H - 1]
            oe = o[2 * i]
            oo = o[2 * i + 1]
            for j in range(2 * W):
                oe[j] = 0.75 * tcur[j] + 0.25 * tprev[j]
                oo[j] = 0.75 * tcur[j] + 0.25 * tnext[j]


@njit(cache=True, parallel=True, fastmath=True)
def _upsample2_adjoint(gy, gx):
    """Exact adjoint of _upsample2."""
    B, C, H2, W2 = gy.shape
    H, W = H2 // 2, W2 // 2
    for bc in prange(B * C):
        bb = bc // C
        c = bc % C
        g = gy[bb, c]
        t = np.empty(W2, dtype=gy.dtype)
        for m in range(H):
            ge = g[2 * m]
            go = g[2 * m + 1]
            for j in range(W2):
                t[j] = 0.75 * (ge[j] + go[j])
            if m < H - 1:
                gn = g[2 * m + 2]
                for j in range(W2):
                    t[j] += 0.25 * gn[j]
            else:
                for j in range(W2):
                    t[j] += 0.25 * go[j]
            if m > 0:
                gp = g[2 * m - 1]
                for j in range(W2):
                    t[j] += 0.25 * gp[j]
            else:
                for j in range(W2):
                    t[j] += 0.25 * ge[j]
            # adjoint along width
            out = gx[bb, c, m]
            for n in range(W):
                s = 0.75 * (t[2 * n] + t[2 * n + 1])
                if n < W - 1:
                    s += 0.25 * t[2 * n + 2]
                else:
                    s += 0.25 * t[2 * n + 1]
                if n > 0:
                    s += 0.25 * t[2 * n - 1]
                else:
                    s += 0.25 * t[0]
                out[n] = s


@njit(cache=True, parallel=True, fastmath=True)
def _maxpool2(x, y, arg):
    """2x2 stride-2 max; arg stores the first-maximum window index (row-major)."""
    B, C, H, W = x.shape
    for bc in prange(B * C):
        bb = bc // C
        c = bc % C
        xs = x[bb, c]
        ys = y[bb, c]
        ar = arg[bb, c]
        for i in range(H // 2):
            r0 = xs[2 * i]
            r1 = xs[2 * i + 1]
            for j in range(W // 2):
                m = r0[2 * j]
                a = 0
                if r0[2 * j + 1] > m:
                    m = r0[2 * j + 1]; a = 1
                if r1[2 * j] > m:
                    m = r1[2 * j]; a = 2
                if r1[2 * j + 1] > m:
                    m = r1[2 * j + 1]; a = 3
                ys[i, j] = m
                ar[i, j] = a


@njit(cache=True, parallel=True, fastmath=True)
def _maxpool2_backward(arg, gy, gx):
    B, C, H2, W2 = gy.shape
    for bc in prange(B * C):
        bb = bc // C
        c = bc % C
        for i in range(H2):
            for j in range(W2):
                a = arg[bb, c, i, j]
                gx[bb, c, 2 * i + a // 2, 2 * j + a % 2] = gy[bb, c, i, j]


def _pad_same(x: np.ndarray, k: int) -> np.ndarray:
    p = k // 2
    if p == 0:
        return x
    B, C, H, W = x.shape
    out = np.empty((B, C, H + 2 * p, W + 2 * p), dtype=x.dtype)
    out[:, :, :p] = 0
    out[:, :, H + p:] = 0
    out[:, :, p:H + p, :p] = 0
    out[:, :, p:H + p, W + p:] = 0
    out[:, :, p:H + p, p:W + p] = x
    return out


def _im2col(xp: np.ndarray, k: int) -> np.ndarray:
    """Pre-padded (B,C,Hp,Wp) -> (B, k*k*C, H*W) patch tensor.

    The (u, v, c) reduction-axis order matches weights reshaped via
    w.transpose(0, 2, 3, 1); the copy runs over contiguous W-length rows.
    """
    B, C, Hp, Wp = xp.shape
    H, W = Hp - k + 1, Wp - k + 1
    s = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, (B, k, k, C, H, W), (s[0], s[2], s[3], s[1], s[2], s[3]))
    return np.ascontiguousarray(view).reshape(B, k * k * C, H * W)


def _w_mat(w: np.ndarray) -> np.ndarray:
    """(Co, Ci, k, k) -> (Co, k*k*Ci) matching the _im2col reduction order."""
    Co = w.shape[0]
    return np.ascontiguousarray(w.transpose(0, 2, 3, 1)).reshape(Co, -1)


def conv_forward_raw(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padded stride-1 cross-correlation; dispatches numba vs GEMM."""
    B, Ci, H, W = x.shape
    Co, _, k, _ = w.shape
    if k == 3 and H * W > GEMM_SPATIAL_LIMIT:
        xp = _pad_same(x, k)
        y = np.empty((B, Co, H, W), dtype=x.dtype)
        _conv3x3_direct(xp, w, b, y)
        return y
    if k == 1:
        cols = x.reshape(B, Ci, H * W)
    else:
        cols = _im2col(_pad_same(x, k), k)
    y = np.matmul(_w_mat(w), cols)          # (Co,K) @ (B,K,HW) -> (B,Co,HW)
    y += b[:, None]
    return y.reshape(B, Co, H, W)


def conv_grad_w_raw(x: np.ndarray, gy: np.ndarray, k: int) -> np.ndarray:
    """Weight gradient of conv_forward_raw; same dispatch rule."""
    B, Ci, H, W = x.shape
    Co = gy.shape[1]
    if k == 3 and H * W > GEMM_SPATIAL_LIMIT:
        xp = _pad_same(x, k)
        gw = np.empty((Co, Ci, 3, 3), dtype=x.dtype)
        _conv3x3_grad_w(xp, np.ascontiguousarray(gy), gw)
        return gw
    if k == 1:
        cols = x.reshape(B, Ci, H * W)
    else:
        cols = _im2col(_pad_same(x, k), k)
    gyr = gy.reshape(B, Co, H * W)
    prod = np.matmul(gyr, cols.transpose(0, 2, 1)).sum(axis=0)  # (Co, k*k*Ci)
    return np.ascontiguousarray(prod.reshape(Co, k, k, Ci).transpose(0, 3, 1, 2))
