"""Surface-multiple prediction by multidimensional self-convolution.

For a fixed-spread survey whose sources sit on the receiver grid, the
multiple estimate for shot s is

    M(s, r, t) = dx_surf * sum_k  conv_t( d(s, x_k, .), d(x_k, r, .) )(t)

where x_k runs over the surface positions that are both a source and a
receiver location. The temporal convolution is linear, truncated to the
record length; a cosine taper over the outer 10% of the aperture suppresses
truncation artifacts. No source-signature deconvolution is applied, so the
raw prediction trails the true multiples by one wavelet peak delay; pass
``advance_s`` (typically the wavelet t0) to shift it back into alignment.
The output is rescaled so its RMS matches ``alpha`` times the input shot's.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft
from scipy.linalg import toeplitz

from .errors import ApertureError, GeometryError, ParameterError
from .sgth import load_gather, save_gather
from .wavesim import ShotGather

MIN_APERTURE = 8
TAPER_FRACTION = 0.1
DIRECT_NT_LIMIT = 512


@dataclass(frozen=True)
class PrestackVolume:
    """Fixed-spread collection of shot gathers, one per source position."""

    gathers: tuple[ShotGather, ...] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "gathers", tuple(self.gathers))
        if not self.gathers:
            raise ParameterError("volume needs at least one gather")
        g0 = self.gathers[0]
        for g in self.gathers[1:]:
            if g.nt != g0.nt or g.dt != g0.dt or not np.array_equal(g.rec_x, g0.rec_x):
                raise GeometryError(
                    "volume requires a fixed spread: identical rec_x, nt and dt "
                    "across all gathers"
                )
        # Each source must sit on the receiver grid (surface-integral requirement).
        tol = 1e-6 * max(abs(g0.rec_x[1] - g0.rec_x[0]), 1.0)
        idx = []
        for g in self.gathers:
            j = int(np.argmin(np.abs(g0.rec_x - g.src_x)))
            if abs(g0.rec_x[j] - g.src_x) > tol:
                raise GeometryError(
                    f"source at x={g.src_x} is not co-located with any receiver "
                    f"(required for the surface convolution)"
                )
            idx.append(j)
        object.__setattr__(self, "_src_rec_idx", tuple(idx))

    @property
    def n_shots(self) -> int:
        return len(self.gathers)

    @property
    def src_x(self) -> np.ndarray:
        return np.array([g.src_x for g in self.gathers])

    @property
    def src_rec_idx(self) -> tuple[int, ...]:
        return self._src_rec_idx

    @property
    def nt(self) -> int:
        return self.gathers[0].nt

    @property
    def dt(self) -> float:
        return self.gathers[0].dt

    @property
    def rec_x(self) -> np.ndarray:
        return self.gathers[0].rec_x

    @property
    def nrec(self) -> int:
        return self.gathers[0].nrec


def _aperture_taper(n: int) -> np.ndarray:
    """Cosine ramp over the outer 10% of the aperture on each side."""
    w = np.ones(n)
    m = int(np.ceil(TAPER_FRACTION * n))
    ramp = 0.5 * (1.0 - np.cos(np.pi * (np.arange(m) + 0.5) / m))
    w[:m] = ramp
    w[n - m:] = ramp[::-1]
    return w


def _surface_spacing(src_x: np.ndarray) -> float:
    xs = np.sort(src_x)
    d = np.diff(xs)
    if d.size == 0 or np.any(d <= 0):
        raise GeometryError("source positions must be distinct")
    return float(np.mean(d))


def predict_multiples(vol: PrestackVolume, shot_index: int, *,
                      advance_s: float = 0.0, alpha: float | None = 1.0,
                      method: str = "auto") -> ShotGather:
    """Predict the surface multiples of one shot from the whole volume.

    Parameters
    ----------
    advance_s : float
        Time advance applied to the raw prediction (crude compensation for
        the doubled source signature); rounded to the nearest sample.
    alpha : float or None
        Output RMS relative to the input shot's RMS; the equalization makes
        the output/input RMS ratio independent of the absolute data
        amplitude. None skips the rescale (raw bilinear prediction).
    method : {"auto", "direct", "fft"}
        Convolution path; "auto" uses direct summation up to nt=512 and
        frequency-domain multiplication beyond.
    """
    if not (0 <= shot_index < vol.n_shots):
        raise ParameterError(f"shot_index {shot_index} outside 0..{vol.n_shots - 1}")
    if vol.n_shots < MIN_APERTURE:
        raise ApertureError(
            f"need at least {MIN_APERTURE} surface positions, got {vol.n_shots}"
        )
    if method not in ("auto", "direct", "fft"):
        raise ParameterError(f"unknown method {method!r}")
    if method == "auto":
        method = "direct" if vol.nt <= DIRECT_NT_LIMIT else "fft"

    nt, nrec = vol.nt, vol.nrec
    shot = vol.gathers[shot_index]
    order = np.argsort(vol.src_x, kind="stable")
    taper = np.empty(vol.n_shots)
    taper[order] = _aperture_taper(vol.n_shots)
    dx_surf = _surface_spacing(vol.src_x)

    # a_k: shot's trace recorded at surface position x_k;
    # b_k: full gather of the source at x_k.
    a = np.stack([shot.data[:, vol.src_rec_idx[k]].astype(np.float64)
                  for k in range(vol.n_shots)])        # (ns, nt)
    if method == "fft":
        nfft = next_fast_len(2 * nt - 1)
        A = rfft(a, nfft, axis=1)                       # (ns, nf)
        B = np.stack([rfft(g.data.astype(np.float64), nfft, axis=0)
                      for g in vol.gathers])            # (ns, nf, nrec)
        M_f = np.einsum("k,kf,kfr->fr", taper, A, B)
        raw = irfft(M_f, nfft, axis=0)[:nt]
    else:
        raw = np.zeros((nt, nrec))
        zeros = np.zeros(nt)
        for k in range(vol.n_shots):
            T = toeplitz(a[k], np.concatenate([[a[k][0]], zeros[1:]]))
            raw += taper[k] * (T @ vol.gathers[k].data.astype(np.float64))
    raw *= dx_surf

    adv = int(round(advance_s / vol.dt))
    if adv > 0:
        raw = np.vstack([raw[adv:], np.zeros((adv, nrec))])
    elif adv < 0:
        raise ParameterError(f"advance_s must be >= 0, got {advance_s}")

    if alpha is not None:
        rms_raw = float(np.sqrt(np.mean(raw**2)))
        rms_in = float(np.sqrt(np.mean(shot.data.astype(np.float64) ** 2)))
        if rms_raw > 0.0 and rms_in > 0.0:
            raw *= alpha * rms_in / rms_raw
    return ShotGather(data=raw.astype(np.float32), dt=vol.dt, rec_x=vol.rec_x.copy(),
                      src_x=shot.src_x, src_z=shot.src_z, tag="srme_estimate")


def predict_all(vol: PrestackVolume, *, advance_s: float = 0.0, alpha: float | None = 1.0,
                method: str = "auto") -> PrestackVolume:
    """One multiple estimate per shot, order-preserving."""
    preds = [predict_multiples(vol, i, advance_s=advance_s, alpha=alpha, method=method)
             for i in range(vol.n_shots)]
    return PrestackVolume(gathers=tuple(preds))


def save_volume(vol: PrestackVolume, dirpath) -> None:
    """Write a volume as a directory of SGTH files plus a JSON manifest."""
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    files = []
    for i, g in enumerate(vol.gathers):
        name = f"shot_{i:04d}.sgth"
        save_gather(g, d / name)
        files.append(name)
    manifest = {"files": files, "src_x": [float(x) for x in vol.src_x]}
    (d / "volume.json").write_text(json.dumps(manifest, indent=2))


def load_volume(dirpath) -> PrestackVolume:
    d = Path(dirpath)
    manifest = json.loads((d / "volume.json").read_text())
    gathers = tuple(load_gather(d / name) for name in manifest["files"])
    return PrestackVolume(gathers=gathers)
