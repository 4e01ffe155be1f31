"""Simultaneous-source blending and deblending training pairs.

Two sources fire into one record: the left source at t=0 is the signal, the
right source fires after a random dither delay and is the interference the
network learns to remove. Two construction modes exist on purpose: plain
superposition of separately simulated shots, and co-simulation with both
sources active. Their agreement is a physics regression test of the
simulator's linearity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, ParameterError
from .velocity import VelocityModel
from .wavesim import BoundarySpec, ShotGather, SurveyGeometry, Wavelet, simulate


@dataclass(frozen=True)
class BlendSpec:
    """Dither distribution and construction mode for blended records.

    The dither is drawn uniformly from [0, dither_max] with the given seed
    and rounded to the nearest output sample.
    """

    dither_max: float = 0.25
    seed: int = 0
    mode: str = "superpose"

    def __post_init__(self):
        if self.dither_max < 0:
            raise ParameterError(f"dither_max must be >= 0, got {self.dither_max}")
        if self.mode not in ("superpose", "co_simulate"):
            raise ParameterError(f"mode must be superpose or co_simulate, got {self.mode!r}")

    def draw_dither(self, dt: float) -> float:
        """Dither in seconds, rounded to the sample grid; deterministic in seed."""
        if self.dither_max == 0.0:
            return 0.0
        if self.dither_max < dt:
            raise ParameterError(
                f"dither_max={self.dither_max} not resolvable at dt={dt}"
            )
        rng = np.random.default_rng(self.seed)
        tau = float(rng.uniform(0.0, self.dither_max))
        return round(tau / dt) * dt


def shift_gather(data: np.ndarray, shift: int) -> np.ndarray:
    """Delay traces by ``shift`` samples: zero-fill at the start, drop the tail."""
    if shift == 0:
        return data.copy()
    out = np.zeros_like(data)
    out[shift:] = data[:-shift]
    return out


def blend(signal: ShotGather, noise: ShotGather, spec: BlendSpec) -> tuple[ShotGather, float]:
    """Superpose a delayed interfering gather onto a signal gather.

    Returns the blended gather (tagged ``blended``, keeping the signal's
    source position) and the dither actually used in seconds.
    """
    mismatched = [name for name, a, b in (
        ("nt", signal.nt, noise.nt),
        ("nrec", signal.nrec, noise.nrec),
        ("dt", signal.dt, noise.dt),
    ) if a != b]
    if not np.array_equal(signal.rec_x, noise.rec_x):
        mismatched.append("rec_x")
    if mismatched:
        raise GeometryError(f"signal/noise geometry mismatch in fields: {mismatched}")
    tau = spec.draw_dither(signal.dt)
    shifted = shift_gather(noise.data.astype(np.float64), int(round(tau / signal.dt)))
    blended = signal.data.astype(np.float64) + shifted
    out = ShotGather(data=blended.astype(np.float32), dt=signal.dt,
                     rec_x=signal.rec_x.copy(), src_x=signal.src_x,
                     src_z=signal.src_z, tag="blended")
    return out, tau


def make_deblend_pair(model: VelocityModel, geom: SurveyGeometry, wavelet: Wavelet,
                      left_src: int, right_src: int, spec: BlendSpec,
                      bc: BoundarySpec | None = None) -> tuple[ShotGather, ShotGather, float]:
    """Build one (blended input, clean target) training pair.

    The left source is the signal and fires at t=0; the right source is the
    interference, delayed by the dither. Returns (input, target, dither).
    """
    if not (0 <= left_src < geom.src_x.size and 0 <= right_src < geom.src_x.size):
        raise GeometryError("source indices outside geometry")
    if not geom.src_x[left_src] < geom.src_x[right_src]:
        raise GeometryError(
            f"signal source must be left of the interfering one: "
            f"{geom.src_x[left_src]} !< {geom.src_x[right_src]}"
        )
    if bc is None:
        bc = BoundarySpec(top="free_surface")
    tau = spec.draw_dither(geom.dt)
    target = simulate(model, geom, wavelet, bc, [(left_src, 0.0)])
    if spec.mode == "co_simulate":
        both = simulate(model, geom, wavelet, bc, [(left_src, 0.0), (right_src, tau)])
        blended = both.with_data(both.data.copy(), tag="blended")
    else:
        noise = simulate(model, geom, wavelet, bc, [(right_src, 0.0)])
        mixed = target.data.astype(np.float64) + shift_gather(
            noise.data.astype(np.float64), int(round(tau / geom.dt)))
        blended = target.with_data(mixed.astype(np.float32), tag="blended")
    return blended, target, tau


def write_pair_sidecar(path, dither_s: float, left_src_x: float,
                       right_src_x: float, seed: int) -> None:
    """JSON sidecar describing one blended pair."""
    with open(path, "w") as fh:
        json.dump({"dither_s": dither_s, "left_src_x": left_src_x,
                   "right_src_x": right_src_x, "seed": seed}, fh, indent=2)
