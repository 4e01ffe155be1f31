"""Per-example amplitude normalization into the loss's non-negative domain.

Seismic amplitudes are signed; the logarithmic loss needs [0, 1]. Each
example gets an affine map x -> x/(2A) + 0.5 where A is a robust amplitude
scale (99.9th percentile of |input|), shared between the input channels and
the target and inverted on network output. Values beyond +-A (at most 0.1%
of samples by construction) clamp to the interval edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError

PERCENTILE = 99.9


@dataclass(frozen=True)
class NormRecord:
    scale: float

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ParameterError(f"normalization scale must be positive, got {self.scale}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x / (2.0 * self.scale) + 0.5, 0.0, 1.0)

    def inverse(self, y: np.ndarray) -> np.ndarray:
        return (y - 0.5) * (2.0 * self.scale)


def compute_norm(channels: np.ndarray) -> NormRecord:
    """Robust scale from the input channels of one example.

    An all-zero example gets scale 1.0 (the map is then the constant 0.5,
    and the inverse maps back to zero amplitudes).
    """
    a = float(np.percentile(np.abs(channels), PERCENTILE))
    return NormRecord(scale=a if a > 0 else 1.0)
