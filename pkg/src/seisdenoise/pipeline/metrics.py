"""Quality metrics: SNR against a clean reference, residual stacking."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, UndefinedSnrError


def _data(g) -> np.ndarray:
    return g.data if hasattr(g, "data") else np.asarray(g)


def snr_db(estimate, reference) -> float:
    """10 log10( sum(ref^2) / sum((est - ref)^2) ); inf for a perfect match."""
    est = _data(estimate).astype(np.float64)
    ref = _data(reference).astype(np.float64)
    if est.shape != ref.shape:
        raise ShapeError(f"estimate {est.shape} vs reference {ref.shape}")
    e_ref = float(np.sum(ref**2))
    if e_ref == 0.0:
        raise UndefinedSnrError("reference has zero energy; SNR undefined")
    e_res = float(np.sum((est - ref) ** 2))
    if e_res == 0.0:
        return float("inf")
    return 10.0 * np.log10(e_ref / e_res)


def stack_residual_report(residuals) -> dict:
    """Coherence of residual noise across aligned panels.

    Stacking attenuates incoherent residuals like 1/sqrt(N); the reported
    ratio RMS(mean stack) / mean(per-panel RMS) is 1 for identical panels
    and approaches 1/sqrt(N) for independent zero-mean ones.
    """
    panels = [_data(r).astype(np.float64) for r in residuals]
    if len(panels) < 8:
        raise ShapeError(f"need at least 8 aligned residual panels, got {len(panels)}")
    shape = panels[0].shape
    for p in panels[1:]:
        if p.shape != shape:
            raise ShapeError(f"residual panels misaligned: {p.shape} vs {shape}")
    stack = np.mean(panels, axis=0)
    rms_stack = float(np.sqrt(np.mean(stack**2)))
    mean_rms = float(np.mean([np.sqrt(np.mean(p**2)) for p in panels]))
    return {
        "n_panels": len(panels),
        "rms_stack": rms_stack,
        "mean_panel_rms": mean_rms,
        "stack_ratio": rms_stack / mean_rms if mean_rms > 0 else float("nan"),
    }
