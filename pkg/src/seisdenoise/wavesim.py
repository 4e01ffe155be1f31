"""2D constant-density acoustic finite-difference modeling.

Pressure formulation, second order in time and fourth order in space on a
regular grid. Two top-boundary regimes produce the two halves of every
training pair: a free surface (pressure-release, reflection coefficient -1)
generates primaries plus surface multiples, an absorbing top generates
primaries only. Sides and bottom always absorb via an exponential sponge.

Gathers are recorded at a fine CFL-bound step and decimated to the survey
sample rate with a zero-phase low-pass. The decimation is computed from an
internally extended record so that it commutes exactly with integer-sample
source delays; simultaneous-source superposition therefore matches
separately simulated shots to floating-point precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit, prange
from scipy.signal import firwin

from .errors import GeometryError, ParameterError, StabilityError
from .velocity import V_WATER, VelocityModel

CFL_LIMIT = 0.6
HALO = 2  # stencil half-width

TAGS = ("raw", "p_plus_m", "p_only", "ghosted", "blended", "srme_estimate", "denoised")


@dataclass(frozen=True)
class Wavelet:
    """Peak-normalized source signature sampled at ``dt``."""

    samples: np.ndarray = field(repr=False)
    dt: float
    fc: float
    t0: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.samples)):
            raise ParameterError("wavelet contains non-finite samples")
        peak = np.max(np.abs(self.samples))
        if abs(peak - 1.0) > 1e-12:
            raise ParameterError(f"wavelet must be peak-normalized, got max |amp| = {peak}")
        if self.fc * self.dt >= 0.1:
            raise StabilityError(
                f"fc*dt = {self.fc * self.dt:.3f} >= 0.1: wavelet undersampled in time"
            )

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt

    @property
    def duration(self) -> float:
        return (len(self.samples) - 1) * self.dt


def ricker(fc: float, dt: float, duration: float) -> Wavelet:
    """Ricker pulse with peak delay t0 = 1.5/fc, peak-normalized to 1.

    r(tau) = (1 - 2 pi^2 fc^2 tau^2) exp(-pi^2 fc^2 tau^2), tau = t - t0.
    """
    if fc <= 0 or dt <= 0:
        raise ParameterError(f"fc and dt must be positive, got fc={fc}, dt={dt}")
    if duration < 2.0 / fc:
        raise ParameterError(f"duration={duration} too short, need >= 2/fc = {2.0 / fc}")
    if fc * dt >= 0.1:
        raise StabilityError(f"fc*dt = {fc * dt:.3f} >= 0.1: decrease dt or fc")
    t0 = 1.5 / fc
    n = int(math.floor(duration / dt)) + 1
    tau = np.arange(n) * dt - t0
    a = (math.pi * fc) ** 2 * tau**2
    s = (1.0 - 2.0 * a) * np.exp(-a)
    s /= np.max(np.abs(s))
    return Wavelet(samples=s, dt=dt, fc=fc, t0=t0)


@dataclass(frozen=True)
class SurveyGeometry:
    """Acquisition layout shared by every shot of a survey.

    ``src_x`` lists candidate source positions; a simulation activates a
    subset of them. Receivers form a fixed, uniformly spaced spread.
    """

    src_x: np.ndarray
    src_z: float
    rec_x: np.ndarray
    rec_z: float
    nt: int
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "src_x", np.atleast_1d(np.asarray(self.src_x, dtype=np.float64)))
        object.__setattr__(self, "rec_x", np.asarray(self.rec_x, dtype=np.float64))
        if self.nt < 2 or self.dt <= 0:
            raise ParameterError(f"need nt >= 2 and dt > 0, got nt={self.nt}, dt={self.dt}")
        if self.rec_x.size < 2:
            raise GeometryError("need at least 2 receivers")
        d = np.diff(self.rec_x)
        if np.any(d <= 0):
            raise GeometryError("rec_x must be strictly increasing")
        if np.max(np.abs(d - d[0])) > 1e-9 * abs(d[0]):
            raise GeometryError("rec_x spacing must be uniform within 1e-9 relative")

    @property
    def rec_dx(self) -> float:
        return float(self.rec_x[1] - self.rec_x[0])

    @property
    def nrec(self) -> int:
        return self.rec_x.size

    @property
    def record_length(self) -> float:
        return self.nt * self.dt

    def validate_for_model(self, model: VelocityModel) -> None:
        """Positions inside the grid, below the surface, record long enough."""
        for name, xs in (("src_x", self.src_x), ("rec_x", self.rec_x)):
            if np.any(xs < 0) or np.any(xs > model.width_m):
                raise GeometryError(f"{name} outside model extent [0, {model.width_m}]")
        for name, z in (("src_z", self.src_z), ("rec_z", self.rec_z)):
            zi = int(round(z / model.dz))
            if zi < 1 or zi >= model.nz:
                raise GeometryError(
                    f"{name}={z} must round to a grid row strictly below the surface "
                    f"and above the model bottom"
                )
        t2 = model.two_way_time_to(model.deepest_interface_cell())
        if self.record_length < 2.0 * t2 - 1e-12:
            raise GeometryError(
                f"record length {self.record_length:.3f}s too short: need >= twice the "
                f"two-way time to the deepest interface (2*{t2:.3f}s) to capture "
                f"first-order multiples"
            )


@dataclass(frozen=True)
class ShotGather:
    """Time-by-receiver panel recorded from one source excitation.

    ``data`` has shape (nt, nrec), float32, stored in seconds along axis 0
    (rendered in milliseconds).
    """

    data: np.ndarray = field(repr=False)
    dt: float
    rec_x: np.ndarray
    src_x: float
    src_z: float
    tag: str = "raw"

    def __post_init__(self):
        object.__setattr__(self, "rec_x", np.asarray(self.rec_x, dtype=np.float64))
        if self.data.ndim != 2:
            raise ParameterError(f"gather data must be 2D (nt, nrec), got shape {self.data.shape}")
        if self.data.shape[1] != self.rec_x.size:
            raise GeometryError(
                f"data has {self.data.shape[1]} traces but rec_x lists {self.rec_x.size}"
            )
        if self.dt <= 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(self.data)):
            raise ParameterError("gather contains non-finite samples")
        if self.tag not in TAGS:
            raise ParameterError(f"unknown tag {self.tag!r}, expected one of {TAGS}")

    @property
    def nt(self) -> int:
        return self.data.shape[0]

    @property
    def nrec(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.nt) * self.dt

    def with_data(self, data: np.ndarray, tag: str | None = None) -> "ShotGather":
        return replace(self, data=data, tag=self.tag if tag is None else tag)


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary treatment: ``top`` switches the physics of the training pair.

    Sides and bottom always absorb with an exponential sponge of
    ``sponge_cells`` width; cell j (counted from the inside of the sponge,
    ending at the grid edge) is damped by exp(-(sponge_strength * j)^2)
    every time step.
    """

    top: str = "free_surface"
    sponge_cells: int = 40
    sponge_strength: float = 0.003

    def __post_init__(self):
        if self.top not in ("free_surface", "absorbing"):
            raise ParameterError(f"top must be free_surface or absorbing, got {self.top!r}")
        if not (20 <= self.sponge_cells <= 80):
            raise ParameterError(f"sponge_cells={self.sponge_cells} outside [20, 80]")
        if not (0.0 < self.sponge_strength <= 0.1):
            raise ParameterError(f"sponge_strength={self.sponge_strength} outside (0, 0.1]")


def max_stable_dt(model: VelocityModel, cfl: float = CFL_LIMIT) -> float:
    """Largest stable FD time step for the 4th-order spatial stencil."""
    vmax = float(model.v.max())
    return cfl / (vmax * math.sqrt(1.0 / model.dx**2 + 1.0 / model.dz**2))


@njit(cache=True, parallel=True, fastmath=True)
def _fd_update(p, pm, pn, v2dt2, damp, i0, i1, j0, j1, wz, wx):
    """pn = damp * (2 p - pm + v^2 dt^2 lap(p)); p *= damp. 4th-order stencil."""
    for i in prange(i0, i1):
        for j in range(j0, j1):
            lap = (
                wz * (-2.5 * p[i, j] + (4.0 / 3.0) * (p[i - 1, j] + p[i + 1, j])
                      - (1.0 / 12.0) * (p[i - 2, j] + p[i + 2, j]))
                + wx * (-2.5 * p[i, j] + (4.0 / 3.0) * (p[i, j - 1] + p[i, j + 1])
                        - (1.0 / 12.0) * (p[i, j - 2] + p[i, j + 2]))
            )
            pn[i, j] = damp[i, j] * (2.0 * p[i, j] - pm[i, j] + v2dt2[i, j] * lap)
    for i in prange(i0, i1):
        for j in range(j0, j1):
            p[i, j] = damp[i, j] * p[i, j]


def _sponge_profile(n_total: int, pad_lo: int, pad_hi: int, strength: float) -> np.ndarray:
    """1D damping profile along one axis: 1 in the interior, Gaussian taper in pads."""
    g = np.ones(n_total)
    if pad_lo:
        j = np.arange(pad_lo, 0, -1, dtype=np.float64)  # distance from inner edge
        g[:pad_lo] = np.exp(-((strength * j) ** 2))
    if pad_hi:
        j = np.arange(1, pad_hi + 1, dtype=np.float64)
        g[n_total - pad_hi:] = np.exp(-((strength * j) ** 2))
    return g


def _resample_wavelet(wavelet: Wavelet, t: np.ndarray, delay: float) -> np.ndarray:
    return np.interp(t - delay, wavelet.times, wavelet.samples, left=0.0, right=0.0)


def _decimation_filter(k: int, dt_sim: float, dt_out: float) -> np.ndarray:
    """Zero-phase FIR for decimation by k; odd length 8k+1, cutoff 0.4/dt_out."""
    taps = 8 * k + 1
    return firwin(taps, 0.4 / dt_out, fs=1.0 / dt_sim)


def simulate(model: VelocityModel, geom: SurveyGeometry, wavelet: Wavelet,
             bc: BoundarySpec, active_sources: list[tuple[int, float]],
             *, dt_sim: float | None = None, on_step=None) -> ShotGather:
    """Propagate one (possibly multi-source) shot and record the receivers.

    Parameters
    ----------
    active_sources : list of (source index, delay seconds)
        Indices into ``geom.src_x``; each source injects the wavelet delayed
        by its entry. Delays are rounded to the internal fine step.
    dt_sim : float, optional
        Force the internal step; must divide ``geom.dt`` and satisfy the
        CFL bound, else a StabilityError names the admissible maximum.
    on_step : callable, optional
        ``on_step(it, field)`` invoked with the full (sponge-padded) grid
        each fine step; for diagnostics only.

    Returns
    -------
    ShotGather tagged ``p_plus_m`` (free-surface top) or ``p_only``.
    """
    geom.validate_for_model(model)
    if not active_sources:
        raise GeometryError("need at least one active source")
    for idx, delay in active_sources:
        if not (0 <= idx < geom.src_x.size):
            raise GeometryError(f"source index {idx} outside 0..{geom.src_x.size - 1}")
        if delay < 0:
            raise ParameterError(f"source delay must be >= 0, got {delay}")

    dt_max = max_stable_dt(model)
    if dt_sim is None:
        k = max(1, int(math.ceil(geom.dt / dt_max - 1e-12)))
        dt_sim = geom.dt / k
    else:
        k_f = geom.dt / dt_sim
        k = int(round(k_f))
        if abs(k_f - k) > 1e-9 * k or k < 1:
            raise ParameterError(f"dt_sim={dt_sim} must divide geom.dt={geom.dt} evenly")
        if dt_sim > dt_max * (1 + 1e-12):
            raise StabilityError(
                f"dt_sim={dt_sim:.3e} violates the CFL bound; maximum admissible "
                f"dt_sim = {dt_max:.3e}"
            )

    free_top = bc.top == "free_surface"
    sp = bc.sponge_cells
    top_pad = 0 if free_top else sp
    # Extended grid: halo | top pad | model | bottom pad | halo, same laterally.
    vext = np.pad(model.v, ((top_pad, sp), (sp, sp)), mode="edge")
    vext = np.pad(vext, HALO, mode="edge")
    nz_t, nx_t = vext.shape
    v2dt2 = (vext * dt_sim) ** 2

    gz = _sponge_profile(nz_t - 2 * HALO, top_pad, sp, bc.sponge_strength)
    gx = _sponge_profile(nx_t - 2 * HALO, sp, sp, bc.sponge_strength)
    damp = np.ones((nz_t, nx_t))
    damp[HALO:-HALO, HALO:-HALO] = gz[:, None] * gx[None, :]

    # Node (row, col) of a physical (z, x) position.
    row0 = HALO + top_pad  # physical z = 0
    col0 = HALO + sp       # physical x = 0

    def node(z, x):
        return row0 + int(round(z / model.dz)), col0 + int(round(x / model.dx))

    rec_rc = [node(geom.rec_z, x) for x in geom.rec_x]
    rec_zi = np.array([r for r, _ in rec_rc])
    rec_xi = np.array([c for _, c in rec_rc])

    # Fine-grid record, extended past the survey window so the zero-phase
    # decimation filter never sees a truncated tail (keeps delayed-source
    # superposition exact after decimation).
    if k > 1:
        h = _decimation_filter(k, dt_sim, geom.dt)
        half = (len(h) - 1) // 2
    else:
        h, half = None, 0
    n_fine = (geom.nt - 1) * k + 1 + half
    t_fine = np.arange(n_fine) * dt_sim

    src_nodes = []
    src_series = []
    for idx, delay in active_sources:
        zi, xi = node(geom.src_z, geom.src_x[idx])
        src_nodes.append((zi, xi))
        src_series.append(_resample_wavelet(wavelet, t_fine, delay))

    p = np.zeros((nz_t, nx_t))
    pm = np.zeros_like(p)
    pn = np.zeros_like(p)
    rec_fine = np.empty((n_fine, geom.nrec))

    i0 = row0 + 1 if free_top else HALO
    i1 = nz_t - HALO
    wz, wx = 1.0 / model.dz**2, 1.0 / model.dx**2

    for it in range(n_fine):
        if free_top:
            p[row0, :] = 0.0
            p[row0 - 1, :] = -p[row0 + 1, :]
            p[row0 - 2, :] = -p[row0 + 2, :]
        rec_fine[it] = p[rec_zi, rec_xi]
        if on_step is not None:
            on_step(it, p)
        _fd_update(p, pm, pn, v2dt2, damp, i0, i1, HALO, nx_t - HALO, wz, wx)
        for (zi, xi), series in zip(src_nodes, src_series):
            pn[zi, xi] += v2dt2[zi, xi] * series[it]
        p, pm, pn = pn, p, pm

    if k > 1:
        # Centered FIR: start is zero-padded (field is identically zero
        # before t=0), the tail is covered by the extended record.
        padded = np.vstack([np.zeros((half, geom.nrec)), rec_fine])
        kernel = h[:, None]  # symmetric taps: correlation == convolution
        out = np.empty((geom.nt, geom.nrec))
        for n in range(geom.nt):
            seg = padded[n * k : n * k + 2 * half + 1]
            out[n] = np.sum(seg * kernel, axis=0)
    else:
        out = rec_fine[: geom.nt]

    tag = "p_plus_m" if free_top else "p_only"
    src_x0 = float(geom.src_x[active_sources[0][0]])
    return ShotGather(data=out.astype(np.float32), dt=geom.dt, rec_x=geom.rec_x.copy(),
                      src_x=src_x0, src_z=geom.src_z, tag=tag)


def apply_ghost(g: ShotGather, src_depth: float, rec_depth: float,
                v_water: float = V_WATER) -> ShotGather:
    """Convolve every trace with the source and receiver ghost operators.

    Each operator is delta(t) - delta(t - 2 depth / v_water): the
    vertical-incidence free-surface replica with reflection coefficient -1.
    Delays are rounded to the nearest sample; the convolution is truncated
    to the input length.
    """
    if src_depth <= 0 or rec_depth <= 0:
        raise ParameterError(f"ghost depths must be positive, got {src_depth}, {rec_depth}")
    out = g.data.astype(np.float64)
    for depth in (src_depth, rec_depth):
        delay = 2.0 * depth / v_water
        if delay < g.dt:
            raise ParameterError(
                f"ghost delay {delay:.4f}s for depth {depth} m is shorter than dt={g.dt}"
            )
        d = int(round(delay / g.dt))
        ghosted = out.copy()
        ghosted[d:] -= out[:-d]
        out = ghosted
    return g.with_data(out.astype(np.float32), tag="ghosted")


def decimate_to(g: ShotGather, dt_out: float) -> ShotGather:
    """Resample a gather to a coarser dt that is an integer multiple of g.dt.

    Keeps every k-th sample; when k > 1 a zero-phase low-pass (cutoff
    0.4/dt_out) is applied first, with reflected edges so constant traces
    pass through unchanged.
    """
    ratio = dt_out / g.dt
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * k:
        raise ParameterError(
            f"dt_out={dt_out} is not an integer multiple of dt={g.dt} (ratio {ratio})"
        )
    if k == 1:
        return g.with_data(g.data.copy())
    from scipy.ndimage import convolve1d

    h = _decimation_filter(k, g.dt, dt_out)
    sm = convolve1d(g.data.astype(np.float64), h, axis=0, mode="reflect")
    return replace(g, data=sm[::k].astype(np.float32), dt=dt_out)


def pick_event_time(trace: np.ndarray, dt: float, wavelet: Wavelet,
                    t_min: float, t_max: float) -> float:
    """Arrival time of the dominant event in a window, by matched filter.

    Cross-correlates the trace with the wavelet so the reported time is the
    event's ray time (the wavelet peak delay t0 drops out). Uses |corr| so
    polarity does not matter.
    """
    w = np.interp(np.arange(0.0, wavelet.duration + dt / 2, dt),
                  wavelet.times, wavelet.samples)
    corr = np.correlate(trace.astype(np.float64), w, mode="full")
    # Full-correlation index L aligns the wavelet start with trace sample
    # L - (len(w) - 1); with the wavelet peak at t0, that start IS the ray time.
    onset = (np.arange(corr.size) - (len(w) - 1)) * dt
    mask = (onset >= t_min) & (onset <= t_max)
    if not np.any(mask):
        raise ParameterError(f"search window [{t_min}, {t_max}] outside trace")
    sub = np.abs(corr[mask])
    return float(onset[mask][np.argmax(sub)])


def window_rms(g: ShotGather, trace: int, t_center: float, t_half: float) -> float:
    """RMS amplitude of one trace inside [t_center - t_half, t_center + t_half]."""
    i0 = max(0, int(round((t_center - t_half) / g.dt)))
    i1 = min(g.nt, int(round((t_center + t_half) / g.dt)) + 1)
    if i1 <= i0:
        raise ParameterError("empty window")
    seg = g.data[i0:i1, trace].astype(np.float64)
    return float(np.sqrt(np.mean(seg**2)))
