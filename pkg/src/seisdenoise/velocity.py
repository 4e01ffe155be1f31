"""Subsurface velocity models.

Two constructors cover the training corpus: a flat water-over-halfspace
model and a seeded generator of dipping, faulted layer stacks that mimics
the lateral complexity of classic 2D benchmarks. A raw-grid importer lets
users bring their own crops.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FileFormatError, ParameterError

V_WATER = 1500.0
V_MIN = 1400.0
V_MAX = 6500.0

GRID_MAGIC = b"VGRD"
GRID_VERSION = 1


@dataclass(frozen=True)
class VelocityModel:
    """2D gridded P-wave velocity field, depth-major.

    Attributes
    ----------
    nz, nx : int
        Cell counts in depth and laterally.
    dz, dx : float
        Cell size in meters.
    v : ndarray of shape (nz, nx)
        Velocity in m/s, within [1400, 6500]; the top ``water_depth_cells``
        rows are exactly 1500 m/s.
    water_depth_cells : int
    """

    nz: int
    nx: int
    dz: float
    dx: float
    v: np.ndarray = field(repr=False)
    water_depth_cells: int

    def __post_init__(self):
        if self.dz <= 0 or self.dx <= 0:
            raise ParameterError(f"cell sizes must be positive, got dz={self.dz}, dx={self.dx}")
        if self.nx < 32:
            raise ParameterError(f"nx must be >= 32, got nx={self.nx}")
        if self.nz < 3 * self.water_depth_cells:
            raise ParameterError(
                f"nz={self.nz} too shallow for water_depth_cells={self.water_depth_cells} "
                f"(need nz >= {3 * self.water_depth_cells})"
            )
        if self.v.shape != (self.nz, self.nx):
            raise ParameterError(f"v has shape {self.v.shape}, expected {(self.nz, self.nx)}")
        if not np.all(np.isfinite(self.v)):
            raise ParameterError("v contains non-finite values")
        if self.v.min() < V_MIN or self.v.max() > V_MAX:
            raise ParameterError(
                f"v must lie in [{V_MIN}, {V_MAX}] m/s, got [{self.v.min()}, {self.v.max()}]"
            )
        wd = self.water_depth_cells
        if wd > 0 and not np.all(self.v[:wd] == V_WATER):
            raise ParameterError(f"top {wd} rows must be exactly {V_WATER} m/s water")
        self.v.setflags(write=False)

    @property
    def depth_m(self) -> float:
        return self.nz * self.dz

    @property
    def width_m(self) -> float:
        return self.nx * self.dx

    @property
    def water_depth_m(self) -> float:
        return self.water_depth_cells * self.dz

    def deepest_interface_cell(self) -> int:
        """Deepest row index at which velocity changes from the row above.

        Returns 0 for a homogeneous model.
        """
        changed = np.any(self.v[1:] != self.v[:-1], axis=1)
        rows = np.nonzero(changed)[0]
        return int(rows[-1] + 1) if rows.size else 0

    def two_way_time_to(self, cell: int, column: int | None = None) -> float:
        """Vertical two-way travel time from the surface down to ``cell``.

        Uses the slowest column when ``column`` is None (conservative for
        record-length checks).
        """
        if cell <= 0:
            return 0.0
        v = self.v[:cell] if column is None else self.v[:cell, column : column + 1]
        per_col = 2.0 * self.dz * np.sum(1.0 / v, axis=0)
        return float(per_col.max())


def _water_cells(water_depth_m: float, dz: float) -> int:
    return int(round(water_depth_m / dz))


def make_two_layer(nz: int, nx: int, dz: float, dx: float,
                   water_depth_m: float, v_below: float) -> VelocityModel:
    """Flat two-layer model: water over a constant-velocity halfspace.

    The interface sits at cell ``round(water_depth_m / dz)``.
    """
    if dz <= 0 or dx <= 0:
        raise ParameterError(f"cell sizes must be positive, got dz={dz}, dx={dx}")
    if not water_depth_m < nz * dz / 3:
        raise ParameterError(
            f"water_depth_m={water_depth_m} must be < nz*dz/3 = {nz * dz / 3}"
        )
    if not (1600.0 <= v_below <= V_MAX):
        raise ParameterError(f"v_below={v_below} outside [1600, {V_MAX}] m/s")
    if abs(v_below - V_WATER) < 50.0:
        raise ParameterError(
            f"v_below={v_below} too close to water velocity (need >= 50 m/s contrast)"
        )
    wd = _water_cells(water_depth_m, dz)
    v = np.full((nz, nx), v_below, dtype=np.float64)
    v[:wd] = V_WATER
    return VelocityModel(nz=nz, nx=nx, dz=dz, dx=dx, v=v, water_depth_cells=wd)


def make_marmousi_like(seed: int, nz: int, nx: int, dz: float, dx: float,
                       water_depth_m: float, n_layers: int, dip_max_deg: float,
                       v_gradient: float) -> VelocityModel:
    """Seeded generator of dipping, faulted sediment stacks under water.

    Layer base velocities increase with depth; each interface gets a random
    dip within ``dip_max_deg`` and up to two vertical fault offsets cut the
    stack. A linear background gradient ``v_gradient`` ((m/s)/m) is added
    below the water bottom. Deterministic for a given argument tuple.

    Parameters
    ----------
    seed : int
        RNG seed; all structure derives from it.
    n_layers : int
        Number of layers below the water bottom, in [3, 20].
    dip_max_deg : float
        Maximum absolute interface dip, in [0, 25] degrees.
    v_gradient : float
        Background velocity gradient in (m/s)/m, applied below the water.
    """
    if not (3 <= n_layers <= 20):
        raise ParameterError(f"n_layers={n_layers} outside [3, 20]")
    if not (0.0 <= dip_max_deg <= 25.0):
        raise ParameterError(f"dip_max_deg={dip_max_deg} outside [0, 25]")
    if dz <= 0 or dx <= 0:
        raise ParameterError(f"cell sizes must be positive, got dz={dz}, dx={dx}")
    if not water_depth_m < nz * dz / 3:
        raise ParameterError(
            f"water_depth_m={water_depth_m} must be < nz*dz/3 = {nz * dz / 3}"
        )

    rng = np.random.default_rng(seed)
    wd = _water_cells(water_depth_m, dz)
    sub = nz - wd  # rows available below the water bottom

    # Mean interface depths (cells below water bottom), sorted and separated.
    n_ifaces = n_layers - 1
    fracs = np.sort(rng.uniform(0.08, 0.95, size=n_ifaces))
    base_depth = wd + fracs * sub

    # Per-interface dip, expressed as cells of depth shift per lateral cell.
    dips = np.deg2rad(rng.uniform(-dip_max_deg, dip_max_deg, size=n_ifaces))
    slope = np.tan(dips) * (dx / dz)
    xs = np.arange(nx) - nx / 2.0
    depth = base_depth[:, None] + slope[:, None] * xs[None, :]

    # Up to two vertical faults: all interfaces right of the fault shift.
    n_faults = rng.integers(0, 3)
    max_throw = max(2, sub // 10)
    for _ in range(n_faults):
        pos = int(rng.integers(nx // 8, nx - nx // 8))
        throw = float(rng.integers(-max_throw, max_throw + 1))
        depth[:, pos:] += throw

    # Keep interfaces ordered and below the water bottom.
    depth = np.clip(depth, wd + 1, nz)
    depth = np.maximum.accumulate(depth, axis=0)

    # Layer base velocities: strictly increasing with layer index.
    v0 = 1650.0 + rng.uniform(0.0, 200.0)
    increments = rng.uniform(80.0, 350.0, size=n_ifaces)
    bases = v0 + np.concatenate([[0.0], np.cumsum(increments)])

    # Layer index per cell = number of interfaces above it.
    zgrid = np.arange(nz)[:, None]
    k = (zgrid >= depth[:, None, :].transpose(1, 0, 2)).sum(axis=1)
    v = bases[k]
    below = np.clip((zgrid - wd) * dz, 0.0, None)
    v = v + v_gradient * below
    v = np.clip(v, V_MIN, V_MAX)
    v[:wd] = V_WATER
    return VelocityModel(nz=nz, nx=nx, dz=dz, dx=dx, v=v, water_depth_cells=wd)


def import_grid(path, dz: float, dx: float, water_depth_m: float) -> VelocityModel:
    """Read a raw little-endian velocity grid.

    Layout: magic b"VGRD", u32 version (=1), u32 nz, u32 nx, then nz*nx f32
    values in row-major (depth-major) order. Values are clamped to the
    supported velocity range and the top rows are overwritten with water.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    header_len = 4 + 4 + 4 + 4
    if len(raw) < header_len:
        raise FileFormatError(
            f"{path}: truncated header, got {len(raw)} bytes, need {header_len} (byte offset 0)"
        )
    magic = raw[:4]
    if magic != GRID_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r} at byte offset 0, expected {GRID_MAGIC!r}")
    version, nz, nx = struct.unpack_from("<III", raw, 4)
    if version != GRID_VERSION:
        raise FileFormatError(f"{path}: unsupported version {version} at byte offset 4")
    expected = header_len + nz * nx * 4
    if len(raw) != expected:
        raise FileFormatError(
            f"{path}: payload size mismatch, expected {expected} bytes, got {len(raw)} "
            f"(byte offset {min(len(raw), expected)})"
        )
    v = np.frombuffer(raw, dtype="<f4", count=nz * nx, offset=header_len).astype(np.float64)
    bad = np.nonzero(~np.isfinite(v))[0]
    if bad.size:
        idx = int(bad[0])
        raise FileFormatError(
            f"{path}: non-finite value at flattened index {idx} "
            f"(byte offset {header_len + 4 * idx})"
        )
    v = np.clip(v.reshape(nz, nx), V_MIN, V_MAX)
    wd = _water_cells(water_depth_m, dz)
    v[:wd] = V_WATER
    return VelocityModel(nz=int(nz), nx=int(nx), dz=dz, dx=dx, v=v, water_depth_cells=wd)


def export_grid(model: VelocityModel, path) -> None:
    """Write a model in the raw-grid format understood by :func:`import_grid`."""
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<III", GRID_VERSION, model.nz, model.nx))
        fh.write(model.v.astype("<f4").tobytes())
