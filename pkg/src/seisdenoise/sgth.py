"""SGTH gather files: little-endian binary, trace-major f32 samples.

Layout: magic b"SGTH", u32 version (=1), u32 nt, u32 nrec, f64 dt,
f64 rec_x0, f64 rec_dx, f64 src_x, f64 src_z, u8 tag code, then nt*nrec
f32 samples trace-major (all samples of receiver 0, then receiver 1, ...).
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FileFormatError
from .wavesim import TAGS, ShotGather

MAGIC = b"SGTH"
VERSION = 1
_HEADER = struct.Struct("<4sIII5dB")

TAG_CODES = {name: i for i, name in enumerate(TAGS)}
CODE_TAGS = {i: name for name, i in TAG_CODES.items()}


def save_gather(g: ShotGather, path) -> None:
    header = _HEADER.pack(MAGIC, VERSION, g.nt, g.nrec, g.dt,
                          float(g.rec_x[0]), float(g.rec_x[1] - g.rec_x[0]),
                          g.src_x, g.src_z, TAG_CODES[g.tag])
    payload = np.ascontiguousarray(g.data.T, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_gather(path) -> ShotGather:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FileFormatError(f"{path}: truncated header ({len(raw)} < {_HEADER.size} bytes)")
    magic, version, nt, nrec, dt, x0, dxr, src_x, src_z, code = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r} at byte offset 0")
    if version != VERSION:
        raise FileFormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + nt * nrec * 4
    if len(raw) != expected:
        raise FileFormatError(
            f"{path}: expected {expected} bytes, got {len(raw)} "
            f"(byte offset {min(len(raw), expected)})"
        )
    if code not in CODE_TAGS:
        raise FileFormatError(f"{path}: unknown tag code {code}")
    flat = np.frombuffer(raw, dtype="<f4", count=nt * nrec, offset=_HEADER.size)
    data = flat.reshape(nrec, nt).T.copy()
    rec_x = x0 + dxr * np.arange(nrec)
    return ShotGather(data=data, dt=dt, rec_x=rec_x, src_x=src_x, src_z=src_z,
                      tag=CODE_TAGS[code])
