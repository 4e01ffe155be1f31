"""Parameter checkpoints.

Layout: magic b"UNET", u32 version (=1), u32 config-JSON length, the JSON,
then for each array in canonical order: u32 name length, name (utf-8),
u32 element count, f32 payload. Little-endian throughout. The canonical
order is the construction order documented in unet.py.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import FileFormatError, IntegrityError
from .unet import UNetConfig, UNetParams, init_params

MAGIC = b"UNET"
VERSION = 1


def save_params(params: UNetParams, path) -> None:
    cfg_json = params.config.to_json().encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(cfg_json)))
        fh.write(cfg_json)
        for name in params.names():
            arr = params.arrays[name]
            nb = name.encode()
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<I", arr.size))
            fh.write(arr.astype("<f4").tobytes())


def load_params(path) -> UNetParams:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise FileFormatError(f"{path}: not a parameter checkpoint (bad magic/header)")
    version, jlen = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise FileFormatError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    cfg = UNetConfig.from_json(raw[off:off + jlen].decode())
    off += jlen

    # Template gives the canonical names and shapes to validate against.
    template = init_params(cfg, seed=0)
    arrays: dict[str, np.ndarray] = {}
    for expected in template.names():
        if off + 4 > len(raw):
            raise FileFormatError(f"{path}: truncated before entry {expected!r}")
        (nlen,) = struct.unpack_from("<I", raw, off)
        off += 4
        name = raw[off:off + nlen].decode()
        off += nlen
        if name != expected:
            raise IntegrityError(
                f"{path}: entry {name!r} out of canonical order (expected {expected!r})"
            )
        (count,) = struct.unpack_from("<I", raw, off)
        off += 4
        shape = template.arrays[name].shape
        if count != template.arrays[name].size:
            raise FileFormatError(
                f"{path}: {name} has {count} elements, config implies "
                f"{template.arrays[name].size}"
            )
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=off).reshape(shape).copy()
        off += 4 * count
        arrays[name] = arr
    if off != len(raw):
        raise FileFormatError(f"{path}: {len(raw) - off} trailing bytes after last entry")
    return UNetParams(config=cfg, arrays=arrays)
