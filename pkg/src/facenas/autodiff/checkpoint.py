"""Binary weight checkpoints.

Layout (all integers little-endian)::

    magic   4 bytes   b"FNCK"
    version u32       currently 1
    count   u32       number of entries
    entry * count:
        name_len u16, name (utf-8)
        dtype    u8   (0 = float32, 1 = float64)
        ndim     u8
        dims     u32 * ndim
        data     row-major values, prod(dims) * itemsize bytes

Entries are written in sorted name order so identical weights give identical
files.
"""
import struct

import numpy as np

MAGIC = b"FNCK"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, arrays):
    """Write a mapping name -> array (or Tensor) to ``path``."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(arrays)))
        for name in sorted(arrays):
            arr = arrays[name]
            arr = np.asarray(getattr(arr, "data", arr))
            code = _CODES.get(arr.dtype)
            if code is None:
                raise CheckpointError(f"unsupported dtype {arr.dtype} for {name}")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BB", code, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())


def load_checkpoint(path):
    """Read a checkpoint back into a dict name -> numpy array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a weight checkpoint")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    pos = 12
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + nlen].decode("utf-8")
        pos += nlen
        code, ndim = struct.unpack_from("<BB", blob, pos)
        pos += 2
        shape = struct.unpack_from(f"<{ndim}I", blob, pos)
        pos += 4 * ndim
        dt = _DTYPES[code]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        out[name] = np.frombuffer(blob[pos:pos + nbytes], dtype=dt).reshape(shape).copy()
        pos += nbytes
    if pos != len(blob):
        raise CheckpointError(f"{path}: trailing bytes")
    return out
