"""Versioned binary checkpoint container.

Layout (all integers little-endian):

    offset  size  field
    0       8     magic b"SHRSSM\\x00\\x01" (format version in the last byte)
    8       8     u64 seed
    16      4     u32 config length, then that many UTF-8 bytes (config echo)
    ...     4     u32 tensor count
    per tensor:
            2     u16 name length, then UTF-8 name
            1     u8 dtype code (0 = float64, 1 = float32, 2 = int64)
            1     u8 ndim
            8*n   u64 dims
            ...   raw C-order little-endian data

The config echo is the exact run-config text so a checkpoint is
self-describing.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataError

MAGIC = b"SHRSSM\x00\x01"

_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4"), 2: np.dtype("<i8")}
_CODES = {np.dtype("float64"): 0, np.dtype("float32"): 1, np.dtype("int64"): 2}


def save_checkpoint(path: str, named_arrays, config_text: str = "", seed: int = 0):
    """Write named tensors with a config echo and the run seed."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", seed))
        config_bytes = config_text.encode("utf-8")
        fh.write(struct.pack("<I", len(config_bytes)))
        fh.write(config_bytes)
        items = list(named_arrays.items()) if isinstance(named_arrays, dict) \
            else list(named_arrays)
        fh.write(struct.pack("<I", len(items)))
        for name, arr in items:
            arr = np.ascontiguousarray(arr)
            if arr.dtype not in _CODES:
                arr = arr.astype(np.float64)
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<BB", _CODES[arr.dtype], arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path: str):
    """Read a checkpoint; returns (named arrays dict, config text, seed)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    off = len(MAGIC)

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    (seed,) = take("<Q")
    (config_len,) = take("<I")
    config_text = blob[off : off + config_len].decode("utf-8")
    off += config_len
    (count,) = take("<I")
    arrays = {}
    for _ in range(count):
        (name_len,) = take("<H")
        name = blob[off : off + name_len].decode("utf-8")
        off += name_len
        code, ndim = take("<BB")
        if code not in _DTYPES:
            raise DataError(f"{path}: unknown dtype code {code}")
        shape = take(f"<{ndim}Q") if ndim else ()
        dtype = _DTYPES[code]
        n_bytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if shape \
            else dtype.itemsize
        data = np.frombuffer(blob[off : off + n_bytes], dtype=dtype).reshape(shape)
        off += n_bytes
        arrays[name] = data.copy()
    return arrays, config_text, seed
