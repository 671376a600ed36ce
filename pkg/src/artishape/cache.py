"""Content-addressed on-disk cache of named numpy arrays.

File layout (all little-endian): magic ``ARTSHAPE``, one version byte, a
uint32 array count, then per array a uint16-prefixed UTF-8 name, a
uint8-prefixed dtype string, a uint8 ndim, ndim uint64 dims and the raw data.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from collections import Counter
from pathlib import Path

import numpy as np

MAGIC = b"ARTSHAPE"
VERSION = 1


class CacheFormatError(ValueError):
    pass


def encode_arrays(arrays: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<BI", VERSION, len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        arr = arr.astype(arr.dtype.newbyteorder("<"), order="C")  # keeps 0-d shapes
        nb = name.encode()
        dt = arr.dtype.str.encode()
        parts.append(struct.pack("<H", len(nb)) + nb)
        parts.append(struct.pack("<B", len(dt)) + dt)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def decode_arrays(data: bytes) -> dict[str, np.ndarray]:
    if data[:len(MAGIC)] != MAGIC:
        raise CacheFormatError("bad magic")
    pos = len(MAGIC)
    version, count = struct.unpack_from("<BI", data, pos)
    if version != VERSION:
        raise CacheFormatError(f"cache version {version}, expected {VERSION}")
    pos += 5
    out = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + ln].decode()
        pos += ln
        (ld,) = struct.unpack_from("<B", data, pos)
        pos += 1
        dtype = np.dtype(data[pos:pos + ld].decode())
        pos += ld
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        out[name] = np.frombuffer(data, dtype=dtype, count=int(np.prod(shape, dtype=np.int64)),
                                  offset=pos).reshape(shape).copy()
        pos += nbytes
    return out


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def make_key(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


class ArrayCache:
    """Stage-partitioned array store; ``root=None`` disables persistence."""

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else None
        self.hits = Counter()
        self.misses = Counter()

    def _path(self, stage, key):
        return self.root / stage / f"{key}.bin"

    def get(self, stage: str, key: str):
        if self.root is None:
            self.misses[stage] += 1
            return None
        path = self._path(stage, key)
        try:
            arrays = decode_arrays(path.read_bytes())
        except (FileNotFoundError, CacheFormatError, struct.error, ValueError):
            self.misses[stage] += 1
            return None
        self.hits[stage] += 1
        return arrays

    def put(self, stage: str, key: str, arrays: dict[str, np.ndarray]) -> None:
        if self.root is not None:
            atomic_write(self._path(stage, key), encode_arrays(arrays))
