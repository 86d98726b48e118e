"""Versioned binary container for checkpoints and classifier snapshots.

Layout:

    magic      4 bytes  b"MCK1"
    header_len u32 little-endian
    header     UTF-8 JSON: {"meta": {...}, "tensors": [[name, dtype, shape], ...]}
    blobs      raw tensor bytes, concatenated in listed order

Tensor dtypes are numpy dtype strings (e.g. ``"<f4"``, ``"|u1"``). Writing is
fully deterministic: the header is serialized with sorted keys and no
timestamps, so identical contents produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = ["save_container", "load_container"]

_MAGIC = b"MCK1"


def save_container(path: str | Path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    entries = []
    blobs = []
    for name in tensors:
        arr = np.ascontiguousarray(tensors[name])
        entries.append([name, arr.dtype.str, list(arr.shape)])
        blobs.append(arr.tobytes())
    header = json.dumps({"meta": meta, "tensors": entries}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"container not found: {path}")
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise DataError(f"{path}: bad magic {blob[:4]!r}, expected {_MAGIC!r}")
    (header_len,) = struct.unpack_from("<I", blob, 4)
    try:
        header = json.loads(blob[8 : 8 + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: corrupt header ({e})") from None
    offset = 8 + header_len
    tensors = {}
    for name, dtype, shape in header["tensors"]:
        dt = np.dtype(dtype)
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = dt.itemsize * count
        if offset + nbytes > len(blob):
            raise DataError(f"{path}: truncated tensor data for {name!r}")
        arr = np.frombuffer(blob, dtype=dt, count=count, offset=offset).reshape(shape)
        tensors[name] = arr.copy()
        offset += nbytes
    if offset != len(blob):
        raise DataError(f"{path}: {len(blob) - offset} trailing bytes")
    return header["meta"], tensors
