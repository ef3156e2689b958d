"""Binary tensor snapshots: fixed little-endian header plus row-major payload.

Header layout: magic ``RTSN`` (4 bytes), dtype code (1 byte: 0 = float64,
1 = float32), rows (u64), cols (u64).  A vector of length n is stored with
rows = n, cols = 0 and reads back one-dimensional.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"RTSN"
_HEADER = struct.Struct("<4sBQQ")
_CODE_TO_DTYPE = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_DTYPE_TO_CODE = {np.dtype(np.float64): 0, np.dtype(np.float32): 1}


def write_tensor(path, arr):
    arr = np.asarray(arr)
    if arr.ndim not in (1, 2):
        raise ValueError("only 1-D and 2-D tensors are supported")
    if arr.dtype not in _DTYPE_TO_CODE:
        arr = arr.astype(np.float64)
    code = _DTYPE_TO_CODE[arr.dtype]
    rows = arr.shape[0]
    cols = arr.shape[1] if arr.ndim == 2 else 0
    payload = np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, code, rows, cols))
        fh.write(payload)


def read_tensor(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, code, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if code not in _CODE_TO_DTYPE:
            raise ValueError(f"{path}: unknown dtype code {code}")
        dtype = _CODE_TO_DTYPE[code]
        count = rows * (cols if cols else 1)
        payload = fh.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise ValueError(f"{path}: truncated payload")
    arr = np.frombuffer(payload, dtype=dtype).copy()
    return arr.reshape(rows, cols) if cols else arr


def _tensor_filename(name):
    return name.replace("/", "__") + ".tsnp"


def save_store(dirpath, store):
    """Write every parameter of a ParamStore as one snapshot per tensor."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    for name in store.names():
        write_tensor(dirpath / _tensor_filename(name), store.param(name))


def load_store(dirpath, store):
    """Load snapshots back into an already-built ParamStore, in place."""
    dirpath = Path(dirpath)
    for name in store.names():
        arr = read_tensor(dirpath / _tensor_filename(name))
        target = store.param(name)
        if arr.shape != target.shape:
            raise ValueError(f"{name!r}: snapshot shape {arr.shape} does not "
                             f"match parameter shape {target.shape}")
        np.copyto(target, arr.astype(np.float64))
