"""Reading observation matrices and writing entry sets.

Two input formats are supported:

* CSV, one observation per line, optionally preceded by a header line.
* Binary: the 8-byte magic ``SCOVMAT1``, little-endian ``u64 n``,
  ``u64 p`` and then ``n * p`` little-endian float64 values in row-major
  order.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .exceptions import FileFormatError
from .linalg import SparseEntrySet

MAGIC = b"SCOVMAT1"
_HEADER = struct.Struct("<8sQQ")


def read_csv_matrix(path, *, header: bool = False) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    return data


def write_csv_matrix(path, X) -> None:
    np.savetxt(path, np.asarray(X, dtype=np.float64), delimiter=",", fmt="%.17g")


def read_binary_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FileFormatError(f"{path}: truncated header")
        magic, n, p = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FileFormatError(f"{path}: bad magic {magic!r}")
        body = np.fromfile(fh, dtype="<f8")
    if body.size != n * p:
        raise FileFormatError(f"{path}: expected {n * p} values, found {body.size}")
    return body.reshape(n, p).astype(np.float64, copy=False)


def write_binary_matrix(path, X) -> None:
    X = np.ascontiguousarray(X, dtype="<f8")
    n, p = X.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, p))
        X.tofile(fh)


def _is_binary(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(len(MAGIC)) == MAGIC


def read_matrix(path, *, header: bool = False) -> np.ndarray:
    """Read an ``(n, p)`` matrix, detecting the binary format by its magic."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if _is_binary(path):
        return read_binary_matrix(path)
    return read_csv_matrix(path, header=header)


def write_matrix(path, X) -> None:
    """Write binary for ``.bin`` paths and CSV otherwise."""
    if Path(path).suffix == ".bin":
        write_binary_matrix(path, X)
    else:
        write_csv_matrix(path, X)


def write_entries(path, entries: SparseEntrySet) -> None:
    """``i,j,value`` lines with 0-based indices, sorted by ``(i, j)``."""
    with open(path, "w") as fh:
        for line in entries.to_csv_lines():
            fh.write(line + "\n")


def read_entries(path, p: int = 0) -> SparseEntrySet:
    if os.path.getsize(path) == 0:
        return SparseEntrySet(np.empty(0), np.empty(0), np.empty(0), p)
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[1] != 3:
        raise FileFormatError(f"{path}: expected i,j,value lines")
    return SparseEntrySet(data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2], p)


def write_pairs(path, pairs) -> None:
    """Ground-truth support as sorted ``i,j`` lines."""
    with open(path, "w") as fh:
        for i, j in sorted(pairs):
            fh.write(f"{i},{j}\n")


def read_pairs(path) -> set[tuple[int, int]]:
    data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.int64)
    return {(int(i), int(j)) for i, j in data}
