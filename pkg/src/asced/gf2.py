"""Dense linear algebra over F2.

Matrices are exchanged as 2-D ``uint8`` arrays holding 0/1 entries.  Internally
rows are packed into 64-bit words so that Gaussian elimination XORs whole words
at a time.
"""

from __future__ import annotations

import io
import os

import numpy as np
from numba import njit

from .validation import check_binary_matrix, check_binary_vector

__all__ = [
    "pack_rows",
    "unpack_rows",
    "row_reduce",
    "rank",
    "in_rowspace",
    "complete_basis",
    "nullspace_basis",
    "matmul",
    "format_matrix",
    "parse_matrix",
    "write_matrix",
    "read_matrix",
]


def pack_rows(m: np.ndarray) -> np.ndarray:
    """Pack a 0/1 matrix into little-endian ``uint64`` words, column ``c`` at bit ``c % 64``."""
    m = np.asarray(m, dtype=np.uint8)
    rows, cols = m.shape
    nwords = max(1, (cols + 63) // 64)
    padded = np.zeros((rows, nwords * 64), dtype=np.uint8)
    padded[:, :cols] = m
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def unpack_rows(words: np.ndarray, cols: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype="<u8")
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")
    return np.ascontiguousarray(bits[:, :cols])


@njit(cache=True)
def _eliminate(words, pivot_cols):
    """In-place reduced row echelon form on packed rows; pivots searched in ``[0, pivot_cols)``."""
    rows, nw = words.shape
    pivots = np.empty(min(rows, pivot_cols), dtype=np.int64)
    r = 0
    for c in range(pivot_cols):
        if r == rows:
            break
        w = c >> 6
        bit = np.uint64(1) << np.uint64(c & 63)
        p = -1
        for i in range(r, rows):
            if words[i, w] & bit:
                p = i
                break
        if p < 0:
            continue
        if p != r:
            for k in range(nw):
                tmp = words[r, k]
                words[r, k] = words[p, k]
                words[p, k] = tmp
        for i in range(rows):
            if i != r and (words[i, w] & bit):
                for k in range(w, nw):
                    words[i, k] ^= words[r, k]
        pivots[r] = c
        r += 1
    return r, pivots[:r]


def row_reduce(m) -> tuple[np.ndarray, list[int], np.ndarray]:
    """Reduced row echelon form of ``m`` with the transform that produces it.

    Returns ``(reduced, pivots, transform)`` with ``transform @ m == reduced``
    over F2.  ``reduced`` keeps the row count of ``m``; zero rows sit at the bottom.
    """
    m = check_binary_matrix(m)
    rows, cols = m.shape
    aug = np.concatenate([m, np.eye(rows, dtype=np.uint8)], axis=1)
    words = pack_rows(aug)
    _, piv = _eliminate(words, cols)
    out = unpack_rows(words, cols + rows)
    return out[:, :cols].copy(), [int(c) for c in piv], out[:, cols:].copy()


def _rref(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero RREF rows and pivot columns, without the transform bookkeeping."""
    rows, cols = m.shape
    if rows == 0:
        return np.zeros((0, cols), dtype=np.uint8), np.zeros(0, dtype=np.int64)
    words = pack_rows(m)
    r, piv = _eliminate(words, cols)
    return unpack_rows(words[:r], cols), piv.copy()


def rank(m) -> int:
    m = check_binary_matrix(m)
    if m.shape[0] == 0:
        return 0
    r, _ = _eliminate(pack_rows(m), m.shape[1])
    return int(r)


def in_rowspace(m, v) -> bool:
    """True iff ``v`` is an F2 combination of the rows of ``m``."""
    m = check_binary_matrix(m)
    v = check_binary_vector(v, "v", length=m.shape[1])
    if not v.any():
        return True
    reduced, piv = _rref(m)
    v = v.copy()
    for row, c in zip(reduced, piv):
        if v[c]:
            v ^= row
    return not v.any()


def complete_basis(basis, ambient_dim: int) -> np.ndarray:
    """Standard unit vectors that extend ``basis`` to a basis of F2^ambient_dim.

    The added vectors sit at the non-pivot columns of the RREF of ``basis``, in
    increasing column order, so the completion is deterministic.
    """
    basis = check_binary_matrix(basis, "basis", cols=ambient_dim)
    reduced, piv = _rref(basis)
    if reduced.shape[0] != basis.shape[0]:
        raise ValueError("basis rows are linearly dependent")
    free = np.setdiff1d(np.arange(ambient_dim), piv)
    out = np.zeros((free.size, ambient_dim), dtype=np.uint8)
    out[np.arange(free.size), free] = 1
    return out


def nullspace_basis(m) -> np.ndarray:
    """Basis of ``{v : m v^T = 0}``, one row per free column of the RREF."""
    m = check_binary_matrix(m)
    cols = m.shape[1]
    reduced, piv = _rref(m)
    free = np.setdiff1d(np.arange(cols), piv)
    out = np.zeros((free.size, cols), dtype=np.uint8)
    for t, f in enumerate(free):
        out[t, f] = 1
        out[t, piv] = reduced[:, f]
    return out


def matmul(a, b) -> np.ndarray:
    """Matrix product over F2."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    return (a @ b & 1).astype(np.uint8)


def format_matrix(m) -> str:
    """Text form: a ``rows cols`` header, then one contiguous 0/1 string per row."""
    m = check_binary_matrix(m)
    lines = [f"{m.shape[0]} {m.shape[1]}"]
    lines.extend("".join("1" if b else "0" for b in row) for row in m)
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix text")
    try:
        rows, cols = (int(t) for t in lines[0].split())
    except ValueError as exc:
        raise ValueError(f"bad matrix header {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != rows:
        raise ValueError(f"header declares {rows} rows, found {len(body)}")
    out = np.zeros((rows, cols), dtype=np.uint8)
    for i, ln in enumerate(body):
        if len(ln) != cols or set(ln) - {"0", "1"}:
            raise ValueError(f"row {i + 1}: expected {cols} characters of 0/1")
        out[i] = np.frombuffer(ln.encode(), dtype=np.uint8) - ord("0")
    return out


def write_matrix(path: str | os.PathLike | io.TextIOBase, m) -> None:
    text = format_matrix(m)
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    with open(path) as fh:
        return parse_matrix(fh.read())
