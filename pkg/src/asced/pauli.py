"""Phase-free Pauli operators in the binary symplectic picture.

An n-qubit Pauli string maps to ``(x | z)`` in F2^{2n}: I -> (0|0), X -> (1|0),
Z -> (0|1), Y -> (1|1).  Global phases are dropped throughout.
"""

from __future__ import annotations

import numpy as np

from .validation import check_binary_vector

__all__ = [
    "phi",
    "phi_inv",
    "symplectic_product",
    "symplectic_gram",
    "pauli_weight",
    "pauli_product",
    "qubit_codes",
]

_TO_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_FROM_BITS = {v: k for k, v in _TO_BITS.items()}


def phi(p: str) -> np.ndarray:
    """Binary symplectic image ``(x | z)`` of a Pauli string such as ``"XIZY"``."""
    try:
        bits = [_TO_BITS[c] for c in p.upper()]
    except KeyError as exc:
        raise ValueError(f"invalid Pauli character {exc.args[0]!r} in {p!r}") from None
    n = len(bits)
    out = np.zeros(2 * n, dtype=np.uint8)
    for i, (x, z) in enumerate(bits):
        out[i] = x
        out[n + i] = z
    return out


def phi_inv(v) -> str:
    v = check_binary_vector(v, "v")
    if v.size % 2:
        raise ValueError("symplectic vector must have even length")
    n = v.size // 2
    return "".join(_FROM_BITS[(int(v[i]), int(v[n + i]))] for i in range(n))


def symplectic_product(u, v) -> int:
    """``<u, v> = u_x . v_z + v_x . u_z`` over F2; zero iff the Paulis commute."""
    u = check_binary_vector(u, "u")
    v = check_binary_vector(v, "v", length=u.size)
    if u.size % 2:
        raise ValueError("symplectic vectors must have even length")
    n = u.size // 2
    return int((np.dot(u[:n], v[n:]) + np.dot(v[:n], u[n:])) & 1)


def symplectic_gram(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All pairwise symplectic products between rows of ``a`` and rows of ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.int64))
    b = np.atleast_2d(np.asarray(b, dtype=np.int64))
    n = a.shape[1] // 2
    return ((a[:, :n] @ b[:, n:].T + a[:, n:] @ b[:, :n].T) & 1).astype(np.uint8)


def pauli_weight(v) -> int | np.ndarray:
    """Number of qubits acted on non-trivially; vectorised over rows for 2-D input."""
    v = np.asarray(v, dtype=np.uint8)
    n = v.shape[-1] // 2
    support = v[..., :n] | v[..., n:]
    if v.ndim == 1:
        return int(support.sum())
    return support.sum(axis=-1)


def qubit_codes(v: np.ndarray) -> np.ndarray:
    """Per-qubit 2-bit codes ``x + 2 z`` (0=I, 1=X, 2=Z, 3=Y)."""
    v = np.asarray(v, dtype=np.uint8)
    n = v.shape[-1] // 2
    return v[..., :n] | (v[..., n:] << 1)


def pauli_product(p: str, q: str) -> str:
    """Product of two Pauli strings modulo phase."""
    if len(p) != len(q):
        raise ValueError("Pauli strings must have equal length")
    if set(p.upper() + q.upper()) - set(_TO_BITS):
        raise ValueError("invalid Pauli character")
    return "".join(_single_product(a, b) for a, b in zip(p.upper(), q.upper()))


def _single_product(a: str, b: str) -> str:
    if a == "I":
        return b
    if b == "I":
        return a
    if a == b:
        return "I"
    # two distinct non-identity Paulis multiply to the third, up to phase
    return ({"X", "Y", "Z"} - {a, b}).pop()
