"""Input validation helpers shared by the estimators and construction routines."""

from __future__ import annotations

import numbers

import numpy as np


def check_binary_matrix(a, name: str = "matrix", *, cols: int | None = None) -> np.ndarray:
    """Return ``a`` as a 2-D ``uint8`` array of zeros and ones.

    Empty inputs are accepted and keep their column count when one is given.
    """
    arr = np.asarray(a)
    if arr.size == 0:
        ncols = cols if cols is not None else (arr.shape[1] if arr.ndim == 2 else 0)
        return np.zeros((0, ncols), dtype=np.uint8)
    if arr.ndim == 1:
        raise ValueError(f"{name} must be 2-D, got a 1-D array; reshape it with reshape(1, -1)")
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.dtype == bool:
        arr = arr.astype(np.uint8)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.isin(arr, (0, 1))):
            raise ValueError(f"{name} must contain only 0 and 1")
        arr = arr.astype(np.uint8)
    elif arr.min() < 0 or arr.max() > 1:
        raise ValueError(f"{name} must contain only 0 and 1")
    if cols is not None and arr.shape[1] != cols:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    return np.ascontiguousarray(arr, dtype=np.uint8)


def check_binary_vector(v, name: str = "vector", *, length: int | None = None) -> np.ndarray:
    arr = np.asarray(v)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValueError(f"{name} must contain only 0 and 1")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {length}")
    return np.ascontiguousarray(arr, dtype=np.uint8)


def check_syndromes(z, n_checks: int) -> tuple[np.ndarray, bool]:
    """Coerce one syndrome or a stack of syndromes to shape ``(n_samples, n_checks)``.

    Returns the 2-D array and whether the input was a single vector.
    """
    arr = np.asarray(z)
    single = arr.ndim == 1
    if single:
        arr = arr.reshape(1, -1)
    return check_binary_matrix(arr, "syndrome", cols=n_checks), single


def check_probability(p, name: str = "p", *, low: float = 0.0, high: float = 1.0,
                      open_low: bool = False, open_high: bool = False) -> float:
    if not isinstance(p, numbers.Real) or isinstance(p, bool):
        raise TypeError(f"{name} must be a real number, got {type(p).__name__}")
    p = float(p)
    lo_ok = p > low if open_low else p >= low
    hi_ok = p < high if open_high else p <= high
    if not (lo_ok and hi_ok):
        lb = "(" if open_low else "["
        rb = ")" if open_high else "]"
        raise ValueError(f"{name}={p} outside {lb}{low}, {high}{rb}")
    return p


def check_positive_int(value, name: str, *, minimum: int = 1) -> int:
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
