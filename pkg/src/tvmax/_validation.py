"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidInputError, InvalidParameterError


def check_finite_array(x, name: str = "x") -> np.ndarray:
    """Coerce to a float64 ndarray and reject empty or non-finite input."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.size == 0:
        raise InvalidInputError(f"{name} must contain at least one element")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite (no NaN or Inf)")
    return arr


def check_vector(x, name: str = "x") -> np.ndarray:
    arr = check_finite_array(x, name)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def check_grid(x, name: str = "x") -> np.ndarray:
    arr = check_finite_array(x, name)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional, got shape {arr.shape}")
    return arr


def check_vector_or_grid(x, name: str = "x") -> np.ndarray:
    arr = check_finite_array(x, name)
    if arr.ndim not in (1, 2):
        raise InvalidInputError(f"{name} must be 1D or 2D, got shape {arr.shape}")
    return arr


def check_lambda(lam, name: str = "lam") -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0.0:
        raise InvalidParameterError(f"{name} must be a finite nonnegative real, got {lam!r}")
    return lam


def check_positive(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise InvalidParameterError(f"{name} must be a finite positive real, got {value!r}")
    return value


def check_positive_int(value, name: str) -> int:
    ivalue = int(value)
    if ivalue < 1:
        raise InvalidParameterError(f"{name} must be a positive integer, got {value!r}")
    return ivalue


def check_same_shape(a: np.ndarray, b: np.ndarray, name_a: str, name_b: str) -> None:
    if a.shape != b.shape:
        raise InvalidInputError(
            f"{name_a} and {name_b} must share a shape, got {a.shape} vs {b.shape}"
        )
