"""Simplex-normalizing transformations and their vector-Jacobian products.

``softmax`` is the dense baseline; ``sparsemax`` is the Euclidean projection
onto the probability simplex and can return exact zeros.  Both act on the
flattened view of whatever array they are given and return an array of the
same shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_finite_array, check_same_shape
from .exceptions import InvariantViolationError

__all__ = [
    "SupportIndicator",
    "softmax",
    "softmax_vjp",
    "sparsemax",
    "sparsemax_support",
    "sparsemax_vjp",
]


@dataclass(frozen=True)
class SupportIndicator:
    """Zero/nonzero pattern of a probability vector.

    ``flags`` is a boolean array with the same shape as the distribution it
    was derived from; ``support_size`` counts the strictly positive entries.
    """

    flags: np.ndarray
    support_size: int


def softmax(z) -> np.ndarray:
    """Exponentiate and normalize scores into a strictly positive distribution.

    Uses max-subtraction so arbitrarily large scores cannot overflow.  The
    result is invariant under adding a constant to every score.
    """
    z = check_finite_array(z, "z")
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def softmax_vjp(p, dp) -> np.ndarray:
    """Backward pass of softmax: J^T dp = p * (dp - <p, dp>)."""
    p = check_finite_array(p, "p")
    dp = check_finite_array(dp, "dp")
    check_same_shape(p, dp, "p", "dp")
    return p * (dp - float(np.vdot(p, dp)))


def sparsemax(z) -> np.ndarray:
    """Project scores onto the probability simplex (Euclidean projection).

    The output is ``max(z - tau, 0)`` for the unique threshold ``tau`` that
    makes the entries sum to one.  Entries clipped by the max are exact
    zeros; no epsilon flooring is applied, so support detection downstream
    is an exact comparison.
    """
    z = check_finite_array(z, "z")
    flat = z.ravel()
    k = flat.size
    u = np.sort(flat)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, k + 1)
    rho = int(np.count_nonzero(u - css / ind > 0.0))
    tau = css[rho - 1] / rho
    return np.maximum(flat - tau, 0.0).reshape(z.shape)


def sparsemax_support(p) -> SupportIndicator:
    """Mark the strictly positive entries of a sparsemax output."""
    p = check_finite_array(p, "p")
    flags = p > 0.0
    return SupportIndicator(flags=flags, support_size=int(flags.sum()))


def sparsemax_vjp(p, dp) -> np.ndarray:
    """Backward pass of sparsemax.

    The generalized Jacobian at a projection ``p`` with support ``s`` is
    ``diag(s) - s s^T / |s|``; it is symmetric, so the VJP doubles as the
    JVP.  On-support coordinates receive their cotangent minus the support
    mean; off-support coordinates receive exactly zero.
    """
    p = check_finite_array(p, "p")
    dp = check_finite_array(dp, "dp")
    check_same_shape(p, dp, "p", "dp")
    s = p > 0.0
    size = int(s.sum())
    if size == 0:
        raise InvariantViolationError("sparsemax output has empty support")
    mean = float(dp[s].sum()) / size
    out = np.zeros_like(dp)
    out[s] = dp[s] - mean
    return out
