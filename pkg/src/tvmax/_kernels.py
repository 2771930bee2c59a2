"""Scalar kernels shared by the pure-Python and numba execution paths.

Each kernel body is written against plain indexing and arithmetic only, so
the exact same code runs either on Python lists (fallback) or compiled by
numba on ndarrays (when numba is importable).  Both paths perform the same
floating-point operations in the same order, so results are bitwise
identical.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None
    HAVE_NUMBA = False


def _tv1d_kernel(y, lam, w, n):
    """Exact prox of lam * sum|w_{i+1} - w_i| plus 0.5||w - y||^2.

    Taut-string construction: the solution's running sums trace the
    shortest path through a tube of half-width ``lam`` around the running
    sums of ``y``, pinned at both ends.  The scan keeps two candidate
    constant slopes, ``lo`` hugging the tube floor and ``hi`` hugging the
    ceiling, with heights tracked relative to the tube center.  When even
    the lowest (highest) feasible line leaves the tube, a segment is fixed
    at the last touch point and the scan restarts there.  Runs in O(n).
    """
    if n == 1:
        w[0] = y[0]
        return
    last = -1              # last index already written out
    i = 0
    lo = y[0] - lam        # lower-string candidate slope
    hi = y[0] + lam        # upper-string candidate slope
    h_lo = 0.0             # heights before absorbing index i
    h_hi = 0.0
    lo_touch = 0           # last index where each line touched its bound
    hi_touch = 0
    while i < n:
        if i < n - 1:
            h_lo += lo - y[i]
            if h_lo > lam:
                # lower line exits through the ceiling: fix segment at lo_touch
                for j in range(last + 1, lo_touch + 1):
                    w[j] = lo
                last = lo_touch
                i = lo_touch + 1
                lo = y[i]
                hi = y[i] + 2.0 * lam
                h_lo = -lam            # restart on the tube floor
                h_hi = -lam
                lo_touch = i
                hi_touch = i
                continue
            h_hi += hi - y[i]
            if h_hi < -lam:
                # upper line exits through the floor: fix segment at hi_touch
                for j in range(last + 1, hi_touch + 1):
                    w[j] = hi
                last = hi_touch
                i = hi_touch + 1
                hi = y[i]
                lo = y[i] - 2.0 * lam
                h_lo = lam             # restart on the tube ceiling
                h_hi = lam
                lo_touch = i
                hi_touch = i
                continue
            if h_lo < -lam:
                lo += (-lam - h_lo) / (i - last)
                h_lo = -lam
                lo_touch = i
            if h_hi > lam:
                hi += (lam - h_hi) / (i - last)
                h_hi = lam
                hi_touch = i
            i += 1
        else:
            # final sample: the tube pinches to its center line
            h_lo += lo - y[i]
            if h_lo > 0.0:
                for j in range(last + 1, lo_touch + 1):
                    w[j] = lo
                last = lo_touch
                i = lo_touch + 1
                lo = y[i]
                hi = y[i] + 2.0 * lam
                h_lo = -lam
                h_hi = -lam
                lo_touch = i
                hi_touch = i
                continue
            h_hi += hi - y[i]
            if h_hi < 0.0:
                for j in range(last + 1, hi_touch + 1):
                    w[j] = hi
                last = hi_touch
                i = hi_touch + 1
                hi = y[i]
                lo = y[i] - 2.0 * lam
                h_lo = lam
                h_hi = lam
                lo_touch = i
                hi_touch = i
                continue
            lo += -h_lo / (i - last)   # close exactly on the pin
            break
    for j in range(last + 1, n):
        w[j] = lo


def _spread_kernel(grad, mask, width, k, out, seen, stack, members):
    """Average ``grad`` over fused groups, visiting every cell exactly once.

    ``mask`` packs per-cell fusion bits (1 right, 2 left, 4 down, 8 up).
    Cells are marked seen when pushed, so each is pushed and popped once;
    the returned count of pops equals ``k`` by construction.
    """
    visits = 0
    for seed in range(k):
        if seen[seed] != 0:
            continue
        seen[seed] = 1
        stack[0] = seed
        top = 1
        count = 0
        total = 0.0
        while top > 0:
            top -= 1
            i = stack[top]
            visits += 1
            total += grad[i]
            members[count] = i
            count += 1
            m = mask[i]
            if m & 1:
                j = i + 1
                if seen[j] == 0:
                    seen[j] = 1
                    stack[top] = j
                    top += 1
            if m & 2:
                j = i - 1
                if seen[j] == 0:
                    seen[j] = 1
                    stack[top] = j
                    top += 1
            if m & 4:
                j = i + width
                if seen[j] == 0:
                    seen[j] = 1
                    stack[top] = j
                    top += 1
            if m & 8:
                j = i - width
                if seen[j] == 0:
                    seen[j] = 1
                    stack[top] = j
                    top += 1
        mean = total / count
        for c in range(count):
            out[members[c]] = mean
    return visits


def _label_kernel(mask, width, k, labels, stack):
    """Label fused connected components in row-major discovery order."""
    next_label = 0
    for seed in range(k):
        if labels[seed] >= 0:
            continue
        labels[seed] = next_label
        stack[0] = seed
        top = 1
        while top > 0:
            top -= 1
            i = stack[top]
            m = mask[i]
            if m & 1:
                j = i + 1
                if labels[j] < 0:
                    labels[j] = next_label
                    stack[top] = j
                    top += 1
            if m & 2:
                j = i - 1
                if labels[j] < 0:
                    labels[j] = next_label
                    stack[top] = j
                    top += 1
            if m & 4:
                j = i + width
                if labels[j] < 0:
                    labels[j] = next_label
                    stack[top] = j
                    top += 1
            if m & 8:
                j = i - width
                if labels[j] < 0:
                    labels[j] = next_label
                    stack[top] = j
                    top += 1
        next_label += 1
    return next_label


if HAVE_NUMBA:
    _tv1d_jit = njit(cache=True)(_tv1d_kernel)
    _spread_jit = njit(cache=True)(_spread_kernel)
    _label_jit = njit(cache=True)(_label_kernel)

    @njit(cache=True)
    def _tv1d_rows_jit(mat, lam, out):
        for r in range(mat.shape[0]):
            _tv1d_jit(mat[r], lam, out[r], mat.shape[1])


def tv1d_values(y: np.ndarray, lam: float) -> np.ndarray:
    """Exact 1D total-variation prox values for a single signal."""
    n = y.size
    if n == 1 or lam == 0.0:
        return y.copy()
    w = np.empty(n, dtype=np.float64)
    if HAVE_NUMBA:
        _tv1d_jit(np.ascontiguousarray(y), lam, w, n)
    else:
        buf = [0.0] * n
        _tv1d_kernel(y.tolist(), lam, buf, n)
        w[:] = buf
    return w


def tv1d_rows(mat: np.ndarray, lam: float) -> np.ndarray:
    """Apply the 1D TV prox independently to every row of ``mat``."""
    out = np.empty_like(mat)
    if mat.shape[1] == 1 or lam == 0.0:
        out[:] = mat
        return out
    if HAVE_NUMBA:
        _tv1d_rows_jit(np.ascontiguousarray(mat), lam, out)
    else:
        n = mat.shape[1]
        buf = [0.0] * n
        for r in range(mat.shape[0]):
            _tv1d_kernel(mat[r].tolist(), lam, buf, n)
            out[r] = buf
    return out


def tv1d_cols(mat: np.ndarray, lam: float) -> np.ndarray:
    """Apply the 1D TV prox independently to every column of ``mat``."""
    return tv1d_rows(np.ascontiguousarray(mat.T), lam).T.copy()


def grid_fuse_mask(values: np.ndarray, fuse_tol: float) -> np.ndarray:
    """Packed 4-neighbor fusion bits for a 2D value grid (flat uint8)."""
    a, b = values.shape
    right = np.zeros((a, b), dtype=np.uint8)
    down = np.zeros((a, b), dtype=np.uint8)
    if b > 1:
        right[:, :-1] = np.abs(values[:, 1:] - values[:, :-1]) <= fuse_tol
    if a > 1:
        down[:-1, :] = np.abs(values[1:, :] - values[:-1, :]) <= fuse_tol
    left = np.zeros((a, b), dtype=np.uint8)
    up = np.zeros((a, b), dtype=np.uint8)
    left[:, 1:] = right[:, :-1]
    up[1:, :] = down[:-1, :]
    mask = right | (left << 1) | (down << 2) | (up << 3)
    return mask.ravel()


def spread_on_grid(values: np.ndarray, grad: np.ndarray, fuse_tol: float):
    """Group-average ``grad`` over fused components of ``values``.

    Returns ``(out, visits)`` where ``visits`` counts flood-fill pops and
    always equals the cell count.
    """
    a, b = values.shape
    k = a * b
    mask = grid_fuse_mask(values, fuse_tol)
    out = np.empty(k, dtype=np.float64)
    if HAVE_NUMBA:
        seen = np.zeros(k, dtype=np.uint8)
        stack = np.empty(k, dtype=np.int64)
        members = np.empty(k, dtype=np.int64)
        visits = _spread_jit(grad.ravel(), mask, b, k, out, seen, stack, members)
    else:
        buf = [0.0] * k
        visits = _spread_kernel(
            grad.ravel().tolist(), mask.tolist(), b, k, buf,
            bytearray(k), [0] * k, [0] * k,
        )
        out[:] = buf
    return out.reshape(a, b), int(visits)


def label_on_grid(values: np.ndarray, fuse_tol: float):
    """Connected fused-component labels for a 2D grid; returns (labels, count)."""
    a, b = values.shape
    k = a * b
    mask = grid_fuse_mask(values, fuse_tol)
    labels = np.full(k, -1, dtype=np.int64)
    if HAVE_NUMBA:
        stack = np.empty(k, dtype=np.int64)
        count = _label_jit(mask, b, k, labels, stack)
    else:
        buf = [-1] * k
        count = _label_kernel(mask.tolist(), b, k, buf, [0] * k)
        labels[:] = buf
    return labels.reshape(a, b), int(count)
