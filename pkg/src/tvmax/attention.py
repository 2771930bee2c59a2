"""Structured sparse attention transforms and their backward passes.

The TVmax transform of a score grid is the simplex-constrained minimizer of
the squared distance plus a 2D total-variation penalty.  It factors into
the unconstrained TV prox followed by the simplex projection, which is how
the forward pass is computed here.  The generalized Jacobian of the prox is
block averaging over fused groups, so the backward pass reduces to a
sparsemax VJP followed by group-wise spreading, discovered by a single-pass
flood fill.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from ._validation import (
    check_finite_array,
    check_grid,
    check_lambda,
    check_same_shape,
    check_vector,
    check_vector_or_grid,
)
from .exceptions import InvalidInputError, InvalidParameterError
from .graph import FusionGraph
from .simplex import SupportIndicator, sparsemax, sparsemax_support, sparsemax_vjp
from .tv import DEFAULT_MAX_ITER, DEFAULT_TOL, tv1d_prox, tv2d_prox

__all__ = [
    "DEFAULT_FUSE_TOL",
    "GroupPartition",
    "TvmaxResult",
    "extract_groups",
    "tvmax_forward",
    "fusedmax1d_forward",
    "gfusedmax_forward",
    "check_group_equation",
    "prox_jacobian_vjp",
    "flood_fill_spread",
    "tvmax_vjp",
]

# Group detection tolerance on Dykstra (approximate) output; exact solves
# (1D taut string, lam = 0) use exact equality instead.
DEFAULT_FUSE_TOL = 1e-6


@dataclass(frozen=True)
class GroupPartition:
    """Partition of cells into connected constant-value fused groups.

    ``labels`` has the shape of the values it was extracted from, with
    groups numbered 0..num_groups-1 in row-major discovery order.
    """

    labels: np.ndarray
    num_groups: int
    group_sizes: np.ndarray

    @cached_property
    def group_members(self) -> list[np.ndarray]:
        """Flat cell indices of each group, ascending within a group."""
        flat = self.labels.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.cumsum(self.group_sizes)[:-1]
        return [np.sort(part) for part in np.split(order, bounds)]


@dataclass(frozen=True)
class TvmaxResult:
    """Forward-pass output with everything the backward pass needs cached."""

    distribution: np.ndarray
    prox_w_star: np.ndarray
    partition: GroupPartition
    support: SupportIndicator
    iterations: int
    residual: float
    converged: bool
    lam: float
    fuse_tol: float
    graph: FusionGraph | None = None


def extract_groups(w_star, graph: FusionGraph | None = None, fuse_tol: float = DEFAULT_FUSE_TOL) -> GroupPartition:
    """Connected components of equal-value cells.

    Adjacent cells (4-neighbor on grids, chain on vectors, or the given
    fusion graph) belong to the same group when their values differ by at
    most ``fuse_tol``; fusion is transitive along such edges.  Labels are
    assigned in row-major order of component discovery, so the partition is
    reproducible.
    """
    w = check_vector_or_grid(w_star, "w_star")
    if fuse_tol < 0.0:
        raise InvalidParameterError(f"fuse_tol must be nonnegative, got {fuse_tol!r}")
    if graph is None:
        grid = w if w.ndim == 2 else w.reshape(1, -1)
        labels, count = _kernels.label_on_grid(grid, fuse_tol)
        labels = labels.reshape(w.shape)
    else:
        flat = w.ravel()
        if graph.num_vertices != flat.size:
            raise InvalidInputError(
                f"graph has {graph.num_vertices} vertices but w_star has {flat.size} cells"
            )
        labels_flat = np.full(flat.size, -1, dtype=np.int64)
        neighbors = graph.adjacency_lists
        count = 0
        for seed in range(flat.size):
            if labels_flat[seed] >= 0:
                continue
            labels_flat[seed] = count
            stack = [seed]
            while stack:
                i = stack.pop()
                for j in neighbors[i]:
                    if labels_flat[j] < 0 and abs(flat[i] - flat[j]) <= fuse_tol:
                        labels_flat[j] = count
                        stack.append(j)
            count += 1
        labels = labels_flat.reshape(w.shape)
    sizes = np.bincount(labels.ravel(), minlength=count)
    return GroupPartition(labels=labels, num_groups=int(count), group_sizes=sizes)


def tvmax_forward(z, lam, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> TvmaxResult:
    """TVmax transform of a 2D score grid.

    Computes the 2D TV prox of ``z`` and projects the result onto the
    simplex.  With ``lam=0`` the prox is the identity and the result equals
    ``sparsemax(z)`` bit for bit.
    """
    z = check_grid(z, "z")
    lam = check_lambda(lam)
    sol = tv2d_prox(z, lam, tol=tol, max_iter=max_iter)
    fuse_tol = 0.0 if lam == 0.0 else DEFAULT_FUSE_TOL
    return _assemble_result(sol.w_star, sol.iterations, sol.residual, sol.converged, lam, fuse_tol)


def fusedmax1d_forward(z, lam) -> TvmaxResult:
    """Fusedmax of a 1D score vector: exact chain TV prox, then sparsemax."""
    z = check_vector(z, "z")
    lam = check_lambda(lam)
    sol = tv1d_prox(z, lam)
    return _assemble_result(sol.w_star, 0, 0.0, True, lam, fuse_tol=0.0)


def gfusedmax_forward(z, graph: FusionGraph, lam, cfg=None) -> TvmaxResult:
    """Generalized fusedmax over an arbitrary fusion graph.

    No fast prox exists for general edge sets, so the prox is delegated to
    the certified reference solver; instances are limited to the oracle's
    small-instance cap.
    """
    from .oracle import OracleConfig, oracle_prox

    z = check_vector(z, "z")
    lam = check_lambda(lam)
    if not isinstance(graph, FusionGraph):
        raise InvalidInputError("graph must be a FusionGraph")
    if graph.num_vertices != z.size:
        raise InvalidInputError(
            f"graph has {graph.num_vertices} vertices but z has {z.size} entries"
        )
    cfg = cfg if cfg is not None else OracleConfig()
    if lam == 0.0 or graph.num_edges == 0:
        w = z.copy()
        iterations = 0
        fuse_tol = 0.0
    else:
        sol = oracle_prox(z, graph, lam, cfg)
        w = sol.w_star
        iterations = sol.iterations
        fuse_tol = DEFAULT_FUSE_TOL
    return _assemble_result(w, iterations, 0.0, True, lam, fuse_tol, graph=graph)


def _assemble_result(w_star, iterations, residual, converged, lam, fuse_tol, graph=None) -> TvmaxResult:
    p = sparsemax(w_star)
    partition = extract_groups(w_star, graph=graph, fuse_tol=fuse_tol)
    return TvmaxResult(
        distribution=p,
        prox_w_star=w_star,
        partition=partition,
        support=sparsemax_support(p),
        iterations=iterations,
        residual=float(residual),
        converged=bool(converged),
        lam=lam,
        fuse_tol=fuse_tol,
        graph=graph,
    )


def check_group_equation(x, w_star, partition: GroupPartition, graph: FusionGraph, lam) -> float:
    """Certificate for a prox solution: group values against group means.

    Each fused group's common value must equal the mean over the group of
    the input corrected by ``lam``-weighted signs of the differences across
    the group boundary.  Returns the largest absolute deviation over all
    groups; a correct solution gives (numerically) zero.
    """
    x = check_finite_array(x, "x").ravel()
    w = check_finite_array(w_star, "w_star").ravel()
    check_same_shape(x, w, "x", "w_star")
    lam = check_lambda(lam)
    if graph.num_vertices != x.size:
        raise InvalidInputError(
            f"graph has {graph.num_vertices} vertices but x has {x.size} entries"
        )
    labels = partition.labels.ravel()
    sizes = partition.group_sizes.astype(np.float64)
    group_values = np.bincount(labels, weights=w, minlength=partition.num_groups) / sizes
    corrections = np.bincount(labels, weights=x, minlength=partition.num_groups)
    ei, ej = graph.edge_arrays
    if ei.size:
        gi = labels[ei]
        gj = labels[ej]
        cross = gi != gj
        if np.any(cross):
            sign = np.sign(w[ei[cross]] - w[ej[cross]]) * lam
            # edge (a, b): group of b gains +lam*sgn(w_a - w_b), group of a loses it
            corrections += np.bincount(gj[cross], weights=sign, minlength=partition.num_groups)
            corrections -= np.bincount(gi[cross], weights=sign, minlength=partition.num_groups)
    rhs = corrections / sizes
    return float(np.max(np.abs(group_values - rhs)))


def prox_jacobian_vjp(partition: GroupPartition, dv) -> np.ndarray:
    """Apply the prox generalized Jacobian: average ``dv`` within each group.

    The Jacobian entry is ``1/|G|`` for cells sharing a group and 0 across
    groups; it is symmetric, so this is both the VJP and the JVP.
    """
    dv = check_finite_array(dv, "dv")
    labels = partition.labels
    if dv.shape != labels.shape and dv.size != labels.size:
        raise InvalidInputError(
            f"cotangent shape {dv.shape} does not match partition shape {labels.shape}"
        )
    flat = dv.ravel()
    means = (
        np.bincount(labels.ravel(), weights=flat, minlength=partition.num_groups)
        / partition.group_sizes
    )
    return means[labels.ravel()].reshape(dv.shape)


def flood_fill_spread(values, cotangent, fuse_tol: float):
    """Single-pass flood-fill group averaging over a 2D grid.

    Returns ``(spread, visits)``; ``visits`` counts stack pops and equals
    the number of cells for every input, since cells are marked at push
    time and pushed exactly once.
    """
    values = check_grid(values, "values")
    cotangent = check_finite_array(cotangent, "cotangent")
    if cotangent.shape != values.shape:
        raise InvalidInputError(
            f"cotangent shape {cotangent.shape} does not match values shape {values.shape}"
        )
    if fuse_tol < 0.0:
        raise InvalidParameterError(f"fuse_tol must be nonnegative, got {fuse_tol!r}")
    return _kernels.spread_on_grid(values, cotangent, fuse_tol)


def tvmax_vjp(result: TvmaxResult, dp) -> np.ndarray:
    """Backward pass of TVmax / fusedmax.

    Chains the sparsemax VJP with group-wise spreading over the fused
    groups of the cached prox solution: every member of a group receives
    the group mean of the sparsemax cotangent.  Grid and chain results use
    the single-pass flood fill; graph-backed results reuse the cached
    partition directly.
    """
    dp = check_finite_array(dp, "dp")
    if dp.shape != result.distribution.shape:
        raise InvalidInputError(
            f"cotangent shape {dp.shape} does not match distribution shape "
            f"{result.distribution.shape}"
        )
    dw = sparsemax_vjp(result.distribution, dp)
    if result.graph is not None:
        return prox_jacobian_vjp(result.partition, dw)
    w = result.prox_w_star
    grid_w = w if w.ndim == 2 else w.reshape(1, -1)
    spread, _ = _kernels.spread_on_grid(grid_w, dw.reshape(grid_w.shape), result.fuse_tol)
    return spread.reshape(dp.shape)
