"""Independent reference solvers and optimality certificates.

Everything here exists to certify the fast path, so trustworthiness beats
speed.  The solvers work on the box-constrained dual of the fused-penalty
problems: a subgradient warm start locates the neighborhood of the
solution, projected-gradient batches identify which dual variables
saturate, and an exact least-squares solve on the free variables polishes
the solution to machine precision.  Every returned solution carries a
duality-gap error bound and must pass the stationarity-residual gate
before any test asserts against it; a failed gate raises instead of
silently returning a bad reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_finite_array, check_lambda, check_positive, check_vector
from .exceptions import InvalidInputError, OracleUncertifiedError, UnsupportedSizeError
from .graph import FusionGraph
from .simplex import sparsemax
from .tv import ProxSolution

__all__ = [
    "OracleConfig",
    "OptimalityReport",
    "FiniteDifferenceJvp",
    "oracle_prox",
    "oracle_constrained",
    "subgradient_residual",
    "finite_difference_jvp",
]


@dataclass
class OracleConfig:
    """Budgets and gates for the reference solvers."""

    max_iterations: int = 1_000_000
    step_scale: float = 1.0            # c in the c/sqrt(t) subgradient schedule
    tolerance: float = 1e-10           # objective stall threshold for the warm start
    small_instance_limit: int = 64
    warmup_iterations: int = 500
    refine_rounds: int = 40
    refine_batch: int = 300
    fallback_iterations: int = 50_000
    gap_tolerance: float = 1e-14       # duality-gap target, scaled by (1 + ||x||^2)
    certification_residual: float = 1e-6
    error_bound_gate: float = 5e-6     # sqrt(2 * gap) must stay below this


@dataclass(frozen=True)
class OptimalityReport:
    """Stationarity certificate for a candidate prox solution."""

    kkt_residual: float
    objective_value: float
    feasibility_gap: float
    dual_certificate: np.ndarray


@dataclass(frozen=True)
class FiniteDifferenceJvp:
    """Central-difference directional derivative plus degeneracy flags."""

    jvp: np.ndarray
    support_changed: bool
    partition_changed: bool


def _prox_objective(w, x, graph, lam):
    return 0.5 * float(np.sum((w - x) ** 2)) + lam * graph.penalty(w)


def _gap_scale(x):
    return 1.0 + float(np.sum(x * x))


def _incidence_gram(graph: FusionGraph) -> np.ndarray:
    """Gram matrix of edge-difference rows: L[e, f] = <d_e, d_f>."""
    ei, ej = graph.edge_arrays
    return (
        (ei[:, None] == ei[None, :]).astype(np.float64)
        + (ej[:, None] == ej[None, :])
        - (ei[:, None] == ej[None, :])
        - (ej[:, None] == ei[None, :])
    )


def _check_instance(x, graph, cfg):
    if graph.num_vertices != x.size:
        raise UnsupportedSizeError(
            f"graph has {graph.num_vertices} vertices but input has {x.size} entries"
        )
    if x.size > cfg.small_instance_limit:
        raise UnsupportedSizeError(
            f"instance size {x.size} exceeds the oracle limit {cfg.small_instance_limit}"
        )


# ---------------------------------------------------------------------------
# warm starts: plain (projected) subgradient descent with averaging
# ---------------------------------------------------------------------------

def _subgradient_warmup(x, graph, lam, cfg, projected: bool):
    """c/sqrt(t) subgradient steps with running averaging; returns the best iterate."""
    if projected:
        w = sparsemax(x)
    else:
        w = x.copy()
    avg = w.copy()
    best = w.copy()
    best_obj = _prox_objective(w, x, graph, lam)
    stall_obj = best_obj
    iters = min(cfg.warmup_iterations, cfg.max_iterations)
    if iters < 1:
        return best, 0
    for step_idx in range(1, iters + 1):
        d = graph.differences(w)
        g = (w - x) + lam * graph.divergence(np.sign(d))
        w = w - (cfg.step_scale / np.sqrt(step_idx)) * g
        if projected:
            w = sparsemax(w)
        avg += (w - avg) / (step_idx + 1)
        obj = _prox_objective(w, x, graph, lam)
        if obj < best_obj:
            best_obj = obj
            best = w.copy()
        if step_idx % 100 == 0:
            obj_avg = _prox_objective(avg, x, graph, lam)
            if obj_avg < best_obj:
                best_obj = obj_avg
                best = avg.copy()
            if stall_obj - best_obj < cfg.tolerance:
                break
            stall_obj = best_obj
    return best, step_idx


# ---------------------------------------------------------------------------
# unconstrained prox: exact solve on the box dual
# ---------------------------------------------------------------------------

def _prox_gap(x, graph, lam, t):
    w = x - lam * graph.divergence(t)
    d = graph.differences(w)
    return lam * float(np.sum(np.abs(d) - t * d)), w, d


def _refine_prox_dual(x, graph, lam, t, cfg, gap_target):
    """Alternate projected-gradient batches with active-set least squares."""
    L = _incidence_gram(graph)
    ei, ej = graph.edge_arrays
    dx = x[ei] - x[ej]
    lmax = max(2.0 * graph.max_degree, 1.0)
    step = 1.0 / (lam * lam * lmax)
    gap, w, d = _prox_gap(x, graph, lam, t)
    best_t, best_gap = t.copy(), gap
    used = 0

    def ls_polish(t_in, d_in, eps_active):
        t_try = t_in.copy()
        pin_hi = (t_try > 1.0 - 1e-9) & (d_in >= -eps_active)
        pin_lo = (t_try < -1.0 + 1e-9) & (d_in <= eps_active)
        t_try[pin_hi] = 1.0
        t_try[pin_lo] = -1.0
        free = ~(pin_hi | pin_lo)
        if free.any():
            pinned = ~free
            rhs = dx[free] - lam * (L[np.ix_(free, pinned)] @ t_try[pinned])
            sol, *_ = np.linalg.lstsq(lam * L[np.ix_(free, free)], rhs, rcond=None)
            t_try[free] = np.clip(sol, -1.0, 1.0)
        return t_try

    scale = np.sqrt(_gap_scale(x))
    for _ in range(cfg.refine_rounds):
        if best_gap <= gap_target:
            break
        # projected gradient batch on the dual quadratic (gradient is -lam*d)
        for _ in range(cfg.refine_batch):
            d = dx - lam * (L @ t)
            t = np.clip(t + step * lam * d, -1.0, 1.0)
        used += cfg.refine_batch
        gap, w, d = _prox_gap(x, graph, lam, t)
        if gap < best_gap:
            best_t, best_gap = t.copy(), gap
        # active-set polish at a ladder of classification tolerances
        for eps in (1e-12 * scale, 1e-9 * scale, 1e-6 * scale):
            t_try = ls_polish(t, d, eps)
            gap_try, _, _ = _prox_gap(x, graph, lam, t_try)
            if gap_try < best_gap:
                best_t, best_gap = t_try.copy(), gap_try
            if gap_try < gap:
                t, gap = t_try, gap_try
                _, _, d = _prox_gap(x, graph, lam, t)
    if best_gap > gap_target:
        # long fallback batch for stubborn instances, then one more polish
        t = best_t.copy()
        for _ in range(cfg.fallback_iterations):
            d = dx - lam * (L @ t)
            t = np.clip(t + step * lam * d, -1.0, 1.0)
        used += cfg.fallback_iterations
        gap, w, d = _prox_gap(x, graph, lam, t)
        if gap < best_gap:
            best_t, best_gap = t.copy(), gap
        for eps in (1e-12 * scale, 1e-9 * scale, 1e-6 * scale):
            t_try = ls_polish(t, d, eps)
            gap_try, _, _ = _prox_gap(x, graph, lam, t_try)
            if gap_try < best_gap:
                best_t, best_gap = t_try.copy(), gap_try
    _, w_best, _ = _prox_gap(x, graph, lam, best_t)
    return w_best, best_t, best_gap, used


def oracle_prox(x, graph: FusionGraph, lam, cfg: OracleConfig | None = None) -> ProxSolution:
    """Certified minimizer of ``0.5||w - x||^2 + lam * sum_E |w_i - w_j|``.

    A subgradient warm start is refined by an exact least-squares solve on
    the box dual; the result is accepted only if its duality-gap error
    bound and its stationarity residual both pass the certification gates.
    """
    x = check_vector(x, "x")
    lam = check_lambda(lam)
    cfg = cfg if cfg is not None else OracleConfig()
    _check_instance(x, graph, cfg)
    if lam == 0.0 or graph.num_edges == 0:
        return ProxSolution(w_star=x.copy(), iterations=0, residual=0.0, lam=lam)
    _, warm_iters = _subgradient_warmup(x, graph, lam, cfg, projected=False)
    gap_target = cfg.gap_tolerance * _gap_scale(x)
    t0 = np.zeros(graph.num_edges)
    w, t, gap, refine_iters = _refine_prox_dual(x, graph, lam, t0, cfg, gap_target)
    error_bound = float(np.sqrt(2.0 * max(gap, 0.0)))
    report = subgradient_residual(x, w, graph, lam)
    if error_bound > cfg.error_bound_gate or report.kkt_residual > cfg.certification_residual:
        raise OracleUncertifiedError(
            f"prox oracle failed certification: error bound {error_bound:.3e}, "
            f"stationarity residual {report.kkt_residual:.3e}"
        )
    return ProxSolution(
        w_star=w,
        iterations=warm_iters + refine_iters,
        residual=report.kkt_residual,
        lam=lam,
    )


# ---------------------------------------------------------------------------
# simplex-constrained problem: dual ascent with exact polish
# ---------------------------------------------------------------------------

def _constrained_gap(z, graph, lam, t):
    p = sparsemax(z - lam * graph.divergence(t))
    dp = graph.differences(p)
    return lam * float(np.sum(np.abs(dp) - t * dp)), p, dp


def _refine_constrained_dual(z, graph, lam, t, cfg, gap_target):
    L = _incidence_gram(graph)
    ei, ej = graph.edge_arrays
    dz = z[ei] - z[ej]
    lmax = max(2.0 * graph.max_degree, 1.0)
    step = 1.0 / (lam * lam * lmax)
    gap, p, dp = _constrained_gap(z, graph, lam, t)
    best_t, best_gap = t.copy(), gap
    used = 0
    scale = np.sqrt(_gap_scale(z))

    def ls_polish(t_in, p_in, dp_in, eps_active):
        t_try = t_in.copy()
        support = p_in > 0.0
        pin_hi = (t_try > 1.0 - 1e-9) & (dp_in >= -eps_active)
        pin_lo = (t_try < -1.0 + 1e-9) & (dp_in <= eps_active)
        t_try[pin_hi] = 1.0
        t_try[pin_lo] = -1.0
        # only edges inside the support propagate stationarity equations;
        # edges touching the zero set keep their (pinned or flat) duals
        free = ~(pin_hi | pin_lo) & support[ei] & support[ej]
        if free.any():
            pinned = ~free
            rhs = dz[free] - lam * (L[np.ix_(free, pinned)] @ t_try[pinned])
            sol, *_ = np.linalg.lstsq(lam * L[np.ix_(free, free)], rhs, rcond=None)
            t_try[free] = np.clip(sol, -1.0, 1.0)
        return t_try

    for _ in range(cfg.refine_rounds):
        if best_gap <= gap_target:
            break
        for _ in range(cfg.refine_batch):
            p = sparsemax(z - lam * graph.divergence(t))
            t = np.clip(t + step * lam * graph.differences(p), -1.0, 1.0)
        used += cfg.refine_batch
        gap, p, dp = _constrained_gap(z, graph, lam, t)
        if gap < best_gap:
            best_t, best_gap = t.copy(), gap
        for eps in (1e-12 * scale, 1e-9 * scale, 1e-6 * scale):
            t_try = ls_polish(t, p, dp, eps)
            gap_try, p_try, dp_try = _constrained_gap(z, graph, lam, t_try)
            if gap_try < best_gap:
                best_t, best_gap = t_try.copy(), gap_try
            if gap_try < gap:
                t, gap, p, dp = t_try, gap_try, p_try, dp_try
    if best_gap > gap_target:
        t = best_t.copy()
        for _ in range(cfg.fallback_iterations):
            p = sparsemax(z - lam * graph.divergence(t))
            t = np.clip(t + step * lam * graph.differences(p), -1.0, 1.0)
        used += cfg.fallback_iterations
        gap, p, dp = _constrained_gap(z, graph, lam, t)
        if gap < best_gap:
            best_t, best_gap = t.copy(), gap
        for eps in (1e-12 * scale, 1e-9 * scale, 1e-6 * scale):
            t_try = ls_polish(t, p, dp, eps)
            gap_try, _, _ = _constrained_gap(z, graph, lam, t_try)
            if gap_try < best_gap:
                best_t, best_gap = t_try.copy(), gap_try
    gap, p, _ = _constrained_gap(z, graph, lam, best_t)
    return p, best_t, gap, used


def oracle_constrained(z, graph: FusionGraph, lam, cfg: OracleConfig | None = None) -> np.ndarray:
    """Certified minimizer over the simplex of the fused-penalty objective.

    Projected subgradient descent (every step re-projected exactly onto the
    simplex) warm-starts a dual ascent whose iterates are always feasible;
    the returned distribution carries a duality-gap certificate and is
    rejected if the implied error bound exceeds the gate.
    """
    z = check_vector(z, "z")
    lam = check_lambda(lam)
    cfg = cfg if cfg is not None else OracleConfig()
    _check_instance(z, graph, cfg)
    if lam == 0.0 or graph.num_edges == 0:
        return sparsemax(z)
    _, warm_iters = _subgradient_warmup(z, graph, lam, cfg, projected=True)
    gap_target = cfg.gap_tolerance * _gap_scale(z)
    t0 = np.zeros(graph.num_edges)
    p, t, gap, _ = _refine_constrained_dual(z, graph, lam, t0, cfg, gap_target)
    error_bound = float(np.sqrt(2.0 * max(gap, 0.0)))
    if error_bound > cfg.error_bound_gate:
        raise OracleUncertifiedError(
            f"constrained oracle failed certification: error bound {error_bound:.3e}"
        )
    return p


# ---------------------------------------------------------------------------
# optimality residual (stationarity certificate)
# ---------------------------------------------------------------------------

def subgradient_residual(x, w, graph: FusionGraph, lam, fuse_tol: float = 1e-6) -> OptimalityReport:
    """Stationarity residual of a candidate prox solution.

    Edges whose endpoint values differ by more than ``fuse_tol`` pin their
    dual to the difference's sign; duals of fused edges are free in
    [-1, 1] and fitted by box-constrained least squares (solve, clip, then
    projected-gradient refinement).  The residual is the max absolute
    violation of ``w - x + lam * (divergence of duals) = 0``.
    """
    x = check_finite_array(x, "x").ravel()
    w = check_finite_array(w, "w").ravel()
    lam = check_lambda(lam)
    if x.size != w.size or x.size != graph.num_vertices:
        raise InvalidInputError(
            f"x ({x.size}), w ({w.size}) and graph ({graph.num_vertices} vertices) "
            "must agree in size"
        )
    objective = _prox_objective(w, x, graph, lam)
    if graph.num_edges == 0 or lam == 0.0:
        residual = float(np.max(np.abs(w - x)))
        return OptimalityReport(residual, objective, 0.0, np.zeros(graph.num_edges))
    d = graph.differences(w)
    fused = np.abs(d) <= fuse_tol
    t = np.where(fused, 0.0, np.sign(d))
    if fused.any():
        ei, ej = graph.edge_arrays
        fe_i, fe_j = ei[fused], ej[fused]
        m_free = int(fused.sum())
        A = np.zeros((x.size, m_free))
        cols = np.arange(m_free)
        np.add.at(A, (fe_i, cols), lam)
        np.add.at(A, (fe_j, cols), -lam)
        base = w - x + lam * graph.divergence(t)
        t[fused] = _fit_box_least_squares(A, base, lam, graph.max_degree)
    residual = float(np.max(np.abs(w - x + lam * graph.divergence(t))))
    return OptimalityReport(residual, objective, 0.0, t)


def _fit_box_least_squares(A, base, lam, max_degree):
    """Minimize ||A t + base||_2 over t in [-1, 1]^m.

    Alternates exact least squares on the currently free coordinates with
    bound pinning, then runs a projected-gradient cleanup at the spectral
    step size.
    """
    m = A.shape[1]
    sol, *_ = np.linalg.lstsq(A, -base, rcond=None)
    t = np.clip(sol, -1.0, 1.0)
    best_t = t.copy()
    best_res = float(np.max(np.abs(base + A @ t)))
    for _ in range(30):
        g = A.T @ (base + A @ t)
        at_hi = t >= 1.0 - 1e-12
        at_lo = t <= -1.0 + 1e-12
        pinned = (at_hi & (g <= 0.0)) | (at_lo & (g >= 0.0))
        free = ~pinned
        if not free.any():
            break
        rhs = -(base + A[:, pinned] @ t[pinned])
        sol, *_ = np.linalg.lstsq(A[:, free], rhs, rcond=None)
        t_new = t.copy()
        t_new[free] = np.clip(sol, -1.0, 1.0)
        res = float(np.max(np.abs(base + A @ t_new)))
        if res < best_res:
            best_res, best_t = res, t_new.copy()
        if np.max(np.abs(t_new - t)) < 1e-15:
            break
        t = t_new
    # spectral bound: ||A^T A|| <= lam^2 * lambda_max(edge Laplacian) <= 2 lam^2 deg
    lip = lam * lam * max(2.0 * max_degree, 1.0)
    step = 1.0 / lip
    t = best_t.copy()
    for _ in range(2000):
        r = base + A @ t
        t_next = np.clip(t - step * (A.T @ r), -1.0, 1.0)
        if np.max(np.abs(t_next - t)) < 1e-16:
            t = t_next
            break
        t = t_next
    res = float(np.max(np.abs(base + A @ t)))
    if res < best_res:
        best_t = t
    return best_t


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def finite_difference_jvp(fn, z, direction, epsilon) -> FiniteDifferenceJvp:
    """Central-difference derivative of ``fn`` along ``direction``.

    Besides the difference quotient, reports whether the support or the
    fused partition of the two evaluated outputs differ, so callers probing
    a piecewise-smooth map can resample instead of asserting across a kink.
    """
    from .attention import DEFAULT_FUSE_TOL, extract_groups

    z = check_finite_array(z, "z")
    direction = check_finite_array(direction, "direction")
    epsilon = check_positive(epsilon, "epsilon")
    f_plus = np.asarray(fn(z + epsilon * direction), dtype=np.float64)
    f_minus = np.asarray(fn(z - epsilon * direction), dtype=np.float64)
    jvp = (f_plus - f_minus) / (2.0 * epsilon)
    support_changed = bool(np.any((f_plus > 0.0) != (f_minus > 0.0)))
    part_plus = extract_groups(f_plus, fuse_tol=DEFAULT_FUSE_TOL)
    part_minus = extract_groups(f_minus, fuse_tol=DEFAULT_FUSE_TOL)
    partition_changed = part_plus.num_groups != part_minus.num_groups or not np.array_equal(
        part_plus.labels, part_minus.labels
    )
    return FiniteDifferenceJvp(
        jvp=jvp, support_changed=support_changed, partition_changed=partition_changed
    )
