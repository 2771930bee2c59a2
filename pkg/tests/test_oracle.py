import numpy as np
import pytest

from tvmax import (
    FusionGraph,
    OracleConfig,
    UnsupportedSizeError,
    finite_difference_jvp,
    fusedmax1d_forward,
    oracle_constrained,
    oracle_prox,
    sparsemax,
    subgradient_residual,
    tv1d_prox,
    tv2d_prox,
    tvmax_forward,
    tvmax_vjp,
)

from conftest import random_simplex_point


def _objective(p, z, graph, lam):
    return 0.5 * float(np.sum((p - z) ** 2)) + lam * graph.penalty(p)


# ---------------------------------------------------------------------------
# oracle_prox
# ---------------------------------------------------------------------------

def test_oracle_prox_lambda_zero_is_identity(rng):
    x = rng.normal(size=6)
    sol = oracle_prox(x, FusionGraph.chain(6), 0.0)
    np.testing.assert_array_equal(sol.w_star, x)


def test_oracle_prox_two_point_closed_form():
    sol = oracle_prox(np.array([1.0, 0.0]), FusionGraph.chain(2), 0.25)
    np.testing.assert_allclose(sol.w_star, [0.75, 0.25], atol=1e-6)


def test_oracle_prox_agrees_with_dykstra_on_2x2(rng):
    graph = FusionGraph.grid(2, 2)
    for lam in (0.05, 0.3):
        x = rng.normal(size=(2, 2))
        fast = tv2d_prox(x, lam, tol=1e-10, max_iter=5000)
        ref = oracle_prox(x.ravel(), graph, lam)
        np.testing.assert_allclose(fast.w_star.ravel(), ref.w_star, atol=1e-5)


def test_oracle_prox_rejects_oversized_instances(rng):
    with pytest.raises(UnsupportedSizeError):
        oracle_prox(rng.normal(size=65), FusionGraph.chain(65), 0.1)


def test_oracle_prox_respects_instance_limit_config(rng):
    cfg = OracleConfig(small_instance_limit=4)
    with pytest.raises(UnsupportedSizeError):
        oracle_prox(rng.normal(size=5), FusionGraph.chain(5), 0.1, cfg)


# ---------------------------------------------------------------------------
# oracle_constrained
# ---------------------------------------------------------------------------

def test_oracle_constrained_lambda_zero_is_sparsemax(rng):
    z = rng.normal(size=7)
    p = oracle_constrained(z, FusionGraph.chain(7), 0.0)
    np.testing.assert_allclose(p, sparsemax(z), atol=1e-6)


def test_oracle_constrained_matches_exact_chain_path(rng):
    graph = FusionGraph.chain(6)
    for lam in (0.05, 0.5):
        z = rng.normal(size=6)
        p_ref = oracle_constrained(z, graph, lam)
        p_fast = fusedmax1d_forward(z, lam).distribution
        np.testing.assert_allclose(p_ref, p_fast, atol=1e-5)


def test_oracle_constrained_matches_tvmax_on_grid(rng):
    graph = FusionGraph.grid(3, 3)
    z = rng.normal(size=(3, 3))
    p_ref = oracle_constrained(z.ravel(), graph, 0.1)
    p_fast = tvmax_forward(z, 0.1).distribution.ravel()
    np.testing.assert_allclose(p_ref, p_fast, atol=1e-5)


def test_oracle_constrained_never_loses_to_random_feasible_points(rng):
    graph = FusionGraph.grid(2, 3)
    z = rng.normal(size=6)
    lam = 0.2
    p = oracle_constrained(z, graph, lam)
    obj = _objective(p, z, graph, lam)
    for _ in range(100):
        q = random_simplex_point(rng, 6)
        assert obj <= _objective(q, z, graph, lam) + 1e-9


def test_prop1_identity_via_two_independent_solvers(rng):
    # proj(prox(z)) equals the constrained minimizer, each side certified
    for shape in [(2, 2), (3, 3), (2, 4)]:
        graph = FusionGraph.grid(*shape)
        z = rng.normal(size=shape[0] * shape[1])
        lhs = sparsemax(oracle_prox(z, graph, 0.1).w_star)
        rhs = oracle_constrained(z, graph, 0.1)
        assert np.max(np.abs(lhs - rhs)) <= 1e-5


# ---------------------------------------------------------------------------
# subgradient residual
# ---------------------------------------------------------------------------

def test_residual_vanishes_on_exact_1d_solutions(rng):
    graph = FusionGraph.chain(30)
    for lam in (0.05, 0.5, 2.0):
        x = rng.normal(size=30)
        w = tv1d_prox(x, lam).w_star
        report = subgradient_residual(x, w, graph, lam)
        assert report.kkt_residual <= 1e-10


def test_residual_positive_at_unpenalized_point(rng):
    x = rng.normal(size=8)
    x[0] += 3.0  # guarantee non-constant
    report = subgradient_residual(x, x.copy(), FusionGraph.chain(8), 0.5)
    assert report.kkt_residual > 0.0


def test_residual_grows_with_perturbation_size(rng):
    graph = FusionGraph.chain(12)
    for _ in range(5):
        x = rng.normal(size=12)
        w = tv1d_prox(x, 0.3).w_star
        direction = rng.normal(size=12)
        direction /= np.abs(direction).max()
        residuals = [
            subgradient_residual(x, w + delta * direction, graph, 0.3).kkt_residual
            for delta in (1e-6, 1e-4, 1e-2)
        ]
        assert residuals[0] <= residuals[1] <= residuals[2]


def test_residual_dual_certificate_within_box(rng):
    graph = FusionGraph.grid(4, 4)
    x = rng.normal(size=(4, 4))
    w = tv2d_prox(x, 0.3).w_star
    report = subgradient_residual(x.ravel(), w.ravel(), graph, 0.3)
    assert np.all(report.dual_certificate <= 1.0)
    assert np.all(report.dual_certificate >= -1.0)
    d = graph.differences(w.ravel())
    unfused = np.abs(d) > 1e-6
    np.testing.assert_array_equal(report.dual_certificate[unfused], np.sign(d[unfused]))


def test_residual_reports_objective_value(rng):
    x = rng.normal(size=10)
    w = tv1d_prox(x, 0.2).w_star
    graph = FusionGraph.chain(10)
    report = subgradient_residual(x, w, graph, 0.2)
    expected = 0.5 * np.sum((w - x) ** 2) + 0.2 * np.abs(np.diff(w)).sum()
    assert abs(report.objective_value - expected) < 1e-12
    assert report.feasibility_gap == 0.0


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def test_fd_jvp_zero_on_fully_fused_plateau(rng):
    z = rng.normal(size=(3, 3))
    lam = 1e4 * (1.0 + np.abs(z).max())

    def fully_fused(g):
        return tvmax_forward(g, lam).distribution

    out = finite_difference_jvp(fully_fused, z, rng.normal(size=(3, 3)), 1e-6)
    assert np.max(np.abs(out.jvp)) < 1e-6


def test_fd_jvp_zero_along_constant_shift(rng):
    z = rng.normal(size=6) * 0.05  # keep full support
    ones = np.ones(6)
    out = finite_difference_jvp(sparsemax, z, ones, 1e-6)
    assert not out.support_changed
    assert np.max(np.abs(out.jvp)) < 1e-9


def test_fd_jvp_adjoint_consistency_with_tvmax_vjp(rng):
    checked = 0
    while checked < 5:
        z = rng.normal(size=(4, 4))
        direction = rng.normal(size=(4, 4))
        dp = rng.normal(size=(4, 4))

        def fwd(g):
            return tvmax_forward(g, 0.05, tol=1e-10, max_iter=2000).distribution

        out = finite_difference_jvp(fwd, z, direction, 1e-6)
        if out.support_changed or out.partition_changed:
            continue
        result = tvmax_forward(z, 0.05, tol=1e-10, max_iter=2000)
        lhs = float(np.vdot(dp, out.jvp))
        rhs = float(np.vdot(tvmax_vjp(result, dp), direction))
        assert abs(lhs - rhs) <= 1e-4 * max(1.0, abs(lhs))
        checked += 1


def test_fd_jvp_flags_support_change():
    # one-hot flips to a different vertex across the stencil
    z = np.array([0.0, 5.0, -5.0])

    def switch(g):
        return sparsemax(np.array([g[0], -g[0], 0.0]) * 10.0)

    out = finite_difference_jvp(switch, z, np.array([1.0, 0.0, 0.0]), 0.5)
    assert out.support_changed
