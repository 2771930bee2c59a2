import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from tvmax import (
    InvalidInputError,
    InvariantViolationError,
    softmax,
    softmax_vjp,
    sparsemax,
    sparsemax_support,
    sparsemax_vjp,
)

from conftest import brute_force_simplex_projection, random_simplex_point

score_vectors = hnp.arrays(
    np.float64,
    st.integers(min_value=1, max_value=12),
    elements=st.floats(-25.0, 25.0, allow_nan=False),
)


# ---------------------------------------------------------------------------
# softmax
# ---------------------------------------------------------------------------

def test_softmax_uniform_on_equal_scores():
    np.testing.assert_allclose(softmax([0.0, 0.0, 0.0]), [1 / 3, 1 / 3, 1 / 3], atol=1e-15)


@pytest.mark.parametrize("c", [0.0, 5.0, -3.0, 123.456])
def test_softmax_shift_and_ratio(c):
    p = softmax([c, c + np.log(2.0)])
    np.testing.assert_allclose(p, [1 / 3, 2 / 3], atol=1e-12)


def test_softmax_matches_extended_precision_evaluation():
    z = np.array([1.0, 2.0, 3.0])
    e = np.exp(np.longdouble(z))
    expected = (e / e.sum()).astype(np.float64)
    np.testing.assert_allclose(softmax(z), expected, rtol=1e-12, atol=0)


def test_softmax_handles_huge_scores():
    p = softmax([1000.0, 1000.5])
    assert np.all(np.isfinite(p))
    assert abs(p.sum() - 1.0) < 1e-12


@given(score_vectors)
@settings(deadline=None)
def test_softmax_strictly_positive_and_normalized(z):
    p = softmax(z)
    assert np.all(p > 0.0)
    assert abs(p.sum() - 1.0) <= 1e-9


def test_softmax_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        softmax([1.0, np.nan])
    with pytest.raises(InvalidInputError):
        softmax([np.inf, 0.0])


# ---------------------------------------------------------------------------
# sparsemax
# ---------------------------------------------------------------------------

def test_sparsemax_symmetry():
    np.testing.assert_allclose(sparsemax([1.0, 1.0, 1.0]), [1 / 3, 1 / 3, 1 / 3], atol=1e-15)


def test_sparsemax_one_hot_when_margin_exceeds_one():
    np.testing.assert_array_equal(sparsemax([2.0, 0.0, 0.0]), [1.0, 0.0, 0.0])


def test_sparsemax_identity_on_simplex_interior_point():
    z = np.array([0.5, 0.3, 0.2])
    np.testing.assert_allclose(sparsemax(z), z, atol=1e-12)


def test_sparsemax_matches_brute_force_projection(rng):
    for _ in range(25):
        z = rng.normal(size=10)
        expected = brute_force_simplex_projection(z)
        np.testing.assert_allclose(sparsemax(z), expected, atol=1e-8)


@given(score_vectors)
@settings(deadline=None)
def test_sparsemax_output_in_simplex(z):
    p = sparsemax(z)
    assert np.all(p >= 0.0)
    assert abs(p.sum() - 1.0) <= 1e-9


@given(score_vectors, st.floats(-30.0, 30.0, allow_nan=False))
@settings(deadline=None)
def test_sparsemax_shift_invariance(z, c):
    p = sparsemax(z)
    q = sparsemax(z + c)
    assert np.array_equal(p > 0, q > 0)
    np.testing.assert_allclose(p, q, atol=1e-12)


@given(score_vectors)
@settings(deadline=None)
def test_sparsemax_permutation_equivariance(z):
    perm = np.random.default_rng(0).permutation(z.size)
    np.testing.assert_array_equal(sparsemax(z)[perm], sparsemax(z[perm]))


def test_sparsemax_projection_optimality(rng):
    for _ in range(20):
        k = int(rng.integers(2, 9))
        z = rng.normal(size=k) * 2.0
        p = sparsemax(z)
        d_star = np.sum((p - z) ** 2)
        for _ in range(50):
            q = random_simplex_point(rng, k)
            assert d_star <= np.sum((q - z) ** 2) + 1e-12


def test_sparsemax_preserves_shape():
    z = np.arange(6.0).reshape(2, 3)
    p = sparsemax(z)
    assert p.shape == (2, 3)
    np.testing.assert_array_equal(p.ravel(), sparsemax(z.ravel()))


# ---------------------------------------------------------------------------
# support indicator
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "p, flags, size",
    [
        ([1.0, 0.0, 0.0], [True, False, False], 1),
        ([1 / 3, 1 / 3, 1 / 3], [True, True, True], 3),
        ([0.75, 0.25, 0.0], [True, True, False], 2),
    ],
)
def test_sparsemax_support_cases(p, flags, size):
    support = sparsemax_support(np.asarray(p))
    np.testing.assert_array_equal(support.flags, flags)
    assert support.support_size == size


# ---------------------------------------------------------------------------
# sparsemax VJP
# ---------------------------------------------------------------------------

def test_sparsemax_vjp_one_hot_kills_gradient():
    out = sparsemax_vjp(np.array([1.0, 0.0, 0.0]), np.array([5.0, 7.0, 9.0]))
    np.testing.assert_array_equal(out, [0.0, 0.0, 0.0])


def test_sparsemax_vjp_subtracts_support_mean():
    out = sparsemax_vjp(np.array([1 / 3, 1 / 3, 1 / 3]), np.array([3.0, 0.0, 0.0]))
    np.testing.assert_allclose(out, [2.0, -1.0, -1.0], atol=1e-15)


def test_sparsemax_vjp_self_adjoint(rng):
    for _ in range(20):
        z = rng.normal(size=8)
        p = sparsemax(z)
        u = rng.normal(size=8)
        v = rng.normal(size=8)
        lhs = float(np.dot(sparsemax_vjp(p, u), v))
        rhs = float(np.dot(u, sparsemax_vjp(p, v)))
        assert abs(lhs - rhs) < 1e-12


def test_sparsemax_vjp_matches_finite_differences(rng):
    eps = 1e-6
    checked = 0
    while checked < 15:
        z = rng.normal(size=6)
        p = sparsemax(z)
        direction = rng.normal(size=6)
        p_plus = sparsemax(z + eps * direction)
        p_minus = sparsemax(z - eps * direction)
        if not np.array_equal(p_plus > 0, p_minus > 0):
            continue  # support changed across the stencil: resample
        fd = (p_plus - p_minus) / (2.0 * eps)
        jvp = sparsemax_vjp(p, direction)  # symmetric Jacobian: VJP == JVP
        denom = max(float(np.max(np.abs(fd))), 1e-12)
        assert np.max(np.abs(fd - jvp)) / denom < 1e-5
        checked += 1


def test_sparsemax_vjp_rejects_empty_support():
    with pytest.raises(InvariantViolationError):
        sparsemax_vjp(np.zeros(3), np.ones(3))


def test_softmax_vjp_matches_finite_differences(rng):
    eps = 1e-7
    for _ in range(10):
        z = rng.normal(size=5)
        p = softmax(z)
        direction = rng.normal(size=5)
        fd = (softmax(z + eps * direction) - softmax(z - eps * direction)) / (2 * eps)
        jvp = softmax_vjp(p, direction)  # softmax Jacobian is symmetric too
        assert np.max(np.abs(fd - jvp)) < 1e-6
