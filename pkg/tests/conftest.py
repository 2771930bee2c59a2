import itertools

import numpy as np
import pytest

FIXTURE_SIZES = [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4), (4, 5), (5, 5), (2, 5), (5, 2), (3, 5)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240831)


def brute_force_simplex_projection(z: np.ndarray) -> np.ndarray:
    """Exact projection onto the simplex by support enumeration.

    For every candidate support S the KKT solution is z_S shifted to sum
    to one; the feasible candidate closest to z is the projection.  This
    is exponential in k and entirely independent of the sort-based path.
    """
    k = z.size
    best = None
    best_dist = np.inf
    for r in range(1, k + 1):
        for support in itertools.combinations(range(k), r):
            idx = list(support)
            shift = (z[idx].sum() - 1.0) / r
            candidate = np.zeros(k)
            candidate[idx] = z[idx] - shift
            if np.any(candidate[idx] <= 0.0):
                continue
            dist = float(np.sum((candidate - z) ** 2))
            if dist < best_dist:
                best_dist = dist
                best = candidate
    return best


def random_simplex_point(gen: np.random.Generator, k: int) -> np.ndarray:
    q = gen.exponential(size=k)
    return q / q.sum()
