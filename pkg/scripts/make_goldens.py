"""Regenerate the committed CLI golden files.

Every golden is produced through the public CLI, and the vjp golden is
cross-certified against the constrained reference solver and central
finite differences before anything is written.  Run from the repo root:

    python scripts/make_goldens.py
"""

import pathlib
import sys

import numpy as np

from tvmax import (
    FusionGraph,
    oracle_constrained,
    tvmax_forward,
    tvmax_vjp,
)
from tvmax.cli import main, read_grid

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def certify_vjp_golden(grid, cotangent, lam):
    """Refuse to freeze a vjp golden that disagrees with the oracle path."""
    graph = FusionGraph.grid(*grid.shape)
    result = tvmax_forward(grid, lam, tol=1e-10, max_iter=5000)
    reference = oracle_constrained(grid.ravel(), graph, lam)
    forward_dev = float(np.max(np.abs(result.distribution.ravel() - reference)))
    assert forward_dev <= 1e-6, f"forward deviates from certified oracle: {forward_dev:.3e}"

    vjp = tvmax_vjp(result, cotangent)
    eps = 1e-6
    k = grid.size
    fd = np.empty(k)
    for j in range(k):
        basis = np.zeros_like(grid)
        basis.flat[j] = 1.0
        p_plus = tvmax_forward(grid + eps * basis, lam, tol=1e-10, max_iter=5000).distribution
        p_minus = tvmax_forward(grid - eps * basis, lam, tol=1e-10, max_iter=5000).distribution
        fd[j] = float(np.vdot(cotangent, (p_plus - p_minus) / (2 * eps)))
    rel = np.max(np.abs(fd - vjp.ravel())) / max(np.max(np.abs(fd)), 1e-12)
    assert rel <= 1e-4, f"vjp disagrees with finite differences: rel {rel:.3e}"
    print(f"  vjp certified: forward dev {forward_dev:.2e}, fd rel err {rel:.2e}")


def run(args):
    code = main(args)
    assert code == 0, f"cli failed with exit code {code}: {args}"


def main_():
    f = str(FIXTURES)
    print("generating goldens in", f)

    run(["transform", "--input", f"{f}/grid_1x2.csv", "--transform", "tvmax",
         "--lambda", "0.25", "--output", f"{f}/golden_1x2_tvmax.json"])

    run(["transform", "--input", f"{f}/grid_3x3.csv", "--transform", "tvmax",
         "--groups", "--output", f"{f}/golden_3x3_tvmax.json",
         "--heatmap", f"{f}/golden_3x3_tvmax.pgm"])

    run(["transform", "--input", f"{f}/grid_2x2.json", "--transform", "sparsemax",
         "--output", f"{f}/golden_2x2_sparsemax.json"])

    grid = read_grid(f"{f}/grid_3x3.csv", "csv")
    cotangent = read_grid(f"{f}/cot_3x3.csv", "csv")
    certify_vjp_golden(grid, cotangent, 0.01)
    run(["vjp", "--input", f"{f}/grid_3x3.csv", "--cotangent", f"{f}/cot_3x3.csv",
         "--transform", "tvmax", "--lambda", "0.01",
         "--output", f"{f}/golden_3x3_vjp.json"])

    print("done")


if __name__ == "__main__":
    sys.exit(main_())
