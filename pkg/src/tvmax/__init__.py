"""Sparse and structured attention transforms over score grids.

Softmax, sparsemax, fusedmax (1D chains), gfusedmax (arbitrary fusion
graphs) and TVmax (2D grids): exact forward passes, closed-form
generalized Jacobians, a flood-fill backward pass, and independent
reference solvers to certify all of it.
"""

from .attention import (
    DEFAULT_FUSE_TOL,
    GroupPartition,
    TvmaxResult,
    check_group_equation,
    extract_groups,
    flood_fill_spread,
    fusedmax1d_forward,
    gfusedmax_forward,
    prox_jacobian_vjp,
    tvmax_forward,
    tvmax_vjp,
)
from .estimators import (
    FusedmaxTransformer,
    SoftmaxTransformer,
    SparsemaxTransformer,
    TvmaxTransformer,
)
from .exceptions import (
    InvalidInputError,
    InvalidParameterError,
    InvariantViolationError,
    OracleUncertifiedError,
    TvmaxError,
    UnsupportedSizeError,
)
from .graph import FusionGraph
from .oracle import (
    FiniteDifferenceJvp,
    OptimalityReport,
    OracleConfig,
    finite_difference_jvp,
    oracle_constrained,
    oracle_prox,
    subgradient_residual,
)
from .simplex import (
    SupportIndicator,
    softmax,
    softmax_vjp,
    sparsemax,
    sparsemax_support,
    sparsemax_vjp,
)
from .tv import ProxSolution, tv1d_objective, tv1d_prox, tv2d_objective, tv2d_prox

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "DEFAULT_FUSE_TOL",
    "FiniteDifferenceJvp",
    "FusedmaxTransformer",
    "FusionGraph",
    "GroupPartition",
    "InvalidInputError",
    "InvalidParameterError",
    "InvariantViolationError",
    "OptimalityReport",
    "OracleConfig",
    "OracleUncertifiedError",
    "ProxSolution",
    "SoftmaxTransformer",
    "SparsemaxTransformer",
    "SupportIndicator",
    "TvmaxError",
    "TvmaxResult",
    "TvmaxTransformer",
    "UnsupportedSizeError",
    "check_group_equation",
    "extract_groups",
    "finite_difference_jvp",
    "flood_fill_spread",
    "fusedmax1d_forward",
    "gfusedmax_forward",
    "oracle_constrained",
    "oracle_prox",
    "prox_jacobian_vjp",
    "softmax",
    "softmax_vjp",
    "sparsemax",
    "sparsemax_support",
    "sparsemax_vjp",
    "subgradient_residual",
    "tv1d_objective",
    "tv1d_prox",
    "tv2d_objective",
    "tv2d_prox",
    "tvmax_forward",
    "tvmax_vjp",
]
