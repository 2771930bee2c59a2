"""Scikit-learn compatible wrappers around the attention transforms.

Each transformer is stateless: ``fit`` only records the feature count, and
``transform`` maps every sample row to a probability distribution.  The
wrappers exist so the transforms plug into pipelines, grid searches and
anything else speaking the estimator protocol.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .attention import fusedmax1d_forward, tvmax_forward
from .simplex import softmax, sparsemax
from .tv import DEFAULT_MAX_ITER, DEFAULT_TOL

__all__ = [
    "SoftmaxTransformer",
    "SparsemaxTransformer",
    "FusedmaxTransformer",
    "TvmaxTransformer",
]


class _RowwiseAttention(BaseEstimator, TransformerMixin):
    """Base for stateless row-wise transforms with sklearn plumbing."""

    def fit(self, X, y=None):
        X = self._validate(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        if not hasattr(self, "n_features_in_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")
        X = self._validate(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but {type(self).__name__} "
                f"was fitted with {self.n_features_in_}"
            )
        return np.stack([self._transform_row(row) for row in X])

    @staticmethod
    def _validate(X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"expected a 2D array of samples, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X must be finite")
        return X

    def _transform_row(self, row: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SoftmaxTransformer(_RowwiseAttention):
    """Row-wise softmax."""

    def _transform_row(self, row):
        return softmax(row)


class SparsemaxTransformer(_RowwiseAttention):
    """Row-wise Euclidean projection onto the probability simplex."""

    def _transform_row(self, row):
        return sparsemax(row)


class FusedmaxTransformer(_RowwiseAttention):
    """Row-wise fusedmax: 1D TV prox along the feature axis, then sparsemax."""

    def __init__(self, lam: float = 0.01):
        self.lam = lam

    def _transform_row(self, row):
        return fusedmax1d_forward(row, self.lam).distribution


class TvmaxTransformer(_RowwiseAttention):
    """Row-wise TVmax over features laid out on a 2D grid.

    ``grid_shape`` fixes how each flat sample row maps onto the grid; its
    product must equal the feature count.
    """

    def __init__(self, grid_shape: tuple[int, int], lam: float = 0.01,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
        self.grid_shape = grid_shape
        self.lam = lam
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = self._validate(X)
        rows, cols = self.grid_shape
        if rows * cols != X.shape[1]:
            raise ValueError(
                f"grid_shape {self.grid_shape} holds {rows * cols} cells, "
                f"but X has {X.shape[1]} features"
            )
        self.n_features_in_ = X.shape[1]
        return self

    def _transform_row(self, row):
        result = tvmax_forward(
            row.reshape(self.grid_shape), self.lam, tol=self.tol, max_iter=self.max_iter
        )
        return result.distribution.ravel()
