"""Undirected fusion graphs for generalized fused penalties.

A :class:`FusionGraph` fixes the edge set ``E`` of the penalty
``sum_{(i,j) in E} |w_i - w_j|``.  Edges are stored as ordered pairs
``(i, j)`` with ``i < j`` in a canonical sorted order so that everything
built on top of a graph is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import InvalidInputError

__all__ = ["FusionGraph"]


@dataclass(frozen=True)
class FusionGraph:
    num_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        k = self.num_vertices
        if k < 1:
            raise InvalidInputError("graph needs at least one vertex")
        seen = set()
        canonical = []
        for edge in self.edges:
            i, j = int(edge[0]), int(edge[1])
            if i == j:
                raise InvalidInputError(f"self-loop ({i}, {j}) is not allowed")
            if not (0 <= i < j < k):
                raise InvalidInputError(f"edge ({i}, {j}) must satisfy 0 <= i < j < {k}")
            if (i, j) in seen:
                raise InvalidInputError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            canonical.append((i, j))
        canonical.sort()
        object.__setattr__(self, "edges", tuple(canonical))

    @classmethod
    def chain(cls, k: int) -> "FusionGraph":
        """Path graph 0-1-2-...-(k-1); the 1D total-variation edge set."""
        return cls(k, tuple((i, i + 1) for i in range(int(k) - 1)))

    @classmethod
    def grid(cls, rows: int, cols: int) -> "FusionGraph":
        """4-neighbor grid graph on row-major indices; the 2D TV edge set."""
        rows, cols = int(rows), int(cols)
        edges = []
        for r in range(rows):
            for c in range(cols):
                idx = r * cols + c
                if c + 1 < cols:
                    edges.append((idx, idx + 1))
                if r + 1 < rows:
                    edges.append((idx, idx + cols))
        return cls(rows * cols, tuple(edges))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint index arrays (heads, tails) with heads < tails."""
        if not self.edges:
            empty = np.empty(0, dtype=np.intp)
            return empty, empty.copy()
        arr = np.asarray(self.edges, dtype=np.intp)
        return arr[:, 0].copy(), arr[:, 1].copy()

    @cached_property
    def max_degree(self) -> int:
        ei, ej = self.edge_arrays
        if ei.size == 0:
            return 0
        counts = np.bincount(ei, minlength=self.num_vertices) + np.bincount(
            ej, minlength=self.num_vertices
        )
        return int(counts.max())

    @cached_property
    def adjacency_lists(self) -> list[list[int]]:
        neighbors: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for i, j in self.edges:
            neighbors[i].append(j)
            neighbors[j].append(i)
        return neighbors

    def differences(self, w: np.ndarray) -> np.ndarray:
        """Per-edge differences ``w_i - w_j``, one entry per edge."""
        ei, ej = self.edge_arrays
        w = np.asarray(w, dtype=np.float64).ravel()
        return w[ei] - w[ej]

    def divergence(self, t: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`differences`: vertex i gets +t over edges (i, j), -t over (j, i)."""
        ei, ej = self.edge_arrays
        t = np.asarray(t, dtype=np.float64)
        return np.bincount(ei, weights=t, minlength=self.num_vertices) - np.bincount(
            ej, weights=t, minlength=self.num_vertices
        )

    def penalty(self, w: np.ndarray) -> float:
        """Value of the generalized fused penalty at ``w``."""
        if not self.edges:
            return 0.0
        return float(np.abs(self.differences(w)).sum())
