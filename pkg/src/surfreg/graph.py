"""Vertex adjacency and the combinatorial graph Laplacian."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from surfreg.errors import InvalidInputError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdjacencyGraph:
    """Symmetric, loop-free neighbourhood structure over N vertices.

    ``edges`` lists every directed pair (i, k) with k in N(i), so each
    undirected edge appears twice, sorted by (i, k).
    """

    n: int
    edges: np.ndarray
    isolated: tuple = field(default=())

    @property
    def neighbors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for i, k in self.edges.tolist():
            out[i].append(k)
        return out

    @property
    def degree(self) -> np.ndarray:
        return np.bincount(self.edges[:, 0], minlength=self.n) if len(self.edges) else np.zeros(self.n, int)

    @property
    def laplacian(self) -> sp.csr_matrix:
        """L = D - Adj."""
        i, k = self.edges[:, 0], self.edges[:, 1]
        adj = sp.coo_matrix((np.ones(len(i)), (i, k)), shape=(self.n, self.n)).tocsr()
        return (sp.diags(self.degree.astype(float)) - adj).tocsr()

    def undirected_edges(self) -> np.ndarray:
        e = self.edges
        return e[e[:, 0] < e[:, 1]]

    @classmethod
    def from_edges(cls, n: int, pairs) -> AdjacencyGraph:
        """Build from undirected pairs; duplicates are merged, self-loops rejected."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if len(pairs) and (pairs.min() < 0 or pairs.max() >= n):
            raise InvalidInputError("edge index out of range")
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise InvalidInputError("self-loops are not allowed")
        both = np.concatenate([pairs, pairs[:, ::-1]])
        both = np.unique(both, axis=0) if len(both) else both.reshape(0, 2)
        deg = np.bincount(both[:, 0], minlength=n) if len(both) else np.zeros(n, int)
        isolated = tuple(int(i) for i in np.flatnonzero(deg == 0))
        return cls(int(n), both, isolated)


def build_laplacian(mesh) -> AdjacencyGraph:
    """Adjacency of a triangle mesh (undirected union of triangle edges)."""
    faces = np.asarray(mesh.faces, dtype=np.int64).reshape(-1, 3)
    n = len(mesh.vertices)
    if len(faces) == 0:
        raise InvalidInputError("mesh has no edges")
    pairs = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    g = AdjacencyGraph.from_edges(n, pairs)
    if g.isolated:
        log.warning("%d isolated vertices have an empty ARAP term", len(g.isolated))
    return g
