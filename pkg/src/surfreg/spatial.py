"""Closest-point queries: k-d tree, projection onto the target, normals."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from surfreg.errors import DegenerateNormalError, InvalidInputError

LEAF_SIZE = 8


@dataclass(frozen=True)
class Projection:
    point: np.ndarray
    index: int
    normal: Optional[np.ndarray]
    distance: float


@dataclass(frozen=True)
class Projections:
    """Batched projections of N query points (row i belongs to query i)."""

    points: np.ndarray
    indices: np.ndarray
    distances: np.ndarray
    normals: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.indices)

    def __getitem__(self, i: int) -> Projection:
        n = None if self.normals is None else self.normals[i]
        return Projection(self.points[i], int(self.indices[i]), n, float(self.distances[i]))


class KdTree:
    """Static k-d tree over a point array.

    Splits on the axis of largest extent at the median; leaves hold at most
    ``LEAF_SIZE`` points. Queries are exact, and among equidistant points the
    lowest index wins.
    """

    def __init__(self, points, normals=None):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidInputError("points must have shape (N, 3)")
        if len(pts) == 0:
            raise InvalidInputError("empty target")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("target points must be finite")
        if normals is not None:
            normals = np.array(normals, dtype=float)
            if normals.shape != pts.shape:
                raise InvalidInputError("normals must match points in shape")
            normals.flags.writeable = False
        pts.flags.writeable = False
        self.points = pts
        self.normals = normals
        self._coords = pts.tolist()
        # node arrays; leaves have axis == -1 and store [lo, hi) into _order
        self._axis: list[int] = []
        self._split: list[float] = []
        self._left: list[int] = []
        self._right: list[int] = []
        self._order: list[int] = []
        self._build(np.arange(len(pts)))

    def __len__(self) -> int:
        return len(self.points)

    def _new_node(self) -> int:
        self._axis.append(-1)
        self._split.append(0.0)
        self._left.append(-1)
        self._right.append(-1)
        return len(self._axis) - 1

    def _build(self, root_idx: np.ndarray) -> None:
        stack = [(self._new_node(), root_idx)]
        while stack:
            node, idx = stack.pop()
            if len(idx) <= LEAF_SIZE:
                lo = len(self._order)
                self._order.extend(int(i) for i in idx)
                self._left[node] = lo
                self._right[node] = len(self._order)
                continue
            sub = self.points[idx]
            axis = int(np.argmax(sub.max(axis=0) - sub.min(axis=0)))
            srt = idx[np.argsort(sub[:, axis], kind="stable")]
            mid = len(srt) // 2
            self._axis[node] = axis
            self._split[node] = float(self.points[srt[mid], axis])
            left, right = self._new_node(), self._new_node()
            self._left[node] = left
            self._right[node] = right
            stack.append((right, srt[mid:]))
            stack.append((left, srt[:mid]))

    def nearest(self, q) -> tuple[int, float]:
        """Index of and squared distance to the nearest point."""
        qx, qy, qz = (float(c) for c in q)
        qs = (qx, qy, qz)
        coords, order = self._coords, self._order
        axis_, split_, left_, right_ = self._axis, self._split, self._left, self._right
        best_d2 = math.inf
        best_i = -1
        stack = [(0, 0.0)]
        while stack:
            node, bound = stack.pop()
            if bound > best_d2:
                continue
            a = axis_[node]
            if a < 0:
                for j in range(left_[node], right_[node]):
                    i = order[j]
                    p = coords[i]
                    dx = qx - p[0]
                    dy = qy - p[1]
                    dz = qz - p[2]
                    d2 = dx * dx + dy * dy + dz * dz
                    if d2 < best_d2 or (d2 == best_d2 and i < best_i):
                        best_d2 = d2
                        best_i = i
                continue
            diff = qs[a] - split_[node]
            if diff < 0.0:
                near, far = left_[node], right_[node]
            else:
                near, far = right_[node], left_[node]
            stack.append((far, diff * diff))
            stack.append((near, bound))
        return best_i, best_d2

    def nearest_k(self, q, k: int) -> list[int]:
        """Indices of the k nearest points, closest first (ties by index)."""
        k = min(int(k), len(self.points))
        qx, qy, qz = (float(c) for c in q)
        qs = (qx, qy, qz)
        coords, order = self._coords, self._order
        # max-heap on (d2, index) via negation
        heap: list[tuple[float, int]] = []
        stack = [(0, 0.0)]
        while stack:
            node, bound = stack.pop()
            if len(heap) == k and bound > -heap[0][0]:
                continue
            a = self._axis[node]
            if a < 0:
                for j in range(self._left[node], self._right[node]):
                    i = order[j]
                    p = coords[i]
                    dx = qx - p[0]
                    dy = qy - p[1]
                    dz = qz - p[2]
                    d2 = dx * dx + dy * dy + dz * dz
                    item = (-d2, -i)
                    if len(heap) < k:
                        heapq.heappush(heap, item)
                    elif item > heap[0]:
                        heapq.heapreplace(heap, item)
                continue
            diff = qs[a] - self._split[node]
            if diff < 0.0:
                near, far = self._left[node], self._right[node]
            else:
                near, far = self._right[node], self._left[node]
            stack.append((far, diff * diff))
            stack.append((near, bound))
        return [-i for _, i in sorted(heap, reverse=True)]

    def nearest_all(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """Nearest indices and squared distances for an (M, 3) query array."""
        q = np.asarray(queries, dtype=float)
        idx = np.empty(len(q), dtype=np.int64)
        d2 = np.empty(len(q))
        for m, row in enumerate(q.tolist()):
            idx[m], d2[m] = self.nearest(row)
        return idx, d2


def build_kdtree(points, normals=None) -> KdTree:
    return KdTree(points, normals)


def project(tree: KdTree, q) -> Projection:
    """Closest target vertex to q."""
    i, d2 = tree.nearest(q)
    n = None if tree.normals is None else tree.normals[i].copy()
    return Projection(tree.points[i].copy(), i, n, math.sqrt(d2))


def project_points(tree: KdTree, queries) -> Projections:
    idx, d2 = tree.nearest_all(queries)
    normals = None if tree.normals is None else tree.normals[idx]
    return Projections(tree.points[idx], idx, np.sqrt(d2), normals)


def face_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    f = np.asarray(faces, dtype=np.int64)
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    lens = np.linalg.norm(n, axis=1, keepdims=True)
    return np.divide(n, lens, out=np.zeros_like(n), where=lens > 0)


def estimate_normals(points, k: int = 8, faces=None) -> np.ndarray:
    """Unit per-point normals.

    With faces: normalized sum of the unit normals of incident triangles.
    Without: PCA over the k nearest neighbours, oriented by breadth-first
    propagation from the highest point (whose normal is made to point up).
    """
    pts = np.asarray(points, dtype=float)
    n_pts = len(pts)
    if faces is not None and len(faces) > 0:
        f = np.asarray(faces, dtype=np.int64)
        fn = face_normals(pts, f)
        acc = np.zeros_like(pts)
        for c in range(3):
            np.add.at(acc, f[:, c], fn)
        lens = np.linalg.norm(acc, axis=1)
        bad = np.flatnonzero(lens < 1e-12)
        if len(bad):
            raise DegenerateNormalError(int(bad[0]))
        return acc / lens[:, None]

    if k < 3:
        raise InvalidInputError("k must be at least 3 for PCA normals")
    tree = KdTree(pts)
    nbrs = [tree.nearest_k(p, k) for p in pts.tolist()]
    normals = np.empty_like(pts)
    for i, nb in enumerate(nbrs):
        local = pts[nb] - pts[nb].mean(axis=0)
        evals, evecs = np.linalg.eigh(local.T @ local)
        if evals[1] <= 1e-12 * max(evals[2], 1e-300):
            raise DegenerateNormalError(i)
        normals[i] = evecs[:, 0]

    seed = int(np.argmax(pts[:, 2]))
    if normals[seed, 2] < 0:
        normals[seed] = -normals[seed]
    seen = np.zeros(n_pts, dtype=bool)
    # repeat for components the kNN graph does not reach
    for start in [seed] + list(range(n_pts)):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in nbrs[i]:
                if not seen[j]:
                    seen[j] = True
                    if normals[j] @ normals[i] < 0:
                        normals[j] = -normals[j]
                    queue.append(j)
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)
