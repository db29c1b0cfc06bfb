"""Sparse block systems assembled from 3x3 blocks, and their solution."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from surfreg.errors import InvalidInputError, SingularSystemError

DIRECT_MAX_DIM = 50_000
RESIDUAL_RTOL = 1e-8

_BLOCK_R = np.repeat(np.arange(3), 3)
_BLOCK_C = np.tile(np.arange(3), 3)


class BlockSystem:
    """Square sparse system A u = b built by accumulating 3x3 blocks.

    Blocks are stored as COO triplets; duplicates are summed when the matrix
    is materialized.
    """

    def __init__(self, dim: int):
        if dim < 1 or dim % 3:
            raise InvalidInputError(f"dimension must be a positive multiple of 3, got {dim}")
        self.dim = int(dim)
        self.rhs = np.zeros(self.dim)
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []

    @property
    def n_blocks(self) -> int:
        return self.dim // 3

    def _check_blocks(self, *idx) -> None:
        for a in idx:
            a = np.asarray(a)
            if a.size and (a.min() < 0 or a.max() >= self.n_blocks):
                raise InvalidInputError(f"block index out of range for dimension {self.dim}")

    def add_block(self, block_row: int, block_col: int, m) -> None:
        self.add_blocks(np.array([block_row]), np.array([block_col]), np.asarray(m, dtype=float)[None])

    def add_blocks(self, block_rows, block_cols, mats) -> None:
        """Accumulate K blocks at once; mats has shape (K, 3, 3) or (3, 3) broadcast."""
        br = np.asarray(block_rows, dtype=np.int64).ravel()
        bc = np.asarray(block_cols, dtype=np.int64).ravel()
        if br.shape != bc.shape:
            raise InvalidInputError("block row/col index arrays differ in length")
        self._check_blocks(br, bc)
        mats = np.broadcast_to(np.asarray(mats, dtype=float), (len(br), 3, 3))
        self._rows.append((3 * br[:, None] + _BLOCK_R).ravel())
        self._cols.append((3 * bc[:, None] + _BLOCK_C).ravel())
        self._vals.append(mats.reshape(len(br), 9).ravel())

    def add_rhs(self, block_rows, vecs) -> None:
        br = np.asarray(block_rows, dtype=np.int64).ravel()
        self._check_blocks(br)
        vecs = np.broadcast_to(np.asarray(vecs, dtype=float), (len(br), 3))
        idx = (3 * br[:, None] + np.arange(3)).ravel()
        np.add.at(self.rhs, idx, vecs.ravel())

    def add_tikhonov(self, lam: float, blocks=None) -> None:
        """Add lam * I on the diagonal of the given blocks (all blocks if None)."""
        blocks = np.arange(self.n_blocks) if blocks is None else np.asarray(blocks, dtype=np.int64)
        if lam:
            self.add_blocks(blocks, blocks, lam * np.eye(3))

    def matrix(self) -> sp.csc_matrix:
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        A = sp.coo_matrix((vals, (rows, cols)), shape=(self.dim, self.dim)).tocsc()
        A.sum_duplicates()
        return A

    def dense(self) -> np.ndarray:
        return self.matrix().toarray()


@dataclass(frozen=True)
class SolveReport:
    solution: np.ndarray
    residual_norm: float
    method: str
    factor_time: float
    solve_time: float


def _residual_ok(res: float, b_norm: float) -> bool:
    return np.isfinite(res) and res <= RESIDUAL_RTOL * max(1.0, b_norm)


def _residual_ext(A: sp.csc_matrix, u: np.ndarray, b: np.ndarray) -> np.ndarray:
    """b - A u accumulated in extended precision (where the platform has it)."""
    cols = np.repeat(np.arange(A.shape[1]), np.diff(A.indptr))
    prod = A.data.astype(np.longdouble) * u.astype(np.longdouble)[cols]
    r = b.astype(np.longdouble)
    np.subtract.at(r, A.indices, prod)
    return r


def solve(sys: BlockSystem) -> SolveReport:
    """Solve to ||Au - b|| <= 1e-8 max(1, ||b||) or raise SingularSystemError."""
    A = sys.matrix()
    b = sys.rhs
    b_norm = float(np.linalg.norm(b))
    if sys.dim <= DIRECT_MAX_DIM:
        t0 = time.perf_counter()
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            raise SingularSystemError(str(exc)) from None
        udiag = np.abs(lu.U.diagonal())
        cond = float(udiag.max() / udiag.min()) if udiag.min() > 0 else float("inf")
        t1 = time.perf_counter()
        u = lu.solve(b)
        # refinement with extended-precision residuals recovers accuracy in
        # the weakly damped (Tikhonov-only) directions as well
        r_ext = _residual_ext(A, u, b)
        res = float(np.linalg.norm(r_ext))
        for _ in range(3):
            if res == 0.0:
                break
            u_new = u + lu.solve(r_ext.astype(float))
            r_new = _residual_ext(A, u_new, b)
            res_new = float(np.linalg.norm(r_new))
            if not res_new < res:
                break
            u, r_ext, res = u_new, r_new, res_new
        t2 = time.perf_counter()
        if not np.all(np.isfinite(u)) or not _residual_ok(res, b_norm):
            raise SingularSystemError(f"residual {res:.3e} exceeds tolerance", cond)
        return SolveReport(u, float(res), "direct", t1 - t0, t2 - t1)

    t0 = time.perf_counter()
    tol = RESIDUAL_RTOL * max(1.0, b_norm) / max(b_norm, 1e-300) * 0.5
    if abs(A - A.T).max() <= 1e-12 * max(abs(A).max(), 1.0):
        u, info = spla.cg(A, b, rtol=min(tol, 1e-10), maxiter=10 * sys.dim)
    else:
        u, info = spla.gmres(A, b, rtol=min(tol, 1e-10), restart=200, maxiter=10 * sys.dim)
    t1 = time.perf_counter()
    res = float(np.linalg.norm(A @ u - b))
    if info != 0 or not _residual_ok(res, b_norm):
        raise SingularSystemError(f"iterative solver stopped at residual {res:.3e} (info={info})")
    return SolveReport(u, res, "iterative", 0.0, t1 - t0)
