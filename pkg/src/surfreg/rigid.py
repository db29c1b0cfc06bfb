"""Rigid ICP driven by the joint (6 + 3N)-unknown linear system.

Each iteration freezes the closest points of the current iterate, solves for
the linearized motion (r, t) together with the intermediate points z, then
composes the exact rotation exp(skew(r)) onto the accumulated transform.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from surfreg.energy import EnergyBreakdown, RegistrationState, Weights, eval_energy, eval_gradient
from surfreg.errors import InvalidInputError
from surfreg.geomcore import RigidTransform, SmallMotion, compose, skew_batch
from surfreg.graph import AdjacencyGraph
from surfreg.spatial import KdTree, Projections, build_kdtree, estimate_normals, project_points
from surfreg.system import BlockSystem, solve

log = logging.getLogger(__name__)

R_BLOCK, T_BLOCK = 0, 1


@dataclass(frozen=True)
class RigidConfig:
    weights: Weights = field(default_factory=Weights)
    max_iters: int = 50
    stop_tol: float = 1e-6
    use_point_to_plane: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be at least 1")
        if not self.stop_tol > 0:
            raise InvalidInputError("stop_tol must be positive")
        if self.weights.w2 <= 0:
            raise InvalidInputError("rigid mode needs w2 > 0")

    def effective_weights(self) -> Weights:
        if self.use_point_to_plane:
            return self.weights
        return replace(self.weights, w4=0.0)


@dataclass(frozen=True)
class IterationReport:
    iter: int
    energies: EnergyBreakdown
    step_rot_norm: float
    step_trans_norm: float
    rmsd_to_projection: float
    # surrogate total at the null step and the gradient at the solution,
    # kept so descent and stationarity can be audited after the fact
    null_energy: float = 0.0
    grad_inf: float = 0.0


@dataclass(frozen=True)
class RegistrationResult:
    transform: RigidTransform
    final_points: np.ndarray
    reports: list
    converged: bool
    mode: str = "rigid"
    rmsd: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.reports)


@dataclass(frozen=True)
class StepResult:
    motion: SmallMotion
    z: np.ndarray
    local_rotations: Optional[np.ndarray]
    energies: EnergyBreakdown
    null_energy: float
    grad_inf: float
    projections: Projections


def vertices_of(obj) -> np.ndarray:
    v = getattr(obj, "vertices", obj)
    v = np.asarray(v, dtype=float)
    if v.ndim != 2 or v.shape[1] != 3:
        raise InvalidInputError(f"expected an (N, 3) point array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("points must be finite")
    return v


def target_tree(target, need_normals: bool) -> KdTree:
    """k-d tree over the target vertices, with normals when the plane term needs them."""
    pts = vertices_of(target)
    normals = None
    if need_normals:
        normals = getattr(target, "normals", None)
        if normals is None or len(normals) != len(pts):
            faces = getattr(target, "faces", None)
            normals = estimate_normals(pts, faces=faces if faces is not None and len(faces) else None)
    return build_kdtree(pts, normals)


def add_global_terms(sys: BlockSystem, x: np.ndarray, w: Weights, z_block0: int) -> None:
    """Rows/cols of (r, t) and their coupling to z, from w2 sum |x + r×x + t - z|^2."""
    n = len(x)
    X = skew_batch(x)
    zb = z_block0 + np.arange(n)
    eye = np.eye(3)
    sum_X = X.sum(axis=0)
    # -X X = X^T X is the positive semidefinite form
    sys.add_block(R_BLOCK, R_BLOCK, -w.w2 * np.einsum("nij,njk->ik", X, X))
    sys.add_block(R_BLOCK, T_BLOCK, w.w2 * sum_X)
    sys.add_block(T_BLOCK, R_BLOCK, -w.w2 * sum_X)
    sys.add_block(T_BLOCK, T_BLOCK, w.w2 * n * eye)
    sys.add_blocks(np.full(n, R_BLOCK), zb, -w.w2 * X)
    sys.add_blocks(zb, np.full(n, R_BLOCK), w.w2 * X)
    sys.add_blocks(np.full(n, T_BLOCK), zb, -w.w2 * eye)
    sys.add_blocks(zb, np.full(n, T_BLOCK), -w.w2 * eye)
    sys.add_blocks(zb, zb, w.w2 * eye)
    sys.add_rhs([T_BLOCK], -w.w2 * x.sum(axis=0))
    sys.add_rhs(zb, w.w2 * x)
    sys.add_tikhonov(w.tikhonov, [R_BLOCK])
    if w.regularizes_translation():
        sys.add_tikhonov(w.tikhonov, [T_BLOCK])


def add_data_terms(sys: BlockSystem, proj: Projections, w: Weights, z_block0: int, p2plane: bool) -> None:
    """Point-to-point fit w1 |P - z|^2 and point-to-plane w4 (n.(P - z))^2."""
    n = len(proj)
    zb = z_block0 + np.arange(n)
    sys.add_blocks(zb, zb, w.w1 * np.eye(3))
    sys.add_rhs(zb, w.w1 * proj.points)
    if p2plane and w.w4 > 0:
        if proj.normals is None:
            raise InvalidInputError("point-to-plane term needs target normals")
        nn = np.einsum("ni,nj->nij", proj.normals, proj.normals)
        sys.add_blocks(zb, zb, w.w4 * nn)
        sys.add_rhs(zb, w.w4 * np.einsum("nij,nj->ni", nn, proj.points))


def assemble_rigid(x, proj: Projections, w: Weights, p2plane: bool = False) -> BlockSystem:
    """System for (r, t, z_1..z_N) whose solution zeroes the surrogate gradient."""
    x = vertices_of(x)
    n = len(x)
    if n < 3:
        raise InvalidInputError("underdetermined: rigid registration needs at least 3 points")
    if w.w2 <= 0:
        raise InvalidInputError("rigid mode needs w2 > 0")
    if len(proj) != n:
        raise InvalidInputError("length mismatch between points and projections")
    sys = BlockSystem(6 + 3 * n)
    add_global_terms(sys, x, w, 2)
    add_data_terms(sys, proj, w, 2, p2plane)
    return sys


def solve_step(
    x: np.ndarray,
    proj: Projections,
    w: Weights,
    graph: Optional[AdjacencyGraph] = None,
    edge_vectors: Optional[np.ndarray] = None,
) -> StepResult:
    """Assemble, solve and evaluate one iteration for fixed projections."""
    from surfreg.arap import assemble_arap

    n = len(x)
    arap = graph is not None
    p2plane = w.w4 > 0
    if arap:
        sys = assemble_arap(x, proj, graph, w, p2plane, edge_vectors)
    else:
        sys = assemble_rigid(x, proj, w, p2plane)
    rep = solve(sys)
    g = graph if w.w3 > 0 else None
    null = RegistrationState(
        x, x, np.zeros(3), np.zeros(3), proj, np.zeros((n, 3)) if arap else None, edge_vectors if arap else None
    )
    state = null.unpack(rep.solution)
    energies = eval_energy(state, g, w)
    null_energy = eval_energy(null, g, w).e_total
    grad_inf = float(np.max(np.abs(eval_gradient(state, g, w))))
    return StepResult(
        SmallMotion(state.r, state.t),
        state.z,
        state.local_rotations,
        energies,
        null_energy,
        grad_inf,
        proj,
    )


def step_rigid(x, tree: KdTree, cfg: RigidConfig):
    """One ICP iteration: returns (motion, z, surrogate energies at the solution)."""
    x = vertices_of(x)
    res = solve_step(x, project_points(tree, x), cfg.effective_weights())
    return res.motion, res.z, res.energies


def rmsd(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


def register_rigid(source, target, cfg: Optional[RigidConfig] = None) -> RegistrationResult:
    cfg = cfg or RigidConfig()
    w = cfg.effective_weights()
    x0 = vertices_of(source)
    if len(x0) < 3:
        raise InvalidInputError("underdetermined: rigid registration needs at least 3 points")
    tree = target_tree(target, need_normals=w.w4 > 0)

    T = RigidTransform.identity()
    reports = []
    converged = False
    for it in range(1, cfg.max_iters + 1):
        x = T.apply(x0)
        proj = project_points(tree, x)
        step = solve_step(x, proj, w)
        rot, trans = float(np.linalg.norm(step.motion.r)), float(np.linalg.norm(step.motion.t))
        T = compose(step.motion.to_transform(), T)
        reports.append(
            IterationReport(it, step.energies, rot, trans, rmsd(proj.points, x), step.null_energy, step.grad_inf)
        )
        log.debug("rigid iter %d: |r|=%.3e |t|=%.3e E=%.6e", it, rot, trans, step.energies.e_total)
        if rot + trans < cfg.stop_tol:
            converged = True
            break

    final = T.apply(x0)
    final_rmsd = rmsd(project_points(tree, final).points, final)
    log.info("rigid registration: %d iterations, converged=%s, rmsd=%.3e", len(reports), converged, final_rmsd)
    return RegistrationResult(T, final, reports, converged, "rigid", final_rmsd)
