"""As-rigid-as-possible registration with the (6 + 6N)-unknown system.

Besides the global motion, every vertex carries a linearized local rotation
r_j, and edges (x_k - x_j) are asked to move rigidly under it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from surfreg.energy import Weights
from surfreg.errors import InvalidInputError
from surfreg.geomcore import RigidTransform, compose, rotations_from_small, skew_batch
from surfreg.graph import AdjacencyGraph, build_laplacian
from surfreg.rigid import (
    IterationReport,
    RegistrationResult,
    add_data_terms,
    add_global_terms,
    rmsd,
    solve_step,
    target_tree,
    vertices_of,
)
from surfreg.spatial import Projections, project_points
from surfreg.system import BlockSystem

log = logging.getLogger(__name__)

__all__ = ["ArapConfig", "AdjacencyGraph", "assemble_arap", "build_laplacian", "register_arap", "edge_distortion"]


@dataclass(frozen=True)
class ArapConfig:
    weights: Weights = field(default_factory=lambda: Weights(w3=1.0))
    max_iters: int = 100
    stop_tol: float = 1e-6
    use_point_to_plane: bool = False

    def __post_init__(self):
        if self.weights.w3 <= 0:
            raise InvalidInputError("ARAP mode needs w3 > 0")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be at least 1")
        if not self.stop_tol > 0:
            raise InvalidInputError("stop_tol must be positive")

    def effective_weights(self) -> Weights:
        if self.use_point_to_plane:
            return self.weights
        return replace(self.weights, w4=0.0)


def assemble_arap(
    x,
    proj: Projections,
    graph: AdjacencyGraph,
    w: Weights,
    p2plane: bool = False,
    edge_vectors: Optional[np.ndarray] = None,
) -> BlockSystem:
    """System for (r, t, r_1..r_N, z_1..z_N).

    Each directed edge (i, k) contributes the residual e + r_i×e - (z_k - z_i)
    with e = x_k - x_i unless ``edge_vectors`` overrides it. With symmetric
    adjacency the z_j rows pick up the 2 w3 L coupling and both r_j and r_k.
    """
    x = vertices_of(x)
    n = len(x)
    if graph.n != n:
        raise InvalidInputError(f"graph has {graph.n} nodes but there are {n} points")
    if len(proj) != n:
        raise InvalidInputError("length mismatch between points and projections")
    if w.w3 <= 0:
        raise InvalidInputError("ARAP mode needs w3 > 0")
    sys = BlockSystem(6 + 6 * n)
    rb0, zb0 = 2, 2 + n
    if w.w2 > 0:
        add_global_terms(sys, x, w, zb0)
    else:
        # global unknowns are otherwise unconstrained
        sys.add_tikhonov(w.tikhonov, [0, 1])
    add_data_terms(sys, proj, w, zb0, p2plane)
    sys.add_tikhonov(w.tikhonov, rb0 + np.arange(n))

    if len(graph.edges):
        i, k = graph.edges[:, 0], graph.edges[:, 1]
        e = x[k] - x[i] if edge_vectors is None else np.asarray(edge_vectors, dtype=float)
        if e.shape != (len(graph.edges), 3):
            raise InvalidInputError("edge_vectors must have one row per directed edge")
        E = skew_batch(e)
        w3 = w.w3
        eye = np.eye(3)
        ri, zi, zk = rb0 + i, zb0 + i, zb0 + k
        sys.add_blocks(ri, ri, -w3 * np.einsum("nij,njk->nik", E, E))
        sys.add_blocks(ri, zi, w3 * E)
        sys.add_blocks(ri, zk, -w3 * E)
        sys.add_blocks(zi, ri, -w3 * E)
        sys.add_blocks(zk, ri, w3 * E)
        sys.add_blocks(zi, zi, w3 * eye)
        sys.add_blocks(zk, zk, w3 * eye)
        sys.add_blocks(zi, zk, -w3 * eye)
        sys.add_blocks(zk, zi, -w3 * eye)
        sys.add_rhs(zi, -w3 * e)
        sys.add_rhs(zk, w3 * e)
    return sys


def edge_distortion(source_points: np.ndarray, points: np.ndarray, graph: AdjacencyGraph) -> float:
    """Mean relative change of undirected edge lengths."""
    e = graph.undirected_edges()
    l0 = np.linalg.norm(source_points[e[:, 1]] - source_points[e[:, 0]], axis=1)
    l1 = np.linalg.norm(points[e[:, 1]] - points[e[:, 0]], axis=1)
    return float(np.mean(np.abs(l1 - l0) / l0))


def register_arap(source, target, cfg: Optional[ArapConfig] = None, graph: Optional[AdjacencyGraph] = None) -> RegistrationResult:
    """Non-rigid registration; iterates move freely (x <- z each step).

    Local rotations are accumulated exactly per vertex, like the global
    transform, and the ARAP term compares against rest-shape edges rotated by
    them. Re-using the current iterate's edges instead would let the
    linearization stretch edges a little more every iteration.
    """
    cfg = cfg or ArapConfig()
    w = cfg.effective_weights()
    x = vertices_of(source).copy()
    if len(x) < 3:
        raise InvalidInputError("ARAP registration needs at least 3 points")
    if graph is None:
        faces = getattr(source, "faces", None)
        if faces is None or len(faces) == 0:
            raise InvalidInputError("ARAP mode needs a source mesh with faces")
        graph = build_laplacian(source)
    tree = target_tree(target, need_normals=w.w4 > 0)

    ei, ek = graph.edges[:, 0], graph.edges[:, 1]
    rest_edges = x[ek] - x[ei]
    local_R = np.tile(np.eye(3), (len(x), 1, 1))

    T = RigidTransform.identity()
    reports = []
    converged = False
    for it in range(1, cfg.max_iters + 1):
        proj = project_points(tree, x)
        edges = np.einsum("nij,nj->ni", local_R[ei], rest_edges)
        step = solve_step(x, proj, w, graph, edges)
        rot, trans = float(np.linalg.norm(step.motion.r)), float(np.linalg.norm(step.motion.t))
        disp = float(np.max(np.linalg.norm(step.z - x, axis=1)))
        T = compose(step.motion.to_transform(), T)
        reports.append(
            IterationReport(it, step.energies, rot, trans, rmsd(proj.points, x), step.null_energy, step.grad_inf)
        )
        log.debug("arap iter %d: max disp=%.3e E=%.6e", it, disp, step.energies.e_total)
        x = step.z
        local_R = np.einsum("nij,njk->nik", rotations_from_small(step.local_rotations), local_R)
        if disp < cfg.stop_tol:
            converged = True
            break

    final_rmsd = rmsd(project_points(tree, x).points, x)
    log.info("arap registration: %d iterations, converged=%s, rmsd=%.3e", len(reports), converged, final_rmsd)
    return RegistrationResult(T, x, reports, converged, "arap", final_rmsd)
