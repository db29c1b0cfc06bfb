"""Registration energies and their analytic gradients.

All terms are evaluated with the projections frozen at the previous iterate,
i.e. on the quadratic surrogate that each linear solve minimizes. Unknowns
are laid out as (r, t, r_1..r_N, z_1..z_N); the local rotations are omitted
in rigid mode.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from surfreg.errors import InvalidInputError
from surfreg.graph import AdjacencyGraph
from surfreg.spatial import Projections


@dataclass(frozen=True)
class Weights:
    w1: float = 1.0  # point-to-point fit
    w2: float = 1.0  # global rigid motion
    w3: float = 0.0  # as-rigid-as-possible
    w4: float = 0.0  # point-to-plane
    tikhonov: float = 1e-6

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v < 0:
                raise InvalidInputError(f"weight {f.name} must be finite and nonnegative, got {v}")
        if self.w1 <= 0 and self.w4 <= 0:
            raise InvalidInputError("need a data term: w1 > 0 or w4 > 0")

    def regularizes_translation(self) -> bool:
        # with w2 == 0 nothing else constrains t, so it shares the rotation damping
        return self.w2 == 0


@dataclass(frozen=True)
class EnergyBreakdown:
    e_fit: float = 0.0
    e_rigid: float = 0.0
    e_arap: float = 0.0
    e_plane: float = 0.0
    e_reg: float = 0.0
    e_total: float = 0.0

    @classmethod
    def of(cls, e_fit, e_rigid, e_arap, e_plane, e_reg) -> EnergyBreakdown:
        return cls(e_fit, e_rigid, e_arap, e_plane, e_reg, e_fit + e_rigid + e_arap + e_plane + e_reg)


@dataclass(frozen=True)
class RegistrationState:
    x: np.ndarray
    z: np.ndarray
    r: np.ndarray
    t: np.ndarray
    projections: Projections
    local_rotations: Optional[np.ndarray] = None
    # per directed graph edge; defaults to x[k] - x[i]
    edge_vectors: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.x)
        if n < 1:
            raise InvalidInputError("state needs at least one point")
        shapes = {"x": self.x, "z": self.z, "projections.points": self.projections.points}
        if self.local_rotations is not None:
            shapes["local_rotations"] = self.local_rotations
        for name, a in shapes.items():
            if np.shape(a) != (n, 3):
                raise InvalidInputError(f"length mismatch: {name} has shape {np.shape(a)}, expected ({n}, 3)")
        if self.projections.normals is not None and np.shape(self.projections.normals) != (n, 3):
            raise InvalidInputError("length mismatch: projection normals")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def arap(self) -> bool:
        return self.local_rotations is not None

    def pack(self) -> np.ndarray:
        parts = [self.r, self.t]
        if self.arap:
            parts.append(np.ravel(self.local_rotations))
        parts.append(np.ravel(self.z))
        return np.concatenate([np.ravel(p) for p in parts]).astype(float)

    def unpack(self, u: np.ndarray) -> RegistrationState:
        """Same data, unknowns replaced by the flat vector u."""
        n = self.n
        u = np.asarray(u, dtype=float)
        local = None
        off = 6
        if self.arap:
            local = u[off : off + 3 * n].reshape(n, 3)
            off += 3 * n
        z = u[off : off + 3 * n].reshape(n, 3)
        return RegistrationState(self.x, z, u[0:3], u[3:6], self.projections, local, self.edge_vectors)


def _check(state: RegistrationState, graph: Optional[AdjacencyGraph], w: Weights) -> None:
    if w.w3 > 0:
        if graph is None:
            raise InvalidInputError("w3 > 0 requires an adjacency graph")
        if not state.arap:
            raise InvalidInputError("w3 > 0 requires local rotations in the state")
        if graph.n != state.n:
            raise InvalidInputError(f"length mismatch: graph has {graph.n} nodes, state has {state.n}")
        if state.edge_vectors is not None and np.shape(state.edge_vectors) != (len(graph.edges), 3):
            raise InvalidInputError("length mismatch: edge_vectors must have one row per directed edge")
    if w.w4 > 0 and state.projections.normals is None:
        raise InvalidInputError("w4 > 0 requires projection normals")


def _arap_residuals(state: RegistrationState, graph: AdjacencyGraph):
    i, k = graph.edges[:, 0], graph.edges[:, 1]
    e = state.x[k] - state.x[i] if state.edge_vectors is None else state.edge_vectors
    sigma = e + np.cross(state.local_rotations[i], e) - (state.z[k] - state.z[i])
    return i, k, e, sigma


def eval_energy(state: RegistrationState, graph: Optional[AdjacencyGraph], w: Weights) -> EnergyBreakdown:
    _check(state, graph, w)
    pi = state.projections.points
    d_fit = pi - state.z
    e_fit = w.w1 * float(np.sum(d_fit * d_fit))

    rho = state.x + np.cross(state.r, state.x) + state.t - state.z
    e_rigid = w.w2 * float(np.sum(rho * rho))

    e_arap = 0.0
    if w.w3 > 0 and len(graph.edges):
        sigma = _arap_residuals(state, graph)[3]
        e_arap = w.w3 * float(np.sum(sigma * sigma))

    e_plane = 0.0
    if w.w4 > 0:
        d = np.einsum("ij,ij->i", state.projections.normals, d_fit)
        e_plane = w.w4 * float(d @ d)

    reg = float(state.r @ state.r)
    if state.arap:
        reg += float(np.sum(state.local_rotations**2))
    if w.regularizes_translation():
        reg += float(state.t @ state.t)
    return EnergyBreakdown.of(e_fit, e_rigid, e_arap, e_plane, w.tikhonov * reg)


def eval_gradient(state: RegistrationState, graph: Optional[AdjacencyGraph], w: Weights) -> np.ndarray:
    """Gradient of the total energy, packed like ``RegistrationState.pack``."""
    _check(state, graph, w)
    n = state.n
    pi = state.projections.points
    rho = state.x + np.cross(state.r, state.x) + state.t - state.z

    g_r = 2 * w.w2 * np.cross(state.x, rho).sum(axis=0) + 2 * w.tikhonov * state.r
    g_t = 2 * w.w2 * rho.sum(axis=0)
    if w.regularizes_translation():
        g_t = g_t + 2 * w.tikhonov * state.t
    g_z = 2 * w.w1 * (state.z - pi) - 2 * w.w2 * rho
    if w.w4 > 0:
        nrm = state.projections.normals
        d = np.einsum("ij,ij->i", nrm, state.z - pi)
        g_z += 2 * w.w4 * nrm * d[:, None]

    parts = [g_r, g_t]
    if state.arap:
        g_loc = 2 * w.tikhonov * state.local_rotations
        if w.w3 > 0 and len(graph.edges):
            i, k, e, sigma = _arap_residuals(state, graph)
            g_loc = g_loc.copy()
            np.add.at(g_loc, i, 2 * w.w3 * np.cross(e, sigma))
            np.add.at(g_z, k, -2 * w.w3 * sigma)
            np.add.at(g_z, i, 2 * w.w3 * sigma)
        parts.append(g_loc.reshape(3 * n))
    parts.append(g_z.reshape(3 * n))
    return np.concatenate(parts)
