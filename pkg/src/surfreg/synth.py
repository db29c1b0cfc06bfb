"""Deterministic synthetic meshes and registration scenarios.

All randomness comes from ``surfreg.rng.Xoshiro256`` so scenarios are a pure
function of their arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from surfreg.errors import InvalidInputError
from surfreg.fileio import Mesh
from surfreg.geomcore import RigidTransform, rotation_from_small
from surfreg.rng import Xoshiro256
from surfreg.spatial import estimate_normals

_PHI = (1.0 + math.sqrt(5.0)) / 2.0

_ICO_VERTS = [
    (-1, _PHI, 0), (1, _PHI, 0), (-1, -_PHI, 0), (1, -_PHI, 0),
    (0, -1, _PHI), (0, 1, _PHI), (0, -1, -_PHI), (0, 1, -_PHI),
    (_PHI, 0, -1), (_PHI, 0, 1), (-_PHI, 0, -1), (-_PHI, 0, 1),
]
_ICO_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


@dataclass(frozen=True)
class Scenario:
    name: str
    source: Mesh
    target: Mesh
    ground_truth: Optional[RigidTransform] = None
    params: Optional[dict] = None


def make_sphere(n_subdiv: int) -> Mesh:
    """Unit icosphere: 10 * 4**n + 2 vertices, outward normals attached."""
    if not 0 <= n_subdiv <= 6:
        raise InvalidInputError("n_subdiv must be in [0, 6]")
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = list(_ICO_FACES)
    for _ in range(n_subdiv):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts)
    return Mesh(v, np.array(faces, dtype=np.int64), v.copy())


def make_grid(nx: int, ny: int, spacing: float = 1.0) -> Mesh:
    """Planar z=0 grid with its corner at the origin; vertex (i, j) is j*nx + i."""
    if nx < 2 or ny < 2:
        raise InvalidInputError("grid needs nx, ny >= 2")
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    v = np.stack([ii.ravel() * spacing, jj.ravel() * spacing, np.zeros(nx * ny)], axis=1)
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            faces.append((a, a + 1, a + nx + 1))
            faces.append((a, a + nx + 1, a + nx))
    normals = np.tile([0.0, 0.0, 1.0], (nx * ny, 1))
    return Mesh(v, np.array(faces, dtype=np.int64), normals)


def random_rigid(seed: int, max_angle_rad: float, max_trans: float) -> RigidTransform:
    """Random rigid motion.

    Draw order: axis cos-polar in [-1, 1), axis azimuth in [0, 2pi), angle in
    [0, max_angle), then tx, ty, tz in [-max_trans, max_trans).
    """
    if max_angle_rad > math.pi:
        raise InvalidInputError("max_angle_rad must be at most pi")
    g = Xoshiro256(seed)
    cz = g.uniform(-1.0, 1.0)
    phi = g.uniform(0.0, 2.0 * math.pi)
    angle = g.uniform(0.0, max_angle_rad)
    t = [g.uniform(-max_trans, max_trans) for _ in range(3)]
    s = math.sqrt(max(0.0, 1.0 - cz * cz))
    axis = np.array([s * math.cos(phi), s * math.sin(phi), cz])
    return RigidTransform(rotation_from_small(angle * axis), np.array(t))


def bend(mesh: Mesh, curvature: float) -> Mesh:
    """Roll the mesh onto a cylinder about the y axis (isometric for z=0 sheets)."""
    v = mesh.vertices
    x = v[:, 0]
    extent = float(np.max(np.abs(x))) if len(x) else 0.0
    if abs(curvature) * extent >= math.pi:
        raise InvalidInputError("bend would fold the mesh: curvature * extent >= pi")
    u = curvature * x
    half = 0.5 * u
    out = v.copy()
    # sinc forms stay exact as curvature -> 0
    out[:, 0] = x * np.sinc(u / math.pi)
    out[:, 2] = v[:, 2] + x * np.sin(half) * np.sinc(half / math.pi)
    normals = estimate_normals(out, faces=mesh.faces) if len(mesh.faces) else None
    return Mesh(out, mesh.faces.copy(), normals)


def add_noise(mesh: Mesh, sigma: float, seed: int) -> Mesh:
    """Gaussian noise per coordinate, drawn in vertex-major (x, y, z) order."""
    if sigma < 0:
        raise InvalidInputError("sigma must be nonnegative")
    if sigma == 0:
        return Mesh(mesh.vertices.copy(), mesh.faces.copy(), None if mesh.normals is None else mesh.normals.copy())
    g = Xoshiro256(seed)
    noise = np.array(g.normals(mesh.vertices.size)).reshape(mesh.vertices.shape)
    return Mesh(mesh.vertices + sigma * noise, mesh.faces.copy(), None)


def _centered(mesh: Mesh) -> Mesh:
    lo, hi = mesh.bbox()
    c = 0.5 * (lo + hi)
    return Mesh(mesh.vertices - c, mesh.faces, mesh.normals)


_LOBE_DIRS = np.array([[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]) / math.sqrt(3.0)
_LOBE_AMPS = (1.0, 0.8, 0.6, 0.4)


def lobed_sphere(n_subdiv: int = 3) -> Mesh:
    """Icosphere pushed out into four uneven tetrahedral lobes, then squashed.

    A round sphere cannot pin down rotations, and near-round blobs trap
    closest-vertex ICP one lattice step from the answer; the lobes make
    rotations move points along the normal instead.
    """
    base = make_sphere(n_subdiv)
    v = base.vertices
    radius = np.ones(len(v))
    for d, a in zip(_LOBE_DIRS, _LOBE_AMPS):
        radius += a * np.exp(-4.0 * np.sum((v - d) ** 2, axis=1))
    out = v * radius[:, None] * np.array([1.0, 0.8, 0.6])
    return Mesh(out, base.faces, estimate_normals(out, faces=base.faces))


def sphere_rigid_scenario(seed: int, n_subdiv: int = 3, max_angle_deg: float = 20.0, trans_frac: float = 0.3) -> Scenario:
    source = lobed_sphere(n_subdiv)
    diag = source.bbox_diagonal()
    # translation norm stays within trans_frac * bbox diagonal
    gt = random_rigid(seed, math.radians(max_angle_deg), trans_frac * diag / math.sqrt(3.0))
    target = Mesh(gt.apply(source.vertices), source.faces.copy(), source.normals @ gt.rotation.T)
    params = {"seed": seed, "n_subdiv": n_subdiv, "max_angle_deg": max_angle_deg, "trans_frac": trans_frac}
    return Scenario("sphere-rigid", source, target, gt, params)


def bend_scenario(nx: int = 20, ny: int = 20, spacing: float = 1.0, curvature: float = 0.05) -> Scenario:
    source = _centered(make_grid(nx, ny, spacing))
    target = bend(source, curvature)
    params = {"nx": nx, "ny": ny, "spacing": spacing, "curvature": curvature}
    return Scenario("bend", source, target, None, params)


def incline_scenario(seed: int) -> Scenario:
    """Flat grid slid along itself, lifted slightly and tipped.

    Target: 21x21 grid, spacing 0.1, at z=0. Source: the same grid moved by a
    tilt of 2-5 degrees about a random in-plane axis, an in-plane slide of
    0.3-0.6 and a lift of 0.05-0.1 along the normal.
    """
    g = Xoshiro256(seed)
    target = _centered(make_grid(21, 21, 0.1))
    tilt_axis_angle = g.uniform(0.0, 2.0 * math.pi)
    tilt = math.radians(g.uniform(2.0, 5.0))
    slide_dir = g.uniform(0.0, 2.0 * math.pi)
    slide = g.uniform(0.3, 0.6)
    lift = g.uniform(0.05, 0.1)
    axis = np.array([math.cos(tilt_axis_angle), math.sin(tilt_axis_angle), 0.0])
    motion = RigidTransform(
        rotation_from_small(tilt * axis),
        np.array([slide * math.cos(slide_dir), slide * math.sin(slide_dir), lift]),
    )
    source = Mesh(motion.apply(target.vertices), target.faces.copy(), target.normals @ motion.rotation.T)
    params = {"seed": seed, "tilt_deg": math.degrees(tilt), "slide": slide, "lift": lift}
    return Scenario("incline", source, target, motion.inverse(), params)


SCENARIOS = {
    "sphere-rigid": lambda seed: sphere_rigid_scenario(seed),
    "bend": lambda seed: bend_scenario(),
    "incline": lambda seed: incline_scenario(seed),
}
