"""Independent reference implementations used by the tests.

Nothing here imports the solver code paths it is checking: energies are
re-derived term by term with explicit loops in extended precision, the
linear solve is plain Gaussian elimination, and rotations go through
quaternions instead of the Rodrigues formula.
"""

import math

import numpy as np

from surfreg.energy import RegistrationState, Weights
from surfreg.graph import AdjacencyGraph
from surfreg.spatial import Projections

LD = np.longdouble


def _cross(a, b):
    return np.array(
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]],
        dtype=LD,
    )


def energy_ld(u, x, proj_pts, normals, edges, w: Weights, arap: bool):
    """Total surrogate energy at the packed unknown vector u, in long double."""
    n = len(x)
    u = np.asarray(u, dtype=LD)
    x = np.asarray(x, dtype=LD)
    P = np.asarray(proj_pts, dtype=LD)
    r, t = u[0:3], u[3:6]
    off = 6
    loc = None
    if arap:
        loc = u[off : off + 3 * n].reshape(n, 3)
        off += 3 * n
    z = u[off : off + 3 * n].reshape(n, 3)

    total = LD(0)
    for i in range(n):
        d = P[i] - z[i]
        total += LD(w.w1) * np.dot(d, d)
        rho = x[i] + _cross(r, x[i]) + t - z[i]
        total += LD(w.w2) * np.dot(rho, rho)
        if w.w4 > 0:
            nd = np.dot(np.asarray(normals[i], dtype=LD), d)
            total += LD(w.w4) * nd * nd
    if w.w3 > 0:
        for i, k in edges:
            e = x[k] - x[i]
            s = e + _cross(loc[i], e) - (z[k] - z[i])
            total += LD(w.w3) * np.dot(s, s)
    reg = np.dot(r, r)
    if arap:
        reg += np.sum(loc * loc)
    if w.w2 == 0:
        reg += np.dot(t, t)
    return total + LD(w.tikhonov) * reg


def fd_gradient(state: RegistrationState, graph, w: Weights, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``energy_ld`` around the packed state."""
    u0 = np.asarray(state.pack(), dtype=LD)
    edges = [] if graph is None else [tuple(e) for e in graph.edges.tolist()]
    args = (state.x, state.projections.points, state.projections.normals, edges, w, state.arap)
    g = np.empty(len(u0), dtype=LD)
    hh = LD(h)
    for j in range(len(u0)):
        up = u0.copy()
        dn = u0.copy()
        up[j] += hh
        dn[j] -= hh
        g[j] = (energy_ld(up, *args) - energy_ld(dn, *args)) / (2 * hh)
    return g.astype(float)


def gauss_solve(A, b) -> np.ndarray:
    """Dense Gaussian elimination with partial pivoting, in long double."""
    A = np.array(A, dtype=LD)
    b = np.array(b, dtype=LD)
    n = len(b)
    for c in range(n):
        p = c + int(np.argmax(np.abs(A[c:, c])))
        if A[p, c] == 0:
            raise ZeroDivisionError("singular matrix")
        if p != c:
            A[[c, p]] = A[[p, c]]
            b[[c, p]] = b[[p, c]]
        f = A[c + 1 :, c] / A[c, c]
        A[c + 1 :, c:] -= np.outer(f, A[c, c:])
        b[c + 1 :] -= f * b[c]
    out = np.zeros(n, dtype=LD)
    for c in range(n - 1, -1, -1):
        out[c] = (b[c] - A[c, c + 1 :] @ out[c + 1 :]) / A[c, c]
    return out.astype(float)


def quat_rotation(r) -> np.ndarray:
    """exp(skew(r)) through the unit quaternion (cos(θ/2), sin(θ/2) axis)."""
    r = np.asarray(r, dtype=float)
    theta = float(np.linalg.norm(r))
    if theta == 0:
        return np.eye(3)
    a = r / theta
    w = math.cos(theta / 2)
    x, y, z = math.sin(theta / 2) * a
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def brute_nearest(points, q):
    """Linear scan; lowest index wins exact ties."""
    d2 = np.sum((np.asarray(points) - np.asarray(q)) ** 2, axis=1)
    i = int(np.argmin(d2))
    return i, float(d2[i])


def random_graph(rng: np.random.Generator, n: int, p: float = 0.35) -> AdjacencyGraph:
    pairs = [(i, k) for i in range(n) for k in range(i + 1, n) if rng.random() < p]
    if not pairs:
        pairs = [(0, 1)]
    return AdjacencyGraph.from_edges(n, pairs)


def random_instance(rng: np.random.Generator, n: int = 10, arap: bool = True, w4=None):
    """Random state, graph and weights drawn as the acceptance suite asks."""
    choices = (0.5, 1.0, 2.0)
    w4 = float(rng.choice((0.0, 1.0))) if w4 is None else w4
    w = Weights(
        w1=float(rng.choice(choices)),
        w2=float(rng.choice(choices)),
        w3=float(rng.choice(choices)) if arap else 0.0,
        w4=w4,
    )
    x = rng.normal(size=(n, 3))
    pts = x + 0.3 * rng.normal(size=(n, 3))
    nrm = rng.normal(size=(n, 3))
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    proj = Projections(pts, np.arange(n), np.linalg.norm(pts - x, axis=1), nrm)
    graph = random_graph(rng, n) if arap else None
    state = RegistrationState(
        x,
        x + 0.2 * rng.normal(size=(n, 3)),
        0.1 * rng.normal(size=3),
        0.1 * rng.normal(size=3),
        proj,
        0.1 * rng.normal(size=(n, 3)) if arap else None,
    )
    return state, graph, w
