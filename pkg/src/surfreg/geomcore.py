"""Points, cross-product matrices, rigid transforms and the small-rotation map."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-9
# drift above this triggers polar re-projection when composing
_REORTHO_TOL = 1e-12


def skew(v) -> np.ndarray:
    """Return the matrix X with X @ w == cross(v, w)."""
    a, b, c = np.asarray(v, dtype=float)
    return np.array([[0.0, -c, b], [c, 0.0, -a], [-b, a, 0.0]])


def skew_batch(v: np.ndarray) -> np.ndarray:
    """Stack of skew matrices for an (N, 3) array."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def rotation_from_small(r) -> np.ndarray:
    """Exact rotation exp(skew(r)) via the Rodrigues formula."""
    r = np.asarray(r, dtype=float)
    theta2 = float(r @ r)
    K = skew(r)
    if theta2 < 1e-16:
        # Taylor terms; the next ones are O(theta^3) and below eps here
        return np.eye(3) + K + 0.5 * (K @ K)
    theta = np.sqrt(theta2)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta2
    return np.eye(3) + a * K + b * (K @ K)


def rotations_from_small(r: np.ndarray) -> np.ndarray:
    """Vectorized ``rotation_from_small`` over an (N, 3) array."""
    r = np.asarray(r, dtype=float)
    theta2 = np.einsum("ni,ni->n", r, r)
    theta = np.sqrt(theta2)
    small = theta2 < 1e-16
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0, np.sin(safe) / safe)
    b = np.where(small, 0.5, (1.0 - np.cos(safe)) / np.where(small, 1.0, safe * safe))
    K = skew_batch(r)
    return np.eye(3) + a[:, None, None] * K + b[:, None, None] * (K @ K)


def rotation_angle(R: np.ndarray) -> float:
    """Rotation angle of R in radians, robust near 0 and pi."""
    c = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    s = np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    return float(np.arctan2(s, c))


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Nearest rotation in the Frobenius sense (polar projection)."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def _check_finite(name: str, a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        _check_finite("rotation", R)
        _check_finite("translation", t)
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation is not a proper orthogonal matrix")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    def apply(self, p) -> np.ndarray:
        """Apply to a single point (3,) or a stack (N, 3)."""
        p = np.asarray(p, dtype=float)
        return p @ self.rotation.T + self.translation

    def inverse(self) -> RigidTransform:
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M


@dataclass(frozen=True)
class SmallMotion:
    """Linearized per-iteration motion: rotation vector r and translation t."""

    r: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        r = np.array(self.r, dtype=float).reshape(3)
        t = np.array(self.t, dtype=float).reshape(3)
        _check_finite("r", r)
        _check_finite("t", t)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "t", t)

    @classmethod
    def zero(cls) -> SmallMotion:
        return cls(np.zeros(3), np.zeros(3))

    def to_transform(self) -> RigidTransform:
        return RigidTransform(rotation_from_small(self.r), self.t)


def apply_rigid(T: RigidTransform, p) -> np.ndarray:
    return T.apply(p)


def compose(outer: RigidTransform, inner: RigidTransform) -> RigidTransform:
    """Transform applying `inner` first, then `outer`."""
    R = outer.rotation @ inner.rotation
    if np.max(np.abs(R.T @ R - np.eye(3))) > _REORTHO_TOL:
        R = orthonormalize(R)
    t = outer.rotation @ inner.translation + outer.translation
    return RigidTransform(R, t)
