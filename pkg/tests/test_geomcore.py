import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import quat_rotation
from surfreg.geomcore import (
    RigidTransform,
    SmallMotion,
    apply_rigid,
    compose,
    orthonormalize,
    rotation_angle,
    rotation_from_small,
    rotations_from_small,
    skew,
    skew_batch,
)

vec3 = arrays(np.float64, 3, elements=st.floats(-10, 10, allow_nan=False))


def test_skew_examples():
    np.testing.assert_array_equal(skew((1, 0, 0)), [[0, 0, 0], [0, 0, -1], [0, 1, 0]])
    np.testing.assert_array_equal(skew((1, 0, 0)) @ np.array([0, 1, 0]), [0, 0, 1])
    v = np.random.default_rng(1).normal(size=3)
    np.testing.assert_allclose(skew(v) @ v, 0, atol=1e-15)


@given(vec3, vec3)
def test_skew_anticommutes(v, w):
    np.testing.assert_allclose(skew(v) @ w, -(skew(w) @ v), atol=1e-12)
    np.testing.assert_allclose(skew(v) @ w, np.cross(v, w), atol=1e-12)


@given(vec3)
def test_skew_transpose_is_negation(v):
    S = skew(v)
    assert np.array_equal(S.T, -S)


def test_skew_batch_matches_single():
    v = np.random.default_rng(2).normal(size=(5, 3))
    for row, S in zip(v, skew_batch(v)):
        np.testing.assert_array_equal(S, skew(row))


def test_rotation_examples():
    np.testing.assert_array_equal(rotation_from_small((0, 0, 0)), np.eye(3))
    np.testing.assert_allclose(
        rotation_from_small((0, 0, math.pi / 2)), [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15
    )


def test_rotation_matches_quaternion_oracle():
    rng = np.random.default_rng(3)
    for _ in range(200):
        r = rng.normal(size=3) * rng.uniform(0, 3)
        np.testing.assert_allclose(rotation_from_small(r), quat_rotation(r), atol=1e-14)


def test_linearization_bound_half():
    rng = np.random.default_rng(4)
    for _ in range(500):
        r = rng.normal(size=3)
        r *= rng.uniform(0, 0.5) / np.linalg.norm(r)
        err = np.linalg.norm(quat_rotation(r) - np.eye(3) - skew(r), "fro")
        assert np.linalg.norm(rotation_from_small(r) - np.eye(3) - skew(r), "fro") <= r @ r
        assert err <= r @ r


def test_linearization_bound_small():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        r = rng.normal(size=3)
        r *= rng.uniform(0, 0.1) / np.linalg.norm(r)
        assert np.linalg.norm(rotation_from_small(r) - np.eye(3) - skew(r), "fro") <= 0.01


@given(arrays(np.float64, 3, elements=st.floats(-4, 4, allow_nan=False)))
def test_rotation_orthogonal(r):
    R = rotation_from_small(r)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(R) - 1) < 1e-12


def test_tiny_rotation_branch_continuous():
    r = np.array([3e-9, -2e-9, 1e-9])
    np.testing.assert_allclose(rotation_from_small(r), quat_rotation(r), atol=1e-16)


def test_batched_rotations():
    r = np.random.default_rng(6).normal(size=(20, 3))
    r[0] = 0
    r[1] = 1e-10
    got = rotations_from_small(r)
    for ri, R in zip(r, got):
        np.testing.assert_allclose(R, rotation_from_small(ri), atol=1e-15)


def test_rotation_angle():
    for ang in (0.0, 1e-9, 0.3, 2.0, math.pi - 1e-6):
        assert rotation_angle(rotation_from_small((0, ang, 0))) == pytest.approx(ang, abs=1e-12)


def test_apply_examples():
    ident = RigidTransform.identity()
    np.testing.assert_array_equal(apply_rigid(ident, (1, 2, 3)), [1, 2, 3])
    np.testing.assert_array_equal(apply_rigid(RigidTransform(np.eye(3), (1, 0, 0)), (0, 0, 0)), [1, 0, 0])
    rz = RigidTransform(rotation_from_small((0, 0, math.pi / 2)), np.zeros(3))
    np.testing.assert_allclose(apply_rigid(rz, (1, 0, 0)), [0, 1, 0], atol=1e-15)


def test_apply_stacked_matches_single():
    T = RigidTransform(rotation_from_small((0.1, 0.2, 0.3)), (1, 2, 3))
    p = np.random.default_rng(7).normal(size=(6, 3))
    np.testing.assert_allclose(T.apply(p), [T.rotation @ q + T.translation for q in p], atol=1e-15)


def test_compose_examples():
    T = RigidTransform(rotation_from_small((0.4, -0.1, 0.7)), (0.5, -2, 1))
    ident = RigidTransform.identity()
    for C in (compose(ident, T), compose(T, ident)):
        np.testing.assert_allclose(C.rotation, T.rotation, atol=1e-15)
        np.testing.assert_allclose(C.translation, T.translation, atol=1e-15)
    C = compose(T.inverse(), T)
    np.testing.assert_allclose(C.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(C.translation, 0, atol=1e-12)


def test_compose_order():
    A = RigidTransform(rotation_from_small((0, 0, 1)), (1, 0, 0))
    B = RigidTransform(rotation_from_small((1, 0, 0)), (0, 2, 0))
    p = np.array([0.3, -0.2, 0.9])
    np.testing.assert_allclose(compose(A, B).apply(p), A.apply(B.apply(p)), atol=1e-14)


def test_long_composition_stays_rigid():
    rng = np.random.default_rng(8)
    T = RigidTransform.identity()
    for _ in range(5000):
        T = compose(SmallMotion(rng.normal(size=3) * 0.05, rng.normal(size=3)).to_transform(), T)
    R = T.rotation
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-9


def test_transform_rejects_non_rotation():
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3) + skew((0.1, 0, 0)), np.zeros(3))
    with pytest.raises(ValueError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3), (np.nan, 0, 0))


def test_transform_is_immutable():
    T = RigidTransform.identity()
    with pytest.raises(ValueError):
        T.rotation[0, 0] = 2.0


def test_orthonormalize_recovers_rotation():
    R = rotation_from_small((0.2, 0.5, -0.3))
    noisy = R + 1e-6 * np.random.default_rng(9).normal(size=(3, 3))
    np.testing.assert_allclose(orthonormalize(noisy), R, atol=1e-5)


def test_small_motion_zero():
    M = SmallMotion.zero().to_transform()
    np.testing.assert_array_equal(M.rotation, np.eye(3))
    with pytest.raises(ValueError):
        SmallMotion((np.inf, 0, 0), (0, 0, 0))


@settings(max_examples=50)
@given(vec3, vec3)
def test_inverse_round_trip(r, t):
    r = r / 4
    T = RigidTransform(rotation_from_small(r), t)
    p = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(T.inverse().apply(T.apply(p)), p, atol=1e-12)
