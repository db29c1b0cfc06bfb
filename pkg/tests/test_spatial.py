import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_nearest
from surfreg.errors import DegenerateNormalError, InvalidInputError
from surfreg.spatial import KdTree, build_kdtree, estimate_normals, project, project_points
from surfreg.synth import make_grid, make_sphere


def test_single_point_tree():
    tree = build_kdtree([[1.0, 2.0, 3.0]])
    assert len(tree) == 1
    for q in ([0, 0, 0], [100, -5, 2]):
        assert tree.nearest(q)[0] == 0


def test_matches_linear_scan():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(1000, 3))
    tree = build_kdtree(pts)
    for q in rng.uniform(-1.5, 1.5, size=(100, 3)):
        assert tree.nearest(q) == brute_nearest(pts, q)


def test_exactness_large():
    rng = np.random.default_rng(1)
    # clustered data with many repeated coordinates stresses the split logic
    pts = np.round(rng.normal(size=(10000, 3)), 1)
    tree = build_kdtree(pts)
    queries = np.concatenate([rng.normal(size=(900, 3)), pts[rng.integers(0, len(pts), 100)]])
    for q in queries:
        i, d2 = tree.nearest(q)
        bi, bd2 = brute_nearest(pts, q)
        assert i == bi
        assert d2 == bd2


def test_duplicates_lowest_index():
    pts = np.array([[1.0, 1, 1]] * 20 + [[0.0, 0, 0]] * 20)
    tree = build_kdtree(pts)
    assert tree.nearest([0.9, 0.9, 0.9])[0] == 0
    assert tree.nearest([0.1, 0, 0])[0] == 20


def test_project_examples():
    tree = build_kdtree([[0.0, 0, 0], [1.0, 0, 0]])
    p = project(tree, (0.4, 0, 0))
    assert p.index == 0 and p.distance == pytest.approx(0.4)
    assert project(tree, (1.0, 0, 0)).distance == 0
    assert project(tree, (0.5, 0, 0)).index == 0


def test_project_idempotent():
    rng = np.random.default_rng(2)
    tree = build_kdtree(rng.normal(size=(300, 3)))
    for q in rng.normal(size=(50, 3)):
        p = project(tree, q)
        assert project(tree, p.point).distance == 0


def test_project_points_batch():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(200, 3))
    nrm = rng.normal(size=(200, 3))
    tree = build_kdtree(pts, nrm)
    q = rng.normal(size=(40, 3))
    batch = project_points(tree, q)
    for m in range(len(q)):
        single = project(tree, q[m])
        assert batch[m].index == single.index
        np.testing.assert_array_equal(batch[m].normal, nrm[single.index])
        assert batch.distances[m] == single.distance


def test_nearest_k_matches_sort():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(500, 3))
    tree = build_kdtree(pts)
    for q in rng.normal(size=(30, 3)):
        d2 = np.sum((pts - q) ** 2, axis=1)
        expect = sorted(range(len(pts)), key=lambda i: (d2[i], i))[:9]
        assert tree.nearest_k(q, 9) == expect


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 60), st.just(3)), elements=st.integers(-3, 3).map(float)),
    arrays(np.float64, 3, elements=st.floats(-4, 4, allow_nan=False)),
)
def test_nearest_property(pts, q):
    # integer lattices create plenty of exact ties
    assert build_kdtree(pts).nearest(q) == brute_nearest(pts, q)


def test_tree_rejects_bad_input():
    with pytest.raises(InvalidInputError, match="empty target"):
        KdTree(np.zeros((0, 3)))
    with pytest.raises(InvalidInputError):
        KdTree([[0.0, np.nan, 0.0]])
    with pytest.raises(InvalidInputError):
        KdTree(np.zeros((4, 2)))


def test_grid_normals_pca():
    g = make_grid(6, 5, 0.3)
    n = estimate_normals(g.vertices, k=8)
    np.testing.assert_allclose(np.abs(n[:, 2]), 1.0, atol=1e-6)
    np.testing.assert_allclose(n[:, :2], 0.0, atol=1e-6)


def test_sphere_normals_with_faces():
    s = make_sphere(3)
    n = estimate_normals(s.vertices, faces=s.faces)
    cosang = np.clip(np.sum(n * s.vertices, axis=1), -1, 1)
    assert np.degrees(np.arccos(cosang)).max() < 2.0
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-9)


def test_sphere_normals_pca_unit_and_radial():
    s = make_sphere(2)
    n = estimate_normals(s.vertices, k=8)
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-9)
    # orientation propagates outward from the top point
    assert np.all(np.sum(n * s.vertices, axis=1) > 0.9)


def test_two_coplanar_triangles():
    v = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
    f = np.array([[0, 1, 2], [0, 2, 3]])
    n = estimate_normals(v, faces=f)
    np.testing.assert_allclose(n[0], [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(n[2], [0, 0, 1], atol=1e-15)


def test_collinear_points_are_degenerate():
    pts = np.stack([np.linspace(0, 1, 12), np.zeros(12), np.zeros(12)], axis=1)
    with pytest.raises(DegenerateNormalError, match="degenerate normal neighborhood at point"):
        estimate_normals(pts, k=4)
