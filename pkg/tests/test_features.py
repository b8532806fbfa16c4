"""Normal-affinity Laplacian and spectral feature construction."""

import io

import numpy as np
import pytest

from msseg.errors import DimensionError, FeatureError
from msseg.features import (
    build_laplacian,
    dump_features,
    feature_field,
    normal_distance,
)
from msseg.mesh import TriMesh

from _meshes import (
    equilateral,
    flat_patch,
    folded_pair,
    path_strip,
    random_closed,
    square_axis_pair,
    two_components,
)


# -- normal distance ----------------------------------------------------------


def test_normal_distance_coplanar_is_zero():
    mesh = square_axis_pair()
    assert normal_distance(mesh, 0, 1, "raw") == pytest.approx(0.0, abs=1e-14)


def test_normal_distance_right_angle_raw():
    mesh = folded_pair()
    assert normal_distance(mesh, 0, 1, "raw") == pytest.approx(2.0, abs=1e-12)


def test_normal_distance_antipodal_is_four():
    # two coincident triangles with opposite winding: antipodal normals
    mesh = TriMesh(
        [(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 1, 2), (1, 0, 2)]
    )
    assert normal_distance(mesh, 0, 1, "raw") == pytest.approx(4.0, abs=1e-12)


def test_normal_distance_range():
    mesh = random_closed(40, seed=2)
    interior = np.nonzero(~mesh.boundary_edge)[0]
    for e in interior[:20]:
        f0, f1 = mesh.edge_faces[e]
        d = normal_distance(mesh, f0, f1, "n2")
        assert 0.0 <= d <= 4.0


def test_normal_distance_requires_shared_edge():
    mesh = flat_patch(3)
    with pytest.raises(DimensionError):
        normal_distance(mesh, 0, mesh.n_faces - 1, "raw")
    with pytest.raises(DimensionError):
        normal_distance(mesh, 0, 0, "raw")


# -- laplacian ---------------------------------------------------------------


def test_laplacian_two_flat_faces():
    mesh = square_axis_pair()  # unit shared edge, coplanar faces
    L = build_laplacian(mesh).toarray()
    assert np.allclose(L, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-12)


def test_laplacian_path_strip():
    # three coplanar faces in a row with unit shared edges
    L = build_laplacian(path_strip()).toarray()
    expected = [[1, -1, 0], [-1, 2, -1], [0, -1, 1]]
    assert np.allclose(L, expected, atol=1e-12)


def test_laplacian_zero_row_sums():
    for mesh in (path_strip(), random_closed(60, 4), two_components()):
        L = build_laplacian(mesh)
        assert np.abs(np.asarray(L.sum(axis=1))).max() < 1e-12


def test_laplacian_symmetric_nonpositive_offdiag():
    mesh = random_closed(50, seed=5)
    L = build_laplacian(mesh).toarray()
    assert np.allclose(L, L.T, atol=1e-14)
    off = L - np.diag(np.diag(L))
    assert (off <= 1e-14).all()


def test_laplacian_positive_semidefinite_quadratic_form():
    mesh = random_closed(50, seed=6)
    L = build_laplacian(mesh)
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.normal(size=mesh.n_faces)
        assert x @ (L @ x) >= -1e-10


def test_laplacian_needs_interior_edges():
    with pytest.raises(FeatureError):
        build_laplacian(equilateral())


# -- feature field -------------------------------------------------------------


def test_path_strip_fiedler_channel():
    field = feature_field(path_strip(), 2)
    x = field.values[:, 0]
    fiedler = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
    cos = abs(np.dot(x, fiedler)) / np.linalg.norm(x)
    assert cos > 1.0 - 1e-8
    assert field.eigenvalues[0] == pytest.approx(1.0, abs=1e-10)


def test_disconnected_mesh_channel_is_component_indicator():
    mesh = two_components()
    field = feature_field(mesh, 2)
    x = field.values[:, 0]
    # piecewise constant per component, different values across components
    assert np.ptp(x[:2]) < 1e-10
    assert np.ptp(x[2:]) < 1e-10
    assert abs(x[0] - x[2]) > 0.5
    assert field.eigenvalues[0] == 0.0


def test_channel_count_and_normalization():
    mesh = random_closed(80, seed=9)
    k = 4
    field = feature_field(mesh, k)
    assert field.values.shape == (mesh.n_faces, k - 1)
    areas = mesh.face_areas
    total = areas.sum()
    for j in range(k - 1):
        x = field.values[:, j]
        mean = areas @ x / total
        var = areas @ (x - mean) ** 2 / total
        assert var == pytest.approx(1.0, rel=1e-10)
        # eigenvectors are orthogonal to the constant kernel vector
        assert abs(x.mean()) < 1e-8
        # deterministic sign: first sizable entry positive
        nz = np.nonzero(np.abs(x) > 1e-8 * np.abs(x).max())[0]
        assert x[nz[0]] > 0


def test_eigen_residual_contract():
    for mesh in (path_strip(), random_closed(80, 10), two_components()):
        L = build_laplacian(mesh)
        field = feature_field(mesh, min(4, mesh.n_faces))
        for j in range(field.values.shape[1]):
            x = field.values[:, j]
            res = np.linalg.norm(L @ x - field.eigenvalues[j] * x)
            assert res <= 1e-8 * np.linalg.norm(x)


def test_channels_mutually_orthogonal():
    field = feature_field(random_closed(80, seed=11), 5)
    v = field.values / np.linalg.norm(field.values, axis=0)
    gram = v.T @ v
    assert np.abs(gram - np.eye(gram.shape[0])).max() < 1e-8


def test_scales_record_applied_factor():
    mesh = random_closed(60, seed=12)
    field = feature_field(mesh, 3)
    # undoing the recorded scale recovers a unit eigenvector
    for j in range(field.values.shape[1]):
        x = field.values[:, j] / field.scales[j]
        assert np.linalg.norm(x) == pytest.approx(1.0, rel=1e-8)


def test_face_reorder_invariance_up_to_sign():
    mesh = path_strip()
    base = feature_field(mesh, 2).values[:, 0]
    perm = np.array([2, 0, 1])
    permuted = TriMesh(mesh.vertices, mesh.faces[perm])
    other = feature_field(permuted, 2).values[:, 0]
    aligned = other if np.dot(other, base[perm]) >= 0 else -other
    assert np.allclose(aligned, base[perm], atol=1e-10)


def test_feature_field_argument_errors():
    mesh = square_axis_pair()
    with pytest.raises(FeatureError):
        feature_field(mesh, 1)
    with pytest.raises(FeatureError):
        feature_field(mesh, 3)  # needs 2 channels but only 2 faces


def test_dump_features_round_trip():
    field = feature_field(random_closed(40, seed=13), 3)
    buf = io.StringIO()
    dump_features(field, buf)
    back = np.loadtxt(io.StringIO(buf.getvalue()), delimiter=",")
    assert np.allclose(back, field.values, atol=1e-15)
