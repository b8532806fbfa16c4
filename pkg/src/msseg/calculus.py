"""Discrete differential operators and variation energies on mesh fields.

Face fields are ``(n_faces, n)`` arrays, edge fields ``(n_edges, n)``
arrays.  The gradient jumps a face field across interior edges and is
zero on boundary edges; the divergence maps edge fields back to faces
with the 1/area factor that makes ``-div`` the exact adjoint of the
gradient under the area/length weighted inner products below.
"""

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, ParameterError


class Operators:
    """Sparse incidence operators cached per mesh.

    Attributes
    ----------
    incidence : (E, T) csr matrix
        Full signed incidence: row e holds sgn(tau, e) for each face.
    grad : (E, T) csr matrix
        Incidence with boundary-edge rows zeroed; the gradient matrix.
    """

    def __init__(self, mesh):
        T, E = mesh.n_faces, mesh.n_edges
        rows = mesh.face_edges.ravel()
        cols = np.repeat(np.arange(T), 3)
        vals = mesh.face_edge_signs.ravel().astype(float)
        self.incidence = sp.csr_matrix((vals, (rows, cols)), shape=(E, T))
        mask = sp.diags((~mesh.boundary_edge).astype(float))
        self.grad = (mask @ self.incidence).tocsr()
        self.lengths = mesh.edge_lengths
        self.areas = mesh.face_areas


def operators(mesh):
    """Return the cached :class:`Operators` for a mesh."""
    if mesh._ops is None:
        mesh._ops = Operators(mesh)
    return mesh._ops


def _face_field(mesh, u, name="field"):
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[0] != mesh.n_faces:
        raise DimensionError(
            f"{name}: expected ({mesh.n_faces}, n) face field, got {u.shape}"
        )
    return u


def _edge_field(mesh, p, name="field"):
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if p.ndim != 2 or p.shape[0] != mesh.n_edges:
        raise DimensionError(
            f"{name}: expected ({mesh.n_edges}, n) edge field, got {p.shape}"
        )
    return p


def gradient(mesh, u):
    """Signed jump of a face field across each interior edge.

    Boundary edge rows are zero.
    """
    u = _face_field(mesh, u, "u")
    return operators(mesh).grad @ u


def divergence(mesh, p):
    """Divergence of an edge field: -(1/A) * sum of sgn-weighted p*l over
    the three edges of each face (boundary edges included)."""
    p = _edge_field(mesh, p, "p")
    ops = operators(mesh)
    return -(ops.incidence.T @ (ops.lengths[:, None] * p)) / ops.areas[:, None]


def laplace(mesh, u):
    """Face-based Laplacian: divergence of the gradient."""
    return divergence(mesh, gradient(mesh, u))


def inner_U(mesh, a, b):
    """Area-weighted inner product of two face fields."""
    a = _face_field(mesh, a, "a")
    b = _face_field(mesh, b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(mesh.face_areas[:, None] * a * b))


def inner_V(mesh, a, b):
    """Length-weighted inner product of two edge fields."""
    a = _edge_field(mesh, a, "a")
    b = _edge_field(mesh, b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(mesh.edge_lengths[:, None] * a * b))


def norm_U(mesh, a):
    return float(np.sqrt(max(inner_U(mesh, a, a), 0.0)))


def norm_V(mesh, a):
    return float(np.sqrt(max(inner_V(mesh, a, a), 0.0)))


def tv_energy(mesh, u):
    """First-order total variation: sum_e sum_i |(grad u)_ei| * l_e."""
    g = gradient(mesh, u)
    return float(np.sum(mesh.edge_lengths[:, None] * np.abs(g)))


def rtgv_value(mesh, u, v, alpha0):
    """Relaxed second-order TGV objective evaluated at a given edge field.

    Returns ``sum |grad u - v| * l  +  alpha0 * sum |div v| * A``.  The
    minimum over ``v`` is realized by the solver; this is the evaluator.
    """
    if alpha0 <= 0:
        raise ParameterError(f"alpha0 must be positive, got {alpha0}")
    u = _face_field(mesh, u, "u")
    v = _edge_field(mesh, v, "v")
    g = gradient(mesh, u)
    if g.shape != v.shape:
        raise DimensionError(f"shape mismatch: grad u {g.shape} vs v {v.shape}")
    first = np.sum(mesh.edge_lengths[:, None] * np.abs(g - v))
    second = np.sum(mesh.face_areas[:, None] * np.abs(divergence(mesh, v)))
    return float(first + alpha0 * second)
