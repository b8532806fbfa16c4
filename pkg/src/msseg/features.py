"""Normal-affinity face Laplacian and spectral feature fields.

The Laplacian couples edge-adjacent faces with weights
``w_ij = l_e * exp(-d(i,j) / dbar)`` where ``d`` is the squared distance
between (smoothed) unit normals and ``dbar`` its mean over interior
edges.  The segmentation input signal is built from the low end of its
spectrum.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .errors import DimensionError, FeatureError, NumericError
from .mesh import smoothed_normal, smoothed_normals

_DENSE_LIMIT = 3000


def normal_distance(mesh, tau_i, tau_j, ring="n2"):
    """Squared distance between the (smoothed) unit normals of two
    edge-adjacent faces; lies in [0, 4]."""
    shared = set(mesh.face_edges[tau_i]) & set(mesh.face_edges[tau_j])
    if tau_i == tau_j or not shared:
        raise DimensionError(f"faces {tau_i} and {tau_j} do not share an edge")
    ni = smoothed_normal(mesh, tau_i, ring)
    nj = smoothed_normal(mesh, tau_j, ring)
    return float(np.sum((ni - nj) ** 2))


def build_laplacian(mesh, ring="n2"):
    """Assemble the symmetric PSD face Laplacian with zero row sums.

    Off-diagonals are ``-w_ij`` for edge-adjacent face pairs.  On a
    perfectly flat mesh (mean normal distance below 1e-12) every
    exponential is taken as 1.
    """
    interior = np.nonzero(~mesh.boundary_edge)[0]
    if interior.size == 0:
        raise FeatureError("mesh has no interior edges; cannot build Laplacian")
    normals = smoothed_normals(mesh, ring) if ring != "raw" else mesh.face_normals
    fi = mesh.edge_faces[interior, 0]
    fj = mesh.edge_faces[interior, 1]
    d = np.sum((normals[fi] - normals[fj]) ** 2, axis=1)
    dbar = float(d.mean())
    lengths = mesh.edge_lengths[interior]
    if dbar < 1e-12:
        w = lengths.copy()
    else:
        w = lengths * np.exp(-d / dbar)

    T = mesh.n_faces
    rows = np.concatenate([fi, fj, fi, fj])
    cols = np.concatenate([fj, fi, fi, fj])
    vals = np.concatenate([-w, -w, w, w])
    return sp.csr_matrix((vals, (rows, cols)), shape=(T, T))


@dataclass
class FeatureField:
    """Spectral features: one column per retained eigenvector.

    ``values`` has ``n_segments - 1`` columns, each rescaled to unit
    area-weighted variance (the applied factors are kept in ``scales``).
    Eigenvectors have zero plain mean by construction, so rescaling
    preserves the eigenpair property recorded in ``eigenvalues``.
    """

    values: np.ndarray
    eigenvalues: np.ndarray
    scales: np.ndarray


def _indicator_bases(laplacian, n_faces):
    """Component-indicator structure of the face graph.

    Returns an orthonormal basis Q of the span of component indicators
    (the exact, uninformative-except-for-contrasts kernel) and the
    orthonormalized between-component contrasts (the informative part of
    that span, empty for a connected mesh).
    """
    adj = sp.csr_matrix(
        (np.ones(len(laplacian.data)), laplacian.indices, laplacian.indptr),
        shape=laplacian.shape,
    )
    n_comp, labels = connected_components(adj, directed=False)
    indicators = np.zeros((n_faces, n_comp))
    indicators[np.arange(n_faces), labels] = 1.0
    indicators /= np.linalg.norm(indicators, axis=0)
    # contrasts: Gram-Schmidt the indicators against the global constant,
    # in component order, for a deterministic basis
    contrasts = []
    prev = [np.full(n_faces, 1.0 / np.sqrt(n_faces))]
    for k in range(1, n_comp):
        x = indicators[:, k].copy()
        for b in prev:
            x -= b * (b @ x)
        x /= np.linalg.norm(x)
        prev.append(x)
        contrasts.append(x)
    contrasts = (
        np.column_stack(contrasts) if contrasts else np.zeros((n_faces, 0))
    )
    return indicators, contrasts


def feature_field(mesh, n_segments, ring="n2"):
    """Low-spectrum feature signal: ``n_segments - 1`` channels.

    The uninformative global-constant direction is skipped.  Remaining
    kernel directions of a disconnected mesh (piecewise constant per
    component) are kept first, followed by eigenvectors of increasing
    positive eigenvalue, with a deterministic sign (first entry of
    magnitude above tolerance is positive).
    """
    if n_segments < 2:
        raise FeatureError(f"need at least 2 segments, got {n_segments}")
    T = mesh.n_faces
    k_needed = n_segments - 1
    if k_needed >= T:
        raise FeatureError(
            f"{n_segments} segments need {k_needed} channels but mesh has "
            f"only {T} faces"
        )
    L = build_laplacian(mesh, ring)
    max_diag = float(L.diagonal().max())

    indicators, contrasts = _indicator_bases(L, T)
    n_comp = indicators.shape[1]

    channels = [contrasts[:, j] for j in range(min(n_comp - 1, k_needed))]
    eigvals = [0.0] * len(channels)
    vecs_needed = k_needed - len(channels)

    if vecs_needed > 0:
        # the indicator span contributes one (uninformative) kernel vector
        # per component on top of the channels we still need
        k_solve = min(T - 1, vecs_needed + n_comp + 2)
        if T <= _DENSE_LIMIT:
            w, V = np.linalg.eigh(L.toarray())
        else:
            sigma = -1e-6 * max(max_diag, 1.0)
            try:
                w, V = spla.eigsh(
                    L, k=k_solve, sigma=sigma, which="LM",
                    v0=np.full(T, 1.0 / np.sqrt(T)),
                )
            except (spla.ArpackNoConvergence, RuntimeError) as exc:
                raise NumericError(f"eigensolver failed to converge: {exc}")
            order = np.argsort(w)
            w, V = w[order], V[:, order]
        # keep eigenvectors outside the component-indicator span; the ones
        # inside it are the near-constant kernel directions (one per
        # component) whose informative contrasts are already channels
        kept = 0
        for idx in range(V.shape[1]):
            x = V[:, idx]
            outside = x - indicators @ (indicators.T @ x)
            if np.linalg.norm(outside) < 0.5:
                continue
            channels.append(x)
            eigvals.append(float(w[idx]))
            kept += 1
            if kept == vecs_needed:
                break
        if kept < vecs_needed:
            raise FeatureError(
                f"only {kept} informative eigenpairs available, "
                f"need {vecs_needed}"
            )

    values = np.column_stack(channels)
    eigvals = np.array(eigvals)

    # residual contract
    for j in range(values.shape[1]):
        x = values[:, j]
        res = np.linalg.norm(L @ x - eigvals[j] * x)
        if res > 1e-8 * np.linalg.norm(x):
            raise NumericError(
                f"eigen residual {res:.3e} exceeds tolerance for channel {j} "
                f"(eigenvalue {eigvals[j]:.6e})"
            )

    # unit area-weighted variance; sign: first sizable entry positive
    areas = mesh.face_areas
    total = areas.sum()
    scales = np.empty(values.shape[1])
    for j in range(values.shape[1]):
        x = values[:, j]
        mean = float(areas @ x) / total
        var = float(areas @ (x - mean) ** 2) / total
        s = 1.0 / np.sqrt(var) if var > 0 else 1.0
        x = x * s
        nz = np.nonzero(np.abs(x) > 1e-8 * np.abs(x).max())[0]
        if nz.size and x[nz[0]] < 0:
            x = -x
            s = -s
        values[:, j] = x
        scales[j] = s
    return FeatureField(values=values, eigenvalues=eigvals, scales=scales)


def dump_features(field, stream):
    """Write features as a plain text table, one row per face."""
    np.savetxt(stream, field.values, fmt="%.17g", delimiter=",")
