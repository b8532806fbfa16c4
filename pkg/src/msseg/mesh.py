"""Triangle mesh loading and oriented incidence structure.

A :class:`TriMesh` stores, besides vertices and faces, one fixed direction
per edge (from the lower to the higher vertex index), the signed
face/edge incidence sgn(face, edge), face areas, edge lengths, unit face
normals and boundary flags.  All arrays are frozen after construction;
instances are safe to share between threads.
"""

import warnings

import numpy as np

from .errors import (
    DegenerateGeometryError,
    MeshFormatError,
    TopologyError,
)

RINGS = ("raw", "n1", "n2")


class TriMesh:
    """Immutable triangle mesh with oriented edge/face incidence.

    Parameters
    ----------
    vertices : (V, 3) array_like
        3D vertex positions.
    faces : (T, 3) array_like
        Vertex index triples; winding order defines face orientation.

    Attributes
    ----------
    vertices : (V, 3) float array
    faces : (T, 3) int array
    edges : (E, 2) int array
        Endpoint indices; each row is (low, high), which fixes the edge
        direction low -> high.
    face_edges : (T, 3) int array
        Edge index of each face side, ordered as (v0,v1), (v1,v2), (v2,v0).
    face_edge_signs : (T, 3) int array
        +1 where the stored edge direction agrees with the face's
        counterclockwise boundary traversal, -1 otherwise.
    edge_faces : (E, 2) int array
        Incident face indices, -1 padding for boundary edges.
    boundary_edge : (E,) bool array
    face_areas : (T,) float array
    edge_lengths : (E,) float array
    face_normals : (T, 3) float array
        Unit normals following winding order.
    """

    def __init__(self, vertices, faces):
        vertices = np.asarray(vertices, dtype=float)
        faces = np.asarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise TopologyError("vertices must be an (V, 3) array")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise TopologyError("faces must be an (T, 3) array of vertex triples")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise TopologyError("face vertex index out of range")
        for t, (a, b, c) in enumerate(faces):
            if a == b or b == c or a == c:
                raise TopologyError(f"face {t} has repeated vertices")

        self.vertices = vertices
        self.faces = faces
        self._build_incidence()
        self._build_geometry()
        self._neigh1 = None
        self._neigh2 = None
        self._ops = None
        for arr in (self.vertices, self.faces, self.edges, self.face_edges,
                    self.face_edge_signs, self.edge_faces, self.boundary_edge,
                    self.face_areas, self.edge_lengths, self.face_normals):
            arr.setflags(write=False)

    # -- construction ------------------------------------------------------

    def _build_incidence(self):
        faces = self.faces
        edge_index = {}
        edges = []
        face_edges = np.empty((len(faces), 3), dtype=np.int64)
        face_signs = np.empty((len(faces), 3), dtype=np.int64)
        edge_faces = []
        for t, (a, b, c) in enumerate(faces):
            for s, (u, v) in enumerate(((a, b), (b, c), (c, a))):
                key = (u, v) if u < v else (v, u)
                e = edge_index.get(key)
                if e is None:
                    e = len(edges)
                    edge_index[key] = e
                    edges.append(key)
                    edge_faces.append([])
                if len(edge_faces[e]) >= 2:
                    raise TopologyError(
                        f"edge {key} is non-manifold (3 or more incident faces)"
                    )
                edge_faces[e].append(t)
                face_edges[t, s] = e
                face_signs[t, s] = 1 if (u, v) == key else -1

        self.edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        self.face_edges = face_edges
        self.face_edge_signs = face_signs
        ef = np.full((len(edges), 2), -1, dtype=np.int64)
        for e, fl in enumerate(edge_faces):
            ef[e, : len(fl)] = fl
        self.edge_faces = ef
        self.boundary_edge = ef[:, 1] < 0

        # Interior edges whose two faces carry equal signs reveal
        # inconsistent winding; report, do not repair.
        bad = []
        for e in np.nonzero(~self.boundary_edge)[0]:
            f0, f1 = ef[e]
            s0 = face_signs[f0, face_edges[f0] == e][0]
            s1 = face_signs[f1, face_edges[f1] == e][0]
            if s0 == s1:
                bad.append(e)
        if bad:
            warnings.warn(
                f"{len(bad)} interior edge(s) with inconsistent face winding "
                f"(first: edge {bad[0]})",
                RuntimeWarning,
            )

    def _build_geometry(self):
        v = self.vertices
        p0, p1, p2 = (v[self.faces[:, i]] for i in range(3))
        cross = np.cross(p1 - p0, p2 - p0)
        cnorm = np.linalg.norm(cross, axis=1)
        scale = np.linalg.norm(p1 - p0, axis=1) * np.linalg.norm(p2 - p0, axis=1)
        bad = np.nonzero(cnorm <= 1e-14 * np.maximum(scale, 1e-300))[0]
        if bad.size:
            raise DegenerateGeometryError(f"face {bad[0]} has zero area")
        self.face_areas = 0.5 * cnorm
        self.face_normals = cross / cnorm[:, None]
        d = v[self.edges[:, 1]] - v[self.edges[:, 0]]
        self.edge_lengths = np.linalg.norm(d, axis=1)

    # -- counts ------------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        return len(self.edges)

    # -- neighborhoods -----------------------------------------------------

    def neighborhood(self, tau, ring):
        """Face indices of the chosen neighborhood of face ``tau``.

        ``"raw"`` is just ``{tau}``, ``"n1"`` adds the edge-adjacent faces
        and ``"n2"`` the vertex-adjacent ones.  The face itself is always
        included.
        """
        if ring not in RINGS:
            raise ValueError(f"ring must be one of {RINGS}, got {ring!r}")
        if not 0 <= tau < self.n_faces:
            raise IndexError(f"face index {tau} out of range")
        if ring == "raw":
            return np.array([tau], dtype=np.int64)
        table = self._n1_table() if ring == "n1" else self._n2_table()
        return table[tau]

    def _n1_table(self):
        if self._neigh1 is None:
            lists = [{t} for t in range(self.n_faces)]
            for e in np.nonzero(~self.boundary_edge)[0]:
                f0, f1 = self.edge_faces[e]
                lists[f0].add(f1)
                lists[f1].add(f0)
            self._neigh1 = [np.array(sorted(s), dtype=np.int64) for s in lists]
        return self._neigh1

    def _n2_table(self):
        if self._neigh2 is None:
            vert_faces = [[] for _ in range(self.n_vertices)]
            for t, f in enumerate(self.faces):
                for vid in f:
                    vert_faces[vid].append(t)
            lists = []
            for t, f in enumerate(self.faces):
                s = {t}
                for vid in f:
                    s.update(vert_faces[vid])
                lists.append(np.array(sorted(s), dtype=np.int64))
            self._neigh2 = lists
        return self._neigh2


def smoothed_normal(mesh, tau, ring="n2"):
    """Area-weighted average normal over a face neighborhood, unit length.

    Raises
    ------
    DegenerateGeometryError
        If the averaged vector has norm below 1e-12.
    """
    nb = mesh.neighborhood(tau, ring)
    avg = (mesh.face_areas[nb, None] * mesh.face_normals[nb]).sum(axis=0)
    norm = np.linalg.norm(avg)
    if norm < 1e-12:
        raise DegenerateGeometryError(
            f"averaged normal of face {tau} (ring {ring}) is degenerate"
        )
    return avg / norm


def smoothed_normals(mesh, ring="n2"):
    """Smoothed unit normals for every face, one row per face."""
    out = np.empty_like(mesh.face_normals)
    for tau in range(mesh.n_faces):
        out[tau] = smoothed_normal(mesh, tau, ring)
    return out


# -- file formats ----------------------------------------------------------


def _as_text(source):
    if isinstance(source, bytes):
        return source.decode("utf-8", errors="replace")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    return data


def _strip(line):
    return line.split("#", 1)[0].strip()


def load_off(source):
    """Parse an OFF byte stream into a :class:`TriMesh`."""
    lines = _as_text(source).splitlines()
    rows = [(i + 1, _strip(ln)) for i, ln in enumerate(lines)]
    rows = [(n, ln) for n, ln in rows if ln]
    if not rows:
        raise MeshFormatError("empty OFF file")
    n, header = rows[0]
    body = rows[1:]
    if header != "OFF":
        # counts may share the header line: "OFF 8 6 0"
        if header.startswith("OFF"):
            body = [(n, header[3:].strip())] + body
        else:
            raise MeshFormatError("missing OFF header", line=n)
    if not body:
        raise MeshFormatError("missing counts line")
    n, counts = body[0]
    parts = counts.split()
    if len(parts) < 2:
        raise MeshFormatError("expected vertex/face counts", line=n)
    try:
        nv, nf = int(parts[0]), int(parts[1])
    except ValueError:
        raise MeshFormatError("bad counts line", line=n) from None

    body = body[1:]
    if len(body) < nv + nf:
        raise MeshFormatError(f"expected {nv} vertex and {nf} face lines")
    verts = np.empty((nv, 3))
    for i in range(nv):
        n, ln = body[i]
        parts = ln.split()
        try:
            verts[i] = [float(parts[0]), float(parts[1]), float(parts[2])]
        except (ValueError, IndexError):
            raise MeshFormatError("bad vertex line", line=n) from None
    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        n, ln = body[nv + i]
        parts = ln.split()
        try:
            cnt = int(parts[0])
            idx = [int(x) for x in parts[1 : 1 + cnt]]
        except (ValueError, IndexError):
            raise MeshFormatError("bad face line", line=n) from None
        if cnt != 3 or len(idx) != 3:
            raise TopologyError(f"line {n}: only triangle faces are supported")
        faces[i] = idx
    return TriMesh(verts, faces)


def load_obj(source):
    """Parse a Wavefront OBJ byte stream (v/f records only, 1-based)."""
    verts = []
    faces = []
    for n, raw in enumerate(_as_text(source).splitlines(), start=1):
        ln = _strip(raw)
        if not ln:
            continue
        parts = ln.split()
        tag = parts[0]
        if tag == "v":
            try:
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except (ValueError, IndexError):
                raise MeshFormatError("bad vertex line", line=n) from None
        elif tag == "f":
            refs = parts[1:]
            if len(refs) != 3:
                raise TopologyError(
                    f"line {n}: only triangle faces are supported"
                )
            idx = []
            for ref in refs:
                head = ref.split("/", 1)[0]
                try:
                    i = int(head)
                except ValueError:
                    raise MeshFormatError("bad face line", line=n) from None
                if i < 1:
                    raise MeshFormatError(
                        "only positive 1-based indices supported", line=n
                    )
                idx.append(i - 1)
            faces.append(idx)
        # normals, texcoords, materials and groups are ignored
    if not verts:
        raise MeshFormatError("no vertices in OBJ input")
    return TriMesh(np.array(verts), np.array(faces, dtype=np.int64).reshape(-1, 3))


def load_mesh(source, fmt):
    """Load a TriMesh from OFF or OBJ bytes/text."""
    fmt = fmt.lower()
    if fmt == "off":
        return load_off(source)
    if fmt == "obj":
        return load_obj(source)
    raise MeshFormatError(f"unsupported format {fmt!r}")


def load_mesh_file(path):
    """Load a mesh file, inferring the format from the extension."""
    path = str(path)
    fmt = path.rsplit(".", 1)[-1].lower()
    with open(path, "rb") as fh:
        return load_mesh(fh.read(), fmt)
