"""Tetrahedral 4D meshes, procedural 4-polytope primitives, 3D-surface lifting.

A TetraMesh4 stores solid 4D geometry as the closed 3-manifold of
tetrahedra bounding it (the same way a TriMesh3 stores a solid as its
triangle surface). Primitives are generated with face-compatible
decompositions so that every interior triangle is shared by exactly two
tetrahedra.
"""

from __future__ import annotations

import io
from enum import Enum
from itertools import permutations

import numpy as np

from .linalg import Transform4

DEGENERATE_MEASURE = 1e-12


def tetra_volumes_4d(vertices: np.ndarray, tetrahedra: np.ndarray) -> np.ndarray:
    """3-volume of each tetrahedron embedded in 4D (Gram determinant)."""
    if len(tetrahedra) == 0:
        return np.zeros(0)
    corners = vertices[tetrahedra]  # (M, 4, 4)
    edges = corners[:, 1:] - corners[:, :1]  # (M, 3, 4)
    gram = edges @ edges.transpose(0, 2, 1)
    det = np.linalg.det(gram)
    return np.sqrt(np.maximum(det, 0.0)) / 6.0


def triangle_areas_3d(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    if len(triangles) == 0:
        return np.zeros(0)
    a = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - a
    e2 = vertices[triangles[:, 2]] - a
    cx = e1[:, 1] * e2[:, 2] - e1[:, 2] * e2[:, 1]
    cy = e1[:, 2] * e2[:, 0] - e1[:, 0] * e2[:, 2]
    cz = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    return 0.5 * np.sqrt(cx * cx + cy * cy + cz * cz)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class TetraMesh4:
    """4D geometry as vertices (N, 4) and tetrahedron index quadruples (M, 4)."""

    def __init__(self, vertices, tetrahedra, vertex_colors=None):
        v = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 4)
        t = np.ascontiguousarray(tetrahedra, dtype=np.int64).reshape(-1, 4)
        if not np.all(np.isfinite(v)):
            raise ValueError("vertex coordinates must be finite")
        if len(t):
            if t.min() < 0 or t.max() >= len(v):
                raise ValueError("tetrahedron index out of range")
            sorted_rows = np.sort(t, axis=1)
            if np.any(sorted_rows[:, :-1] == sorted_rows[:, 1:]):
                raise ValueError("tetrahedron repeats a vertex index")
            volumes = tetra_volumes_4d(v, t)
            if volumes.min() <= DEGENERATE_MEASURE:
                bad = int(np.argmin(volumes))
                raise ValueError(
                    f"degenerate tetrahedron {bad} (3-volume {volumes[bad]:.3e})"
                )
        self.vertices = _freeze(v)
        self.tetrahedra = _freeze(t)
        if vertex_colors is not None:
            c = np.ascontiguousarray(vertex_colors, dtype=np.float64).reshape(-1, 4)
            if len(c) != len(v):
                raise ValueError("vertex_colors length must match vertices")
            vertex_colors = _freeze(c)
        self.vertex_colors = vertex_colors

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tetrahedra(self) -> int:
        return len(self.tetrahedra)

    def state_bytes(self) -> bytes:
        parts = [self.vertices.tobytes(), self.tetrahedra.tobytes()]
        if self.vertex_colors is not None:
            parts.append(self.vertex_colors.tobytes())
        return b"".join(parts)


class TriMesh3:
    """Projected 3D triangle mesh, the output of every 4D->3D projection."""

    def __init__(self, vertices=None, triangles=None, vertex_colors=None,
                 validate: bool = True):
        if vertices is None:
            vertices = np.zeros((0, 3))
        if triangles is None:
            triangles = np.zeros((0, 3), dtype=np.int64)
        v = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) and validate:
            if t.min() < 0 or t.max() >= len(v):
                raise ValueError("triangle index out of range")
            areas = triangle_areas_3d(v, t)
            if areas.min() <= DEGENERATE_MEASURE:
                bad = int(np.argmin(areas))
                raise ValueError(f"degenerate triangle {bad} (area {areas[bad]:.3e})")
        self.vertices = _freeze(v)
        self.triangles = _freeze(t)
        if vertex_colors is not None:
            c = np.ascontiguousarray(vertex_colors, dtype=np.float64).reshape(-1, 4)
            if len(c) != len(v):
                raise ValueError("vertex_colors length must match vertices")
            vertex_colors = _freeze(c)
        self.vertex_colors = vertex_colors

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def state_bytes(self) -> bytes:
        parts = [self.vertices.tobytes(), self.triangles.tobytes()]
        if self.vertex_colors is not None:
            parts.append(self.vertex_colors.tobytes())
        return b"".join(parts)

    def equals_bitwise(self, other: "TriMesh3") -> bool:
        return self.state_bytes() == other.state_bytes()


class PrimitiveKind(str, Enum):
    TESSERACT = "tesseract"
    PENTACHORON = "pentachoron"
    HEXADECACHORON = "hexadecachoron"
    HYPERSPHERE = "hypersphere"


def _oriented_normals(vertices: np.ndarray, tetrahedra: np.ndarray) -> np.ndarray:
    """Order-sensitive 4D normals of each tetrahedron's affine 3-plane."""
    corners = vertices[tetrahedra]
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    e3 = corners[:, 3] - corners[:, 0]
    # generalized cross product via cofactor expansion
    m01 = e2[:, 0] * e3[:, 1] - e2[:, 1] * e3[:, 0]
    m02 = e2[:, 0] * e3[:, 2] - e2[:, 2] * e3[:, 0]
    m03 = e2[:, 0] * e3[:, 3] - e2[:, 3] * e3[:, 0]
    m12 = e2[:, 1] * e3[:, 2] - e2[:, 2] * e3[:, 1]
    m13 = e2[:, 1] * e3[:, 3] - e2[:, 3] * e3[:, 1]
    m23 = e2[:, 2] * e3[:, 3] - e2[:, 3] * e3[:, 2]
    n = np.empty((len(tetrahedra), 4))
    n[:, 0] = e1[:, 1] * m23 - e1[:, 2] * m13 + e1[:, 3] * m12
    n[:, 1] = -(e1[:, 0] * m23 - e1[:, 2] * m03 + e1[:, 3] * m02)
    n[:, 2] = e1[:, 0] * m13 - e1[:, 1] * m03 + e1[:, 3] * m01
    n[:, 3] = -(e1[:, 0] * m12 - e1[:, 1] * m02 + e1[:, 2] * m01)
    return n


def _orient_tetrahedra(vertices: np.ndarray, tetrahedra: np.ndarray,
                       reference: np.ndarray) -> np.ndarray:
    """Swap tetra vertex pairs so each oriented normal agrees with reference."""
    normals = _oriented_normals(vertices, tetrahedra)
    flip = np.einsum("ij,ij->i", normals, reference) < 0.0
    out = tetrahedra.copy()
    out[flip, 2], out[flip, 3] = tetrahedra[flip, 3], tetrahedra[flip, 2]
    return out


def _orient_outward(vertices: np.ndarray, tetrahedra: np.ndarray) -> np.ndarray:
    """Orient a centered closed complex so normals point away from the origin."""
    centroids = vertices[tetrahedra].mean(axis=1)
    return _orient_tetrahedra(vertices, tetrahedra, centroids)


# The six Kuhn tetrahedra of a cube, as bit-triples of the three local axes.
# Each tetra walks from corner (0,0,0) to (1,1,1) adding one axis at a time;
# this splits every square face along the diagonal through its lowest-index
# corner, so adjacent cubes triangulate shared faces identically.
_KUHN_PATHS = [perm for perm in permutations(range(3))]


def _cube_tetrahedra(corner_index) -> list[tuple[int, int, int, int]]:
    """Six face-compatible tetrahedra of a cube.

    corner_index maps a local bit-triple (b0, b1, b2) to a global vertex id.
    """
    tets = []
    for path in _KUHN_PATHS:
        bits = [0, 0, 0]
        quad = [corner_index(tuple(bits))]
        for axis in path:
            bits[axis] = 1
            quad.append(corner_index(tuple(bits)))
        tets.append(tuple(quad))
    return tets


def _tesseract(size: float) -> TetraMesh4:
    h = size / 2.0
    # vertex id = binary code of (x, y, z, w) signs, 0 -> -h, 1 -> +h
    verts = np.array(
        [[(h if (i >> (3 - a)) & 1 else -h) for a in range(4)] for i in range(16)]
    )
    tets = []
    for axis in range(4):
        free = [a for a in range(4) if a != axis]
        for side in (0, 1):
            def corner_index(bits, axis=axis, side=side, free=free):
                code = side << (3 - axis)
                for a, b in zip(free, bits):
                    code |= b << (3 - a)
                return code

            tets.extend(_cube_tetrahedra(corner_index))
    tets = _orient_outward(verts, np.array(tets, dtype=np.int64))
    return TetraMesh4(verts, tets)


def _pentachoron(size: float) -> TetraMesh4:
    # regular 5-cell: four basis vectors plus s*(1,1,1,1) has all edges sqrt(2)
    s = (1.0 - np.sqrt(5.0)) / 4.0
    verts = np.vstack([np.eye(4), np.full((1, 4), s)])
    verts -= verts.mean(axis=0)
    verts *= size / np.sqrt(2.0)
    tets = np.array([[j for j in range(5) if j != i] for i in range(5)], dtype=np.int64)
    return TetraMesh4(verts, _orient_outward(verts, tets))


def _hexadecachoron(size: float) -> TetraMesh4:
    h = size / 2.0
    verts = np.vstack([h * np.eye(4), -h * np.eye(4)])  # +e_a at a, -e_a at a+4
    tets = []
    for signs in range(16):
        quad = [a if not (signs >> a) & 1 else a + 4 for a in range(4)]
        tets.append(quad)
    tets = _orient_outward(verts, np.array(tets, dtype=np.int64))
    return TetraMesh4(verts, tets)


def _subdivide_once(verts: np.ndarray, tets: np.ndarray):
    """Split each tetrahedron into 8 via edge midpoints (shared midpoints dedup)."""
    verts = list(map(tuple, verts))
    midpoint = {}

    def mid(i, j):
        key = (i, j) if i < j else (j, i)
        idx = midpoint.get(key)
        if idx is None:
            idx = len(verts)
            p = 0.5 * (np.array(verts[i]) + np.array(verts[j]))
            verts.append(tuple(p))
            midpoint[key] = idx
        return idx

    out = []
    for a, b, c, d in tets:
        ab, ac, ad = mid(a, b), mid(a, c), mid(a, d)
        bc, bd, cd = mid(b, c), mid(b, d), mid(c, d)
        out += [(a, ab, ac, ad), (b, ab, bc, bd), (c, ac, bc, cd), (d, ad, bd, cd)]
        # central octahedron: split along its shortest diagonal (ties by index)
        v = lambda i: np.array(verts[i])
        diagonals = [(ab, cd, (ac, bc, bd, ad)),
                     (ac, bd, (ab, bc, cd, ad)),
                     (ad, bc, (ab, bd, cd, ac))]
        lengths = [np.linalg.norm(v(p) - v(q)) for p, q, _ in diagonals]
        p, q, ring = diagonals[int(np.argmin(lengths))]
        for k in range(4):
            out.append((p, q, ring[k], ring[(k + 1) % 4]))
    return np.array(verts), np.array(out, dtype=np.int64)


def _hypersphere(radius: float, subdivision: int) -> TetraMesh4:
    base = _hexadecachoron(2.0)
    verts, tets = base.vertices.copy(), base.tetrahedra
    for _ in range(subdivision):
        verts, tets = _subdivide_once(verts, tets)
    norms = np.linalg.norm(verts, axis=1, keepdims=True)
    verts = verts * (radius / norms)
    return TetraMesh4(verts, _orient_outward(verts, tets))


def make_primitive(kind, size: float, subdivision: int = 0) -> TetraMesh4:
    """Construct a solid 4-polytope primitive centered at the origin.

    size is the axis extent for tesseract and hexadecachoron, the edge
    length for the pentachoron and the radius for the hypersphere, whose
    boundary resolution doubles per subdivision level.
    """
    kind = PrimitiveKind(kind)
    if not np.isfinite(size) or size <= 0.0:
        raise ValueError(f"size must be positive, got {size}")
    if subdivision < 0 or int(subdivision) != subdivision:
        raise ValueError(f"subdivision must be a small non-negative integer, got {subdivision}")
    if kind is PrimitiveKind.TESSERACT:
        return _tesseract(size)
    if kind is PrimitiveKind.PENTACHORON:
        return _pentachoron(size)
    if kind is PrimitiveKind.HEXADECACHORON:
        return _hexadecachoron(size)
    return _hypersphere(size, int(subdivision))


def extrude_lift(surface: TriMesh3, depth: float) -> TetraMesh4:
    """Lift a 3D triangle surface to a 4D slab spanning w in [0, depth].

    Each triangle becomes a prism split into 3 tetrahedra; prism quad faces
    are split along the diagonal from their lowest global vertex index, so
    adjacent prisms share compatible faces. Slicing the slab at any interior
    w reproduces the input surface.
    """
    if not np.isfinite(depth) or depth <= 0.0:
        raise ValueError(f"depth must be positive, got {depth}")
    if surface.is_empty:
        raise ValueError("cannot extrude an empty surface")
    n = surface.n_vertices
    bottom = np.hstack([surface.vertices, np.zeros((n, 1))])
    top = np.hstack([surface.vertices, np.full((n, 1), depth)])
    verts = np.vstack([bottom, top])
    tets = []
    tri_normals = []
    for tri in surface.triangles:
        i0, i1, i2 = sorted(int(i) for i in tri)
        tets += [
            (i0, i1, i2, i2 + n),
            (i0, i1, i2 + n, i1 + n),
            (i0, i1 + n, i2 + n, i0 + n),
        ]
        a, b, c = surface.vertices[tri]
        tri_normals += [np.cross(b - a, c - a)] * 3
    # orient every prism tetra to agree with its source triangle's winding
    reference = np.hstack([np.array(tri_normals), np.zeros((len(tets), 1))])
    tets = _orient_tetrahedra(verts, np.array(tets, dtype=np.int64), reference)
    colors = None
    if surface.vertex_colors is not None:
        colors = np.vstack([surface.vertex_colors, surface.vertex_colors])
    return TetraMesh4(verts, tets, colors)


def mesh_w_extent(mesh: TetraMesh4, transform: Transform4 | None = None):
    """(w_min, w_max) of the transformed vertices; the span is the hyper-depth."""
    if mesh.n_vertices == 0:
        raise ValueError("mesh has no vertices")
    if transform is None:
        w = mesh.vertices[:, 3]
    else:
        w = transform.apply_points(mesh.vertices)[:, 3]
    return float(w.min()), float(w.max())


def tetra_face_counts(tetrahedra: np.ndarray):
    """Unique triangle faces of a tetra complex and how many tetrahedra share each."""
    if len(tetrahedra) == 0:
        return np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=np.int64)
    corners = np.asarray(tetrahedra)
    faces = corners[:, [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]].reshape(-1, 3)
    faces = np.sort(faces, axis=1)
    return np.unique(faces, axis=0, return_counts=True)


# --- tmesh4 interchange format ---------------------------------------------
#
# Plain text: header "tmesh4 <n_verts> <n_tets>", one vertex per line
# (4 reals at 17 significant digits, round-trip exact for float64), then one
# tetrahedron per line (4 indices).


def dump_tmesh4(mesh: TetraMesh4) -> str:
    lines = [f"tmesh4 {mesh.n_vertices} {mesh.n_tetrahedra}"]
    for v in mesh.vertices:
        lines.append(" ".join(f"{c:.17g}" for c in v))
    for t in mesh.tetrahedra:
        lines.append(" ".join(str(int(i)) for i in t))
    return "\n".join(lines) + "\n"


def load_tmesh4(text: str) -> TetraMesh4:
    stream = io.StringIO(text)
    header = stream.readline().split()
    if len(header) != 3 or header[0] != "tmesh4":
        raise ValueError("not a tmesh4 document (bad header)")
    n_verts, n_tets = int(header[1]), int(header[2])
    verts = np.zeros((n_verts, 4))
    for i in range(n_verts):
        parts = stream.readline().split()
        if len(parts) != 4:
            raise ValueError(f"vertex line {i} malformed")
        verts[i] = [float(p) for p in parts]
    tets = np.zeros((n_tets, 4), dtype=np.int64)
    for i in range(n_tets):
        parts = stream.readline().split()
        if len(parts) != 4:
            raise ValueError(f"tetrahedron line {i} malformed")
        tets[i] = [int(p) for p in parts]
    return TetraMesh4(verts, tets)


def write_tmesh4(mesh: TetraMesh4, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_tmesh4(mesh))


def read_tmesh4(path) -> TetraMesh4:
    with open(path, "r", encoding="utf-8") as f:
        return load_tmesh4(f.read())
