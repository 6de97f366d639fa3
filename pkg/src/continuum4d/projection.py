"""The 4D -> 3D stage: hyperplane cross-section and frustum projection.

Both projectors emit TriMesh3 in the projecting camera's local frame
(cross-section: plane-local xyz of the w=0 subspace; frustum: camera-local
scaled xyz). project_node places the result back into world coordinates so
the ordinary 3D camera applies its own view transform exactly once.

Winding rule for cross-section triangles: each triangle is wound so its
normal points toward the in-plane projection of the positive-local-w part
of the source tetrahedron; when that projection is degenerate (the
tetrahedron projects flat onto the slice space) the sign falls back to the
tetrahedron's own oriented 4D normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .linalg import (
    Hyperplane,
    Pose4,
    Rotation4,
    Transform4,
    Vec4,
)
from .meshes import (
    DEGENERATE_MEASURE,
    TetraMesh4,
    TriMesh3,
    tetra_volumes_4d,
    triangle_areas_3d,
)

ONPLANE_EPS = 1e-12
WELD_DECIMALS = 9


def cross4(u: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Generalized cross product of three 4D vectors (batched over axis 0)."""
    u0, u1, u2, u3 = np.moveaxis(u, -1, 0)
    v0, v1, v2, v3 = np.moveaxis(v, -1, 0)
    w0, w1, w2, w3 = np.moveaxis(w, -1, 0)
    m01 = v0 * w1 - v1 * w0
    m02 = v0 * w2 - v2 * w0
    m03 = v0 * w3 - v3 * w0
    m12 = v1 * w2 - v2 * w1
    m13 = v1 * w3 - v3 * w1
    m23 = v2 * w3 - v3 * w2
    a0 = u1 * m23 - u2 * m13 + u3 * m12
    a1 = -(u0 * m23 - u2 * m03 + u3 * m02)
    a2 = u0 * m13 - u1 * m03 + u3 * m01
    a3 = -(u0 * m12 - u1 * m02 + u2 * m01)
    return np.stack([a0, a1, a2, a3], axis=-1)


class ProjectionMode(str, Enum):
    CROSS_SECTION = "cross_section"
    FRUSTUM = "frustum"


class SyncMode(str, Enum):
    SYNCED = "synced"
    DETACHED = "detached"


@dataclass(frozen=True)
class Camera4:
    """4D projector: pose plus projection mode and frustum parameters."""

    pose: Pose4 = Pose4()
    mode: ProjectionMode = ProjectionMode.CROSS_SECTION
    focal: float = 2.0
    near_w: float = 0.1

    def __post_init__(self):
        if not (self.focal > 0.0):
            raise ValueError(f"focal must be positive, got {self.focal}")
        if not (0.0 < self.near_w < self.focal):
            raise ValueError(f"near_w must lie in (0, focal), got {self.near_w}")

    def slice_plane(self) -> Hyperplane:
        return Hyperplane(self.pose)


@dataclass(frozen=True)
class Pose3:
    """3D camera pose: position and orthonormal column-orientation."""

    position: tuple = (0.0, 0.0, 0.0)
    orientation: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

    def matrix(self) -> np.ndarray:
        return np.array(self.orientation, dtype=np.float64)

    def pos_array(self) -> np.ndarray:
        return np.array(self.position, dtype=np.float64)


@dataclass(frozen=True)
class OrbitState:
    """Orbital 4D-camera state: circle in the span of the initial view
    direction and the w axis, centered on the focus point."""

    focus: Vec4
    radius: float
    angle: float = 0.0
    initial_dir: Vec4 = Vec4(0.0, 0.0, 1.0, 0.0)


@dataclass(frozen=True)
class CameraRig:
    cam4: Camera4 = Camera4()
    cam3_pose: Pose3 = Pose3()
    sync: SyncMode = SyncMode.SYNCED
    orbit: OrbitState | None = None


@dataclass(frozen=True)
class SlicePolygon:
    """Intersection of one tetrahedron with a hyperplane: empty, tri or quad."""

    vertices: np.ndarray  # (k, 3) plane-local points, k in {0, 3, 4}
    source_tetra: int = -1

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0


def embed_rotation3(m3: np.ndarray) -> Rotation4:
    """Lift a 3x3 orientation to a 4D rotation fixing the w axis."""
    m = np.eye(4)
    m[:3, :3] = np.asarray(m3, dtype=np.float64)
    return Rotation4(m)


def synced_camera4(cam3: Pose3, w: float, template: Camera4) -> Camera4:
    """The 4D camera sharing the 3D camera's rototranslation, slicing at w."""
    px, py, pz = cam3.position
    pose = Pose4(Vec4(px, py, pz, w), embed_rotation3(cam3.matrix()))
    return replace(template, pose=pose)


# --- single-tetra slicing ----------------------------------------------------


def slice_tetra(p0: Vec4, p1: Vec4, p2: Vec4, p3: Vec4, plane: Hyperplane,
                source_tetra: int = -1) -> SlicePolygon:
    """Slice one tetrahedron by a hyperplane into a triangle or quadrilateral.

    Vertices within 1e-12 of the plane are nudged to the positive side
    before classification, so touching geometry resolves deterministically.
    """
    pts = np.array([p.to_array() for p in (p0, p1, p2, p3)])
    if tetra_volumes_4d(pts, np.array([[0, 1, 2, 3]]))[0] <= DEGENERATE_MEASURE:
        raise ValueError("degenerate tetrahedron")
    local = plane.pose.world_to_local(pts)
    w = local[:, 3].copy()
    w[np.abs(w) < ONPLANE_EPS] += ONPLANE_EPS
    positive = w > 0.0
    npos = int(positive.sum())
    if npos == 0 or npos == 4:
        return SlicePolygon(np.zeros((0, 3)), source_tetra)

    def crossing(i, j):
        t = w[i] / (w[i] - w[j])
        return local[i, :3] + t * (local[j, :3] - local[i, :3])

    order = np.argsort(positive, kind="stable")
    if npos in (1, 3):
        lone = order[3] if npos == 1 else order[0]
        rest = order[0:3] if npos == 1 else order[1:4]
        tri = np.array([crossing(lone, j) for j in rest])
        tri = _orient_polygon(tri, local, positive)
        return SlicePolygon(tri, source_tetra)
    n0, n1, pos0, pos1 = order
    quad = np.array([
        crossing(pos0, n0), crossing(pos0, n1),
        crossing(pos1, n1), crossing(pos1, n0),
    ])
    quad = _orient_polygon(quad, local, positive)
    return SlicePolygon(quad, source_tetra)


def _orient_polygon(poly: np.ndarray, local: np.ndarray, positive: np.ndarray) -> np.ndarray:
    """Flip polygon order so its normal follows the winding rule."""
    normal = np.cross(poly[1] - poly[0], poly[2] - poly[0])
    d = local[positive, :3].mean(axis=0) - local[~positive, :3].mean(axis=0)
    side = normal @ d
    if abs(side) <= 1e-12 * (np.linalg.norm(normal) * np.linalg.norm(d) + 1e-300):
        n4 = cross4(local[1] - local[0], local[2] - local[0], local[3] - local[0])
        side = normal @ n4[:3]
    if side < 0.0:
        poly = poly[::-1].copy()
    return poly


# --- whole-mesh cross-section (vectorized) -----------------------------------


# classification tables over the 4-bit sign pattern of a tetra's vertices:
# stable argsort order (negative-side slots first) and positive count
_SIGN_ORDER = np.array(
    [sorted(range(4), key=lambda s, c=c: (c >> s) & 1) for c in range(16)],
    dtype=np.int64)
_SIGN_NPOS = np.array([bin(c).count("1") for c in range(16)], dtype=np.int8)
_QUAD_SPLIT_A = np.array([[0, 1, 2], [0, 1, 3]], dtype=np.int64)
_QUAD_SPLIT_B = np.array([[0, 2, 3], [1, 2, 3]], dtype=np.int64)


def _slice_arrays(local: np.ndarray, tets: np.ndarray, colors):
    """Marching-tetrahedra core: emitted triangles in plane-local coords.

    Returns (points (K,3,3), edge_keys (K,3), colors or None) with winding
    applied. Each polygon corner lies on one tetra edge; the packed edge
    key identifies it exactly, so corners shared between adjacent
    tetrahedra weld by construction.
    """
    w = local[:, 3].copy()
    near = np.abs(w) < ONPLANE_EPS
    if near.any():
        w[near] += ONPLANE_EPS
    xyz = local[:, :3]
    nv = len(local)

    tw_pos = w[tets] > 0.0
    code = (tw_pos[:, 0] + tw_pos[:, 1] * 2 + tw_pos[:, 2] * 4
            + tw_pos[:, 3] * np.uint8(8))
    npos = _SIGN_NPOS[code]
    tri_rows = np.flatnonzero((npos == 1) | (npos == 3))
    quad_rows = np.flatnonzero(npos == 2)
    empty_pts = np.zeros((0, 3, 3))
    empty_keys = np.zeros((0, 3), dtype=np.int64)
    empty_cols = np.zeros((0, 3, 4)) if colors is not None else None
    if len(tri_rows) == 0 and len(quad_rows) == 0:
        return empty_pts, empty_keys, empty_cols

    def interp(gi, gj):
        """Crossing points for edge arrays gi, gj of equal shape."""
        wi = w[gi]
        t = (wi / (wi - w[gj]))[..., None]
        a = xyz[gi]
        pts = a + t * (xyz[gj] - a)
        keys = np.minimum(gi, gj).astype(np.int64) * nv + np.maximum(gi, gj)
        cols = None
        if colors is not None:
            ca = colors[gi]
            cols = ca + t * (colors[gj] - ca)
        return pts, keys, cols

    def flip_rows(poly_pts, poly_keys, poly_cols, d):
        """Reverse polygons whose normal points away from d (the projected
        positive-w side); degenerate projections fall back to the source
        tetra's oriented 4D normal."""
        e1 = poly_pts[:, 1] - poly_pts[:, 0]
        e2 = poly_pts[:, 2] - poly_pts[:, 0]
        nx = e1[:, 1] * e2[:, 2] - e1[:, 2] * e2[:, 1]
        ny = e1[:, 2] * e2[:, 0] - e1[:, 0] * e2[:, 2]
        nz = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        side = nx * d[:, 0] + ny * d[:, 1] + nz * d[:, 2]
        weak = np.abs(side) <= 1e-12 * (
            np.sqrt(nx * nx + ny * ny + nz * nz)
            * np.sqrt((d * d).sum(axis=1)) + 1e-300)
        return side, weak, np.stack([nx, ny, nz], axis=1)

    out_pts = []
    out_keys = []
    out_cols = []

    if len(tri_rows):
        one = npos[tri_rows] == 1
        order = _SIGN_ORDER[code[tri_rows]]  # negatives first, stable
        lone = np.where(one, order[:, 3], order[:, 0])
        rest = np.where(one[:, None], order[:, 0:3], order[:, 1:4])
        t = tets[tri_rows]
        gl = np.take_along_axis(t, lone[:, None], axis=1)
        gr = np.take_along_axis(t, rest, axis=1)
        pts, keys, cols = interp(np.broadcast_to(gl, gr.shape), gr)
        # positive-side direction: lone vertex vs the mean of the others,
        # signed by which side the lone vertex is on
        q_l = xyz[np.take_along_axis(t, lone[:, None], axis=1)[:, 0]]
        q_r = xyz[gr].mean(axis=1)
        d = (q_l - q_r) * np.where(one, 1.0, -1.0)[:, None]
        side, weak, _ = flip_rows(pts, keys, cols, d)
        if weak.any():
            n4 = _tetra_normals_xyz(local, t[weak])
            side = side.copy()
            e1 = pts[weak, 1] - pts[weak, 0]
            e2 = pts[weak, 2] - pts[weak, 0]
            nrm = np.cross(e1, e2)
            side[weak] = np.einsum("ij,ij->i", nrm, n4)
        flip = side < 0.0
        if flip.any():
            pts[flip] = pts[flip][:, ::-1]
            keys[flip] = keys[flip][:, ::-1]
            if cols is not None:
                cols[flip] = cols[flip][:, ::-1]
        out_pts.append(pts)
        out_keys.append(keys)
        out_cols.append(cols)

    if len(quad_rows):
        order = _SIGN_ORDER[code[quad_rows]]
        t = tets[quad_rows]
        take = lambda idx: np.take_along_axis(t, idx[:, None], axis=1)[:, 0]
        n0, n1 = take(order[:, 0]), take(order[:, 1])
        p0, p1 = take(order[:, 2]), take(order[:, 3])
        a = np.stack([p0, p0, p1, p1], axis=1)
        b = np.stack([n0, n1, n1, n0], axis=1)
        quad, qkeys, qcols = interp(a, b)
        d = 0.5 * (xyz[p0] + xyz[p1]) - 0.5 * (xyz[n0] + xyz[n1])
        side, weak, _ = flip_rows(quad, qkeys, qcols, d)
        if weak.any():
            n4 = _tetra_normals_xyz(local, t[weak])
            e1 = quad[weak, 1] - quad[weak, 0]
            e2 = quad[weak, 2] - quad[weak, 0]
            nrm = np.cross(e1, e2)
            side = side.copy()
            side[weak] = np.einsum("ij,ij->i", nrm, n4)
        flip = side < 0.0
        if flip.any():
            quad[flip] = quad[flip][:, ::-1]
            qkeys[flip] = qkeys[flip][:, ::-1]
            if qcols is not None:
                qcols[flip] = qcols[flip][:, ::-1]
        # split along the shorter diagonal: slot patterns per quad
        diff02 = quad[:, 0] - quad[:, 2]
        diff13 = quad[:, 1] - quad[:, 3]
        use02 = np.einsum("ij,ij->i", diff02, diff02) <= np.einsum(
            "ij,ij->i", diff13, diff13)
        slots_a = np.where(use02[:, None], _QUAD_SPLIT_A[0], _QUAD_SPLIT_A[1])
        slots_b = np.where(use02[:, None], _QUAD_SPLIT_B[0], _QUAD_SPLIT_B[1])
        q = len(quad)
        tris = np.empty((2 * q, 3, 3))
        tkeys = np.empty((2 * q, 3), dtype=np.int64)
        tris[0::2] = np.take_along_axis(quad, slots_a[:, :, None], axis=1)
        tris[1::2] = np.take_along_axis(quad, slots_b[:, :, None], axis=1)
        tkeys[0::2] = np.take_along_axis(qkeys, slots_a, axis=1)
        tkeys[1::2] = np.take_along_axis(qkeys, slots_b, axis=1)
        tcols = None
        if qcols is not None:
            tcols = np.empty((2 * q, 3, 4))
            tcols[0::2] = np.take_along_axis(qcols, slots_a[:, :, None], axis=1)
            tcols[1::2] = np.take_along_axis(qcols, slots_b[:, :, None], axis=1)
        out_pts.append(tris)
        out_keys.append(tkeys)
        out_cols.append(tcols)

    pts = np.concatenate(out_pts, axis=0) if len(out_pts) > 1 else out_pts[0]
    keys = np.concatenate(out_keys, axis=0) if len(out_keys) > 1 else out_keys[0]
    cols = None
    if colors is not None:
        cols = (np.concatenate(out_cols, axis=0) if len(out_cols) > 1
                else out_cols[0])
    return pts, keys, cols


def _tetra_normals_xyz(local: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """xyz part of the oriented 4D normals of the given tetra index rows."""
    corners = local[rows]
    n4 = cross4(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0],
                corners[:, 3] - corners[:, 0])
    return n4[:, :3]


def _weld_by_edge(points: np.ndarray, keys: np.ndarray, colors):
    """Merge corners that came from the same tetra edge (bitwise-identical
    coordinates by construction). Exact and cheap: one int64 unique."""
    flat_keys = keys.reshape(-1)
    uniq, first, inverse = np.unique(flat_keys, return_index=True,
                                     return_inverse=True)
    verts = points.reshape(-1, 3)[first]
    vcols = colors.reshape(-1, 4)[first] if colors is not None else None
    tris = inverse.reshape(-1, 3).astype(np.int64)
    ok = (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) \
        & (tris[:, 0] != tris[:, 2])
    tris = tris[ok]
    if len(tris):
        areas = triangle_areas_3d(verts, tris)
        tris = tris[areas > DEGENERATE_MEASURE]
    if len(tris) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), None
    used = np.zeros(len(verts), dtype=bool)
    used[tris] = True
    remap = np.cumsum(used) - 1
    return verts[used], remap[tris], (vcols[used] if vcols is not None else None)


def _weld_by_grid(verts: np.ndarray, tris: np.ndarray, vcols):
    """Merge distinct-edge vertices that coincide on the 1e-9 weld grid."""
    keys = np.round(verts * 10.0 ** WELD_DECIMALS).astype(np.int64)
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    sk = keys[order]
    first = np.empty(len(sk), dtype=bool)
    if len(sk) == 0:
        return verts, tris, vcols
    first[0] = True
    first[1:] = (sk[1:] != sk[:-1]).any(axis=1)
    group = np.cumsum(first) - 1
    inverse = np.empty(len(keys), dtype=np.int64)
    inverse[order] = group
    uniq = sk[first].astype(np.float64) / 10.0 ** WELD_DECIMALS
    ucols = vcols[order][first] if vcols is not None else None
    tris = inverse[tris]
    ok = (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) \
        & (tris[:, 0] != tris[:, 2])
    tris = tris[ok]
    if len(tris):
        areas = triangle_areas_3d(uniq, tris)
        tris = tris[areas > DEGENERATE_MEASURE]
    if len(tris) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), None
    used = np.zeros(len(uniq), dtype=bool)
    used[tris] = True
    remap = np.cumsum(used) - 1
    return uniq[used], remap[tris], (ucols[used] if ucols is not None else None)


def cross_section(mesh: TetraMesh4, model: Transform4, plane: Hyperplane,
                  *, simplify: bool = True) -> TriMesh3:
    """Slice a 4D mesh with a hyperplane into a plane-local 3D triangle mesh.

    Every tetrahedron is sliced independently, quads are split along their
    shorter diagonal, and coincident corners are welded at 1e-9. With
    simplify=True (the default) vertices that the tetrahedralization
    introduced inside flat regions (coplanar fans and straight creases) are
    removed, so convex slices come out with their true polytope vertices
    only; simplify=False returns the raw marching output, which is what the
    benchmark times.
    """
    linear = model.linear()
    offset = model.translation.to_array() - plane.pose.translation.to_array()
    pm = plane.pose.rotation.m
    local = mesh.vertices @ (pm.T @ linear).T + offset @ pm
    points, keys, colors = _slice_arrays(local, mesh.tetrahedra, mesh.vertex_colors)
    if len(points) == 0:
        return TriMesh3()
    verts, tris, vcols = _weld_by_edge(points, keys, colors)
    if len(tris) == 0:
        return TriMesh3()
    if simplify:
        verts, tris, vcols = _weld_by_grid(verts, tris, vcols)
        if len(tris) == 0:
            return TriMesh3()
        verts, tris, vcols = _simplify_flat_vertices(verts, tris, vcols)
    return TriMesh3(verts, tris, vcols, validate=False)


# --- flat-vertex simplification ----------------------------------------------


def _polygon_convex_planar(pts, eps):
    """Convexity of a closed loop (collinear corners allowed, either
    orientation), with planarity; returns the turn magnitudes for rooting."""
    m = len(pts)
    # Newell normal
    nx = ny = nz = 0.0
    for i in range(m):
        ax, ay, az = pts[i]
        bx, by, bz = pts[(i + 1) % m]
        nx += (ay - by) * (az + bz)
        ny += (az - bz) * (ax + bx)
        nz += (ax - bx) * (ay + by)
    ln = math.sqrt(nx * nx + ny * ny + nz * nz)
    if ln < 1e-18:
        return None
    nx, ny, nz = nx / ln, ny / ln, nz / ln
    ox, oy, oz = pts[0]
    for x, y, z in pts:
        if abs((x - ox) * nx + (y - oy) * ny + (z - oz) * nz) > eps:
            return None
    turns = []
    pos = neg = False
    for i in range(m):
        ax, ay, az = pts[i - 1]
        bx, by, bz = pts[i]
        cx, cy, cz = pts[(i + 1) % m]
        e0 = (bx - ax, by - ay, bz - az)
        e1 = (cx - bx, cy - by, cz - bz)
        tx = e0[1] * e1[2] - e0[2] * e1[1]
        ty = e0[2] * e1[0] - e0[0] * e1[2]
        tz = e0[0] * e1[1] - e0[1] * e1[0]
        t = tx * nx + ty * ny + tz * nz
        turns.append(t)
        pos = pos or t > eps
        neg = neg or t < -eps
    if pos and neg:
        return None
    return turns


def _fan(loop, pts, ref_normal, eps):
    """Fan-triangulate a convex loop from loop[0], wound toward ref_normal.

    Weld-grid slivers (deviation below eps off a fan edge) are dropped; the
    coverage they carry is below the weld tolerance by construction.
    """
    tris = []
    ax, ay, az = pts[loop[0]]
    rx, ry, rz = ref_normal
    for k in range(1, len(loop) - 1):
        bx, by, bz = pts[loop[k]]
        cx, cy, cz = pts[loop[k + 1]]
        ux, uy, uz = bx - ax, by - ay, bz - az
        vx, vy, vz = cx - ax, cy - ay, cz - az
        nx = uy * vz - uz * vy
        ny = uz * vx - ux * vz
        nz = ux * vy - uy * vx
        area = 0.5 * math.sqrt(nx * nx + ny * ny + nz * nz)
        emax = max(ux * ux + uy * uy + uz * uz, vx * vx + vy * vy + vz * vz,
                   (vx - ux) ** 2 + (vy - uy) ** 2 + (vz - uz) ** 2) ** 0.5
        if area <= max(DEGENERATE_MEASURE, 2.0 * eps * emax):
            continue
        if nx * rx + ny * ry + nz * rz < 0.0:
            tris.append((loop[0], loop[k + 1], loop[k]))
        else:
            tris.append((loop[0], loop[k], loop[k + 1]))
    return tris


def _simplify_flat_vertices(verts: np.ndarray, tris: np.ndarray, vcols):
    """Remove tessellation vertices interior to flat patches.

    Handles two local cases, both region-preserving up to the weld
    tolerance:
      * a vertex on a straight crease between exactly two coplanar fans
        (T-vertex on a shared polytope edge), and
      * a vertex whose whole fan is coplanar with a single convex link loop
        (patch-interior point).
    Crease vertices go first each round: refanning an interior patch can
    otherwise strand a crease vertex inside an irreducible star. Triangles
    thinner than the weld grid are treated as transparent noise. Anything
    not strictly reducible is left untouched.
    """
    pts = [tuple(map(float, p)) for p in verts]
    tri_list = [tuple(map(int, t)) for t in tris]
    alive = [True] * len(tri_list)
    incident: dict[int, set[int]] = {}
    for ti, t in enumerate(tri_list):
        for v in t:
            incident.setdefault(v, set()).add(ti)
    scale = max(1.0, float(np.abs(verts).max())) if len(verts) else 1.0
    eps = 1e-9 * scale

    def area_vector(ti):
        a, b, c = (pts[i] for i in tri_list[ti])
        ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
        vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
        av = (0.5 * (uy * vz - uz * vy), 0.5 * (uz * vx - ux * vz),
              0.5 * (ux * vy - uy * vx))
        emax = max(ux * ux + uy * uy + uz * uz, vx * vx + vy * vy + vz * vz,
                   (vx - ux) ** 2 + (vy - uy) ** 2 + (vz - uz) ** 2) ** 0.5
        return av, emax

    def try_remove_boundary(v, star, chain):
        """Remove v when it sits on a straight boundary run of one flat
        patch: the open link chain closes across the line through v."""
        if not collinear_through(v, chain[0], chain[-1]):
            return False
        areas = {}
        solid = []
        for ti in star:
            av, emax = area_vector(ti)
            ln = math.sqrt(av[0] ** 2 + av[1] ** 2 + av[2] ** 2)
            areas[ti] = av
            if ln > max(DEGENERATE_MEASURE, 2.0 * eps * emax):
                solid.append((ti, (av[0] / ln, av[1] / ln, av[2] / ln)))
        if not solid:
            return False
        u0 = solid[0][1]
        for _, u in solid[1:]:
            if abs(u[0] * u0[0] + u[1] * u0[1] + u[2] * u0[2]) < 1.0 - 1e-9:
                return False
        turns = _polygon_convex_planar([pts[u] for u in chain], eps)
        if turns is None:
            return False
        root = max(range(len(chain)), key=lambda k: abs(turns[k]))
        poly = chain[root:] + chain[:root]
        ref = (sum(areas[ti][0] for ti, _ in solid),
               sum(areas[ti][1] for ti, _ in solid),
               sum(areas[ti][2] for ti, _ in solid))
        new_tris = _fan(poly, pts, ref, eps)
        for ti in star:
            alive[ti] = False
            for u in tri_list[ti]:
                incident[u].discard(ti)
        for t in new_tris:
            ti = len(tri_list)
            tri_list.append(t)
            alive.append(True)
            for u in t:
                incident.setdefault(u, set()).add(ti)
        incident.pop(v, None)
        return True

    def collinear_through(v, a, b):
        p, pa, pb = pts[v], pts[a], pts[b]
        da = (pa[0] - p[0], pa[1] - p[1], pa[2] - p[2])
        db = (pb[0] - p[0], pb[1] - p[1], pb[2] - p[2])
        na = math.sqrt(da[0] ** 2 + da[1] ** 2 + da[2] ** 2)
        nb = math.sqrt(db[0] ** 2 + db[1] ** 2 + db[2] ** 2)
        if na < eps or nb < eps:
            return False
        s = ((da[0] / na + db[0] / nb) ** 2 + (da[1] / na + db[1] / nb) ** 2
             + (da[2] / na + db[2] / nb) ** 2)
        return s <= 1e-14

    def try_remove(v, want_crease):
        star = sorted(ti for ti in incident.get(v, ()) if alive[ti])
        if len(star) < 2:
            return False
        linked = _link_path(v, [tri_list[ti] for ti in star])
        if linked is None:
            return False
        loop, closed = linked
        if not closed:
            return (not want_crease) and try_remove_boundary(v, star, loop)
        if len(star) < 3:
            return False
        pair_tri = {}
        for ti in star:
            a, b = (u for u in tri_list[ti] if u != v)
            pair_tri[frozenset((a, b))] = ti
        m = len(loop)
        ring = [pair_tri.get(frozenset((loop[k], loop[(k + 1) % m])))
                for k in range(m)]
        if None in ring or len(set(ring)) != len(star):
            return False
        areas = {}
        units = {}
        slivers = set()
        for ti in star:
            av, emax = area_vector(ti)
            ln = math.sqrt(av[0] ** 2 + av[1] ** 2 + av[2] ** 2)
            areas[ti] = av
            if ln <= max(DEGENERATE_MEASURE, 2.0 * eps * emax):
                slivers.add(ti)
            else:
                units[ti] = (av[0] / ln, av[1] / ln, av[2] / ln)
        solid = [ti for ti in star if ti not in slivers]
        if not solid:
            return False
        if slivers:
            # noise-adjacent star: only the uniformly coplanar case is safe
            u0 = units[solid[0]]
            for ti in solid[1:]:
                u = units[ti]
                if abs(u[0] * u0[0] + u[1] * u0[1] + u[2] * u0[2]) < 1.0 - 1e-9:
                    return False
            if want_crease:
                return False
            arcs = [loop]
            arc_tris = [solid]
        else:
            creases = []
            for k in range(m):
                ua = units[ring[k - 1]]
                ub = units[ring[k]]
                if abs(ua[0] * ub[0] + ua[1] * ub[1] + ua[2] * ub[2]) < 1.0 - 1e-9:
                    creases.append(k)
            if len(creases) == 0:
                if want_crease:
                    return False
                arcs = [loop]
                arc_tris = [star]
            elif len(creases) == 2:
                if not want_crease:
                    return False
                i, j = creases
                if not collinear_through(v, loop[i], loop[j]):
                    return False  # crease does not run straight through v
                arcs = [loop[i:j + 1], loop[j:] + loop[:i + 1]]
                arc_tris = [[ring[k] for k in range(i, j)],
                            [ring[k % m] for k in range(j, i + m)]]
            else:
                return False
        new_tris = []
        for arc, tids in zip(arcs, arc_tris):
            if len(arc) < 3 or not tids:
                return False
            poly = [pts[u] for u in arc]
            turns = _polygon_convex_planar(poly, eps)
            if turns is None:
                return False
            if len(arcs) == 1:
                # root the fan at the sharpest corner: fanning from a
                # collinear (T) vertex would strand it next round
                root = max(range(len(arc)), key=lambda k: abs(turns[k]))
                arc = arc[root:] + arc[:root]
            ref = (sum(areas[ti][0] for ti in tids),
                   sum(areas[ti][1] for ti in tids),
                   sum(areas[ti][2] for ti in tids))
            new_tris.extend(_fan(arc, pts, ref, eps))
        for ti in star:
            alive[ti] = False
            for u in tri_list[ti]:
                incident[u].discard(ti)
        for t in new_tris:
            ti = len(tri_list)
            tri_list.append(t)
            alive.append(True)
            for u in t:
                incident.setdefault(u, set()).add(ti)
        incident.pop(v, None)
        return True

    changed = True
    guard = 0
    while changed and guard < 64:
        changed = False
        guard += 1
        for want_crease in (True, False):
            for v in sorted(incident.keys()):
                if try_remove(v, want_crease):
                    changed = True

    kept = np.array([t for ti, t in enumerate(tri_list) if alive[ti]],
                    dtype=np.int64)
    if len(kept) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), None
    used = np.zeros(len(verts), dtype=bool)
    used[kept] = True
    remap = np.cumsum(used) - 1
    return verts[used], remap[kept], (vcols[used] if vcols is not None else None)


def _link_path(v: int, star_tris: list):
    """The link of v ordered into a simple cycle or chain.

    Returns (vertices, closed) where closed says whether the link wraps
    around (v interior to the surface) or is an open chain (v on a
    boundary); None when the link is not simple.
    """
    edges = []
    for t in star_tris:
        rest = [u for u in t if u != v]
        if len(rest) != 2:
            return None
        edges.append(rest)
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    degrees = sorted(len(nb) for nb in adj.values())
    if degrees[-1] > 2:
        return None
    endpoints = sorted(u for u, nb in adj.items() if len(nb) == 1)
    if len(endpoints) == 0:
        closed = True
        start = min(adj)
    elif len(endpoints) == 2:
        closed = False
        start = endpoints[0]
    else:
        return None
    path = [start]
    prev, cur = None, start
    for _ in range(len(adj)):
        nbs = adj[cur]
        nxt = None
        for cand in nbs:
            if cand != prev:
                nxt = cand
                break
        if nxt is None or nxt == start:
            break
        path.append(nxt)
        prev, cur = cur, nxt
    if len(path) != len(adj):
        return None
    return path, closed


def _link_loop(v: int, star_tris: list) -> list[int] | None:
    """Ordered closed loop of link vertices around v, or None."""
    out = _link_path(v, star_tris)
    if out is None or not out[1]:
        return None
    return out[0]


# --- frustum projection -------------------------------------------------------


def _unique_faces(mesh: TetraMesh4) -> np.ndarray:
    """Deduplicated triangle faces, cached on the mesh (static topology)."""
    faces = getattr(mesh, "_unique_faces_cache", None)
    if faces is None:
        t = mesh.tetrahedra
        raw = np.sort(t[:, [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]]
                      .reshape(-1, 3), axis=1)
        n = len(mesh.vertices)
        if n < 2_000_000:  # packed key fits comfortably in int64
            keys = (raw[:, 0] * n + raw[:, 1]) * n + raw[:, 2]
            _, first = np.unique(keys, return_index=True)
            faces = raw[np.sort(first)]
        else:
            faces = np.unique(raw, axis=0)
        mesh._unique_faces_cache = faces
    return faces


def frustum_project(mesh: TetraMesh4, model: Transform4, cam: Camera4) -> TriMesh3:
    """Perspective 4D projection: camera-local (x,y,z) scaled by focal/(focal+w).

    Geometry behind the near margin (focal + w <= near_w) is clipped against
    the w = near_w - focal hyperplane before the division. The mesh surface
    is the deduplicated set of tetrahedron faces.
    """
    linear = model.linear()
    offset = model.translation.to_array() - cam.pose.translation.to_array()
    pm = cam.pose.rotation.m
    local = mesh.vertices @ (pm.T @ linear).T + offset @ pm
    faces = _unique_faces(mesh)
    w_min = cam.near_w - cam.focal

    w = local[:, 3]
    clipped_v = w <= w_min
    face_clip = clipped_v[faces].any(axis=1)

    denom = cam.focal + w
    scale = np.where(clipped_v, 1.0, cam.focal / np.where(clipped_v, 1.0, denom))
    proj = local[:, :3] * scale[:, None]

    colors = mesh.vertex_colors
    out_verts = [proj]
    out_cols = [colors] if colors is not None else None
    out_tris = [faces[~face_clip]]
    next_id = len(proj)
    for face in faces[face_clip]:
        pts = local[face]
        cols = colors[face] if colors is not None else None
        poly, pcols = _clip_polygon_w(pts, cols, w_min)
        if len(poly) < 3:
            continue
        pscale = cam.focal / (cam.focal + poly[:, 3])
        out_verts.append(poly[:, :3] * pscale[:, None])
        if out_cols is not None:
            out_cols.append(pcols)
        fan = [(next_id, next_id + k, next_id + k + 1) for k in range(1, len(poly) - 1)]
        out_tris.append(np.array(fan, dtype=np.int64))
        next_id += len(poly)
    verts = np.vstack(out_verts)
    tris = np.vstack([t for t in out_tris if len(t)]) if any(len(t) for t in out_tris) \
        else np.zeros((0, 3), dtype=np.int64)
    vcols = np.vstack(out_cols) if out_cols is not None else None
    if len(tris):
        areas = triangle_areas_3d(verts, tris)
        tris = tris[areas > DEGENERATE_MEASURE]
    if len(tris) == 0:
        return TriMesh3()
    used = np.zeros(len(verts), dtype=bool)
    used[tris] = True
    remap = np.cumsum(used) - 1
    return TriMesh3(verts[used], remap[tris],
                    vcols[used] if vcols is not None else None, validate=False)


def _clip_polygon_w(pts: np.ndarray, cols, w_min: float):
    """Keep the part of a polygon with w > w_min (Sutherland-Hodgman)."""
    out_p = []
    out_c = []
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        ca = cols[i] if cols is not None else None
        cb = cols[(i + 1) % n] if cols is not None else None
        ina, inb = a[3] > w_min, b[3] > w_min
        if ina:
            out_p.append(a)
            if cols is not None:
                out_c.append(ca)
        if ina != inb:
            t = (w_min - a[3]) / (b[3] - a[3])
            out_p.append(a + t * (b - a))
            if cols is not None:
                out_c.append(ca + t * (cb - ca))
    if not out_p:
        return np.zeros((0, 4)), None
    return np.array(out_p), (np.array(out_c) if cols is not None else None)


# --- node projection and camera control ---------------------------------------


def _local_to_world_mesh(mesh: TriMesh3, pose: Pose4) -> TriMesh3:
    """Re-express projector-local 3D output in world xyz (offset correction)."""
    if mesh.is_empty:
        return mesh
    pts4 = np.hstack([mesh.vertices, np.zeros((len(mesh.vertices), 1))])
    world = pose.local_to_world(pts4)[:, :3]
    tris = mesh.triangles
    vcols = mesh.vertex_colors
    # rounding in the rigid remap can push borderline slivers to zero area
    areas = triangle_areas_3d(world, tris)
    if len(areas) and areas.min() <= DEGENERATE_MEASURE:
        tris = tris[areas > DEGENERATE_MEASURE]
        if len(tris) == 0:
            return TriMesh3()
        used = np.zeros(len(world), dtype=bool)
        used[tris] = True
        remap = np.cumsum(used) - 1
        world = world[used]
        tris = remap[tris]
        vcols = vcols[used] if vcols is not None else None
    return TriMesh3(world, tris, vcols, validate=False)


def project_node(mesh: TetraMesh4, model: Transform4, rig: CameraRig,
                 *, simplify: bool = True) -> TriMesh3:
    """Project one 4D node through the rig into world-space 3D geometry.

    Output depends only on the 4D camera pose and mode; the 3D camera is
    never consulted, so detached-mode imagery is invariant under 3D-camera
    movement and synced-mode imagery lands where the 3D camera expects it.
    """
    cam = rig.cam4
    if cam.mode is ProjectionMode.CROSS_SECTION:
        local = cross_section(mesh, model, cam.slice_plane(), simplify=simplify)
    else:
        local = frustum_project(mesh, model, cam)
    return _local_to_world_mesh(local, cam.pose)


def look_at_w(position: Vec4, target: Vec4, reference: Rotation4) -> Rotation4:
    """Orientation whose local w axis points from position toward target.

    The remaining axes are taken from the reference rotation and
    re-orthonormalized, keeping the result continuous along camera paths.
    """
    forward = (target - position).to_array()
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        return reference
    m = reference.m.copy()
    m[:, 3] = forward / norm
    return _reortho_keep_w(m)


def _reortho_keep_w(m: np.ndarray) -> Rotation4:
    """Gram-Schmidt keeping column 3 (the new forward) exactly."""
    out = m.copy()
    cols = [3, 0, 1, 2]
    for idx, j in enumerate(cols):
        for k in cols[:idx]:
            out[:, j] -= (out[:, k] @ out[:, j]) * out[:, k]
        n = np.linalg.norm(out[:, j])
        if n < 1e-12:
            # degenerate reference axis: replace with the least-aligned basis vector
            basis = np.eye(4)
            align = np.abs(out[:, cols[:idx]].T @ basis) if idx else np.zeros((0, 4))
            pick = int(np.argmin(align.sum(axis=0))) if idx else 0
            out[:, j] = basis[:, pick]
            for k in cols[:idx]:
                out[:, j] -= (out[:, k] @ out[:, j]) * out[:, k]
            n = np.linalg.norm(out[:, j])
        out[:, j] /= n
    if np.linalg.det(out) < 0:
        out[:, 2] = -out[:, 2]
    return Rotation4(out, _skip_check=True)


def orbit_update(rig: CameraRig, delta_angle: float) -> CameraRig:
    """Advance the 4D camera along its orbit and re-aim it at the focus."""
    if rig.orbit is None:
        raise RuntimeError("camera rig has no orbit state")
    orbit = rig.orbit
    angle = orbit.angle + delta_angle
    d0 = orbit.initial_dir.to_array()
    axis_w = np.array([0.0, 0.0, 0.0, 1.0])
    offset = math.cos(angle) * d0 + math.sin(angle) * axis_w
    position = Vec4.from_array(orbit.focus.to_array() - orbit.radius * offset)
    rotation = look_at_w(position, orbit.focus, rig.cam4.pose.rotation)
    cam4 = replace(rig.cam4, pose=Pose4(position, rotation))
    return replace(rig, cam4=cam4, orbit=replace(orbit, angle=angle))


def synced_target_position(rig: CameraRig) -> Vec4:
    """Where the 4D camera sits when synced: the 3D camera position at the
    shared w coordinate (the orbit focus w when orbiting)."""
    px, py, pz = rig.cam3_pose.position
    w = rig.orbit.focus.w if rig.orbit is not None else rig.cam4.pose.translation.w
    return Vec4(px, py, pz, w)


def transition_step(rig: CameraRig, alpha: float) -> CameraRig:
    """Blend a detached 4D camera back toward the synced pose.

    Position lerps from the current state by alpha (repeated partial steps
    compound); orientation stays locked on the orbit focus. At alpha = 1 the
    rig snaps to the synced invariant and reverts to cross-section.
    """
    if rig.sync is not SyncMode.DETACHED:
        raise RuntimeError("transition_step requires a detached rig")
    alpha = float(alpha)
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    target = synced_target_position(rig)
    if alpha >= 1.0:
        pose = Pose4(target, embed_rotation3(rig.cam3_pose.matrix()))
        cam4 = replace(rig.cam4, pose=pose, mode=ProjectionMode.CROSS_SECTION)
        return replace(rig, cam4=cam4, sync=SyncMode.SYNCED, orbit=None)
    cur = rig.cam4.pose.translation
    position = Vec4.from_array(
        cur.to_array() + alpha * (target.to_array() - cur.to_array()))
    if rig.orbit is not None:
        rotation = look_at_w(position, rig.orbit.focus, rig.cam4.pose.rotation)
    else:
        rotation = rig.cam4.pose.rotation
    cam4 = replace(rig.cam4, pose=Pose4(position, rotation))
    return replace(rig, cam4=cam4)
