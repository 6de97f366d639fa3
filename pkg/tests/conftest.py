"""Shared fixtures and independent oracle implementations.

The oracles here deliberately avoid the library's own algorithms: slicing
is checked against brute-force edge enumeration, volumes against Monte
Carlo containment and convex hulls, extents against direct corner
transformation. They stay dumb and slow on purpose.
"""

import numpy as np
import pytest


# --- brute-force tetra/hyperplane slicing oracle -------------------------------

TETRA_EDGES = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def brute_force_slice(points4, plane_pose_rotation, plane_pose_translation):
    """All 6 edges intersected with the local w=0 plane, convex-ordered.

    points4: (4, 4) world tetra corners. Returns (k, 3) plane-local polygon
    (k in {0, 3, 4}), ordered counterclockwise around the centroid; empty
    array when there is no crossing. Vertices within 1e-12 of the plane are
    nudged to the positive side, mirroring the library's documented rule.
    """
    local = (points4 - plane_pose_translation) @ plane_pose_rotation
    w = local[:, 3].copy()
    w[np.abs(w) < 1e-12] += 1e-12
    crossings = []
    for i, j in TETRA_EDGES:
        if (w[i] > 0) != (w[j] > 0):
            t = w[i] / (w[i] - w[j])
            crossings.append(local[i, :3] + t * (local[j, :3] - local[i, :3]))
    if not crossings:
        return np.zeros((0, 3))
    pts = np.array(crossings)
    center = pts.mean(axis=0)
    d = pts - center
    # polygon plane basis from the two largest-spread directions
    u = d[np.argmax(np.linalg.norm(d, axis=1))]
    u = u / np.linalg.norm(u)
    n = None
    for cand in d:
        c = np.cross(u, cand)
        if np.linalg.norm(c) > 1e-12:
            n = c / np.linalg.norm(c)
            break
    if n is None:
        return np.zeros((0, 3))
    v = np.cross(n, u)
    angles = np.arctan2(d @ v, d @ u)
    return pts[np.argsort(angles)]


def polygons_match(a, b, tol=1e-9):
    """Same cyclic polygon up to rotation/reflection and tolerance."""
    if len(a) != len(b):
        return False
    if len(a) == 0:
        return True
    k = len(a)
    for flip in (b, b[::-1]):
        for shift in range(k):
            rolled = np.roll(flip, shift, axis=0)
            if np.abs(rolled - a).max() <= tol:
                return True
    return False


# --- Monte Carlo containment oracles -------------------------------------------


def points_in_tri_mesh(points, vertices, triangles, direction=None):
    """Ray-crossing parity point-in-mesh test for a closed 3D triangle mesh.

    Vectorized Moller-Trumbore over all (point, triangle) pairs, chunked.
    """
    if direction is None:
        direction = np.array([0.97, 0.23, 0.11])
    direction = direction / np.linalg.norm(direction)
    v0 = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - v0
    e2 = vertices[triangles[:, 2]] - v0
    h = np.cross(direction, e2)
    a = np.einsum("ij,ij->i", e1, h)
    valid = np.abs(a) > 1e-14
    inv_a = np.where(valid, 1.0 / np.where(valid, a, 1.0), 0.0)
    inside = np.zeros(len(points), dtype=bool)
    chunk = 65536 // max(1, len(triangles) // 64)
    chunk = max(1024, min(len(points), chunk))
    for start in range(0, len(points), chunk):
        p = points[start:start + chunk]
        s = p[:, None, :] - v0[None, :, :]
        u = np.einsum("pij,ij->pi", s, h) * inv_a[None, :]
        qv = np.cross(s, e1[None, :, :])
        v = np.einsum("pij,j->pi", qv, direction) * inv_a[None, :]
        t = np.einsum("pij,ij->pi", qv, e2) * inv_a[None, :]
        hits = (valid[None, :] & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 1e-12))
        inside[start:start + chunk] = hits.sum(axis=1) % 2 == 1
    return inside


def mc_volume_tri_mesh(vertices, triangles, samples=10 ** 6, seed=20240801,
                       padding=0.1):
    """Monte Carlo enclosed volume of a closed triangle mesh."""
    rng = np.random.default_rng(seed)
    lo = vertices.min(axis=0) - padding
    hi = vertices.max(axis=0) + padding
    pts = rng.uniform(lo, hi, size=(samples, 3))
    inside = points_in_tri_mesh(pts, vertices, triangles)
    box = np.prod(hi - lo)
    return inside.mean() * box


def points_in_tetra_complex_4d(points, vertices, tetrahedra, direction=None):
    """Parity of ray crossings through a closed tetra 3-manifold in 4D."""
    if direction is None:
        direction = np.array([0.913, 0.273, 0.182, 0.241])
    direction = direction / np.linalg.norm(direction)
    corners = vertices[tetrahedra]  # (T, 4, 4)
    v0 = corners[:, 0]
    basis = np.stack([corners[:, 1] - v0, corners[:, 2] - v0,
                      corners[:, 3] - v0,
                      -np.broadcast_to(direction, v0.shape)], axis=2)  # (T,4,4) columns
    inv = np.linalg.inv(basis)  # solve v0 + B [b1 b2 b3 t]^T = p
    inside = np.zeros(len(points), dtype=bool)
    chunk = max(1024, min(len(points), 20000))
    for start in range(0, len(points), chunk):
        p = points[start:start + chunk]
        rhs = p[:, None, :] - v0[None, :, :]
        sol = np.einsum("tij,ptj->pti", inv, rhs)
        b = sol[..., :3]
        t = sol[..., 3]
        hits = ((b >= 0).all(axis=2) & (b.sum(axis=2) <= 1.0) & (t > 1e-12))
        inside[start:start + chunk] = hits.sum(axis=1) % 2 == 1
    return inside


def mc_content_tetra_complex(vertices, tetrahedra, lo, hi, samples=10 ** 6,
                             seed=20240802):
    """Monte Carlo 4-content enclosed by a closed tetra complex in 4D."""
    rng = np.random.default_rng(seed)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    pts = rng.uniform(lo, hi, size=(samples, 4))
    inside = points_in_tetra_complex_4d(pts, vertices, tetrahedra)
    return inside.mean() * np.prod(hi - lo)


def convex_hull_volume(points3) -> float:
    from scipy.spatial import ConvexHull

    return float(ConvexHull(points3).volume)


# --- random generators -----------------------------------------------------------


def random_rigid_transform(rng):
    from continuum4d.linalg import PlaneAngles, Transform4, Vec4, rotation_from_plane_angles

    angles = PlaneAngles(*rng.uniform(-np.pi, np.pi, 6))
    translation = Vec4(*rng.uniform(-5, 5, 4))
    return Transform4(rotation_from_plane_angles(angles), translation)


def random_tetra(rng, scale=2.0):
    """Four 4D points with comfortably nondegenerate 3-volume."""
    from continuum4d.meshes import tetra_volumes_4d

    while True:
        pts = rng.uniform(-scale, scale, size=(4, 4))
        if tetra_volumes_4d(pts, np.array([[0, 1, 2, 3]]))[0] > 1e-6:
            return pts


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(987654321)
