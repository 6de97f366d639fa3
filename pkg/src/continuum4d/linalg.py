"""4D linear algebra: vectors, six-plane rotations, homogeneous transforms, poses.

Rotation convention used everywhere in this package:

* A rotation in the coordinate plane (i, j) by angle a maps axis i toward
  axis j, i.e. the 2x2 block is [[cos a, -sin a], [sin a, cos a]] acting on
  (i, j) with all other axes fixed (right-handed; xw rotation takes +x
  toward +w).
* Six-angle input is composed in the fixed canonical order
  xy * xz * yz * xw * yw * zw, applied right to left (zw acts first).
* After construction everything is a matrix; angles are never re-extracted
  (the six-angle decomposition is order dependent, matrices are not).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-9

# canonical plane order: (axis_i, axis_j) pairs for xy, xz, yz, xw, yw, zw
PLANE_AXES = ((0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3))
PLANE_NAMES = ("xy", "xz", "yz", "xw", "yw", "zw")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Vec4:
    """A point or direction in 4D Euclidean space (meters)."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    w: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z, self.w)):
            raise ValueError(f"Vec4 components must be finite, got {self}")

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.w], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "Vec4":
        x, y, z, w = (float(c) for c in a)
        return Vec4(x, y, z, w)

    def __add__(self, other: "Vec4") -> "Vec4":
        return Vec4(self.x + other.x, self.y + other.y, self.z + other.z, self.w + other.w)

    def __sub__(self, other: "Vec4") -> "Vec4":
        return Vec4(self.x - other.x, self.y - other.y, self.z - other.z, self.w - other.w)

    def __mul__(self, s: float) -> "Vec4":
        return Vec4(self.x * s, self.y * s, self.z * s, self.w * s)

    __rmul__ = __mul__

    def dot(self, other: "Vec4") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z + self.w * other.w

    def norm(self) -> float:
        return math.sqrt(self.dot(self))


@dataclass(frozen=True)
class PlaneAngles:
    """Rotation angles (radians) in the six orthogonal planes of 4D space."""

    xy: float = 0.0
    xz: float = 0.0
    yz: float = 0.0
    xw: float = 0.0
    yw: float = 0.0
    zw: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(a) for a in self.as_tuple()):
            raise ValueError(f"PlaneAngles must be finite, got {self}")

    def as_tuple(self):
        return (self.xy, self.xz, self.yz, self.xw, self.yw, self.zw)

    def scaled(self, s: float) -> "PlaneAngles":
        return PlaneAngles(*(a * s for a in self.as_tuple()))

    def is_zero(self) -> bool:
        return all(a == 0.0 for a in self.as_tuple())


def _plane_rotation_matrix(i: int, j: int, angle: float) -> np.ndarray:
    m = np.eye(4)
    c, s = math.cos(angle), math.sin(angle)
    m[i, i] = c
    m[i, j] = -s
    m[j, i] = s
    m[j, j] = c
    return m


class Rotation4:
    """A proper rotation of 4D space, stored as an orthonormal 4x4 matrix."""

    __slots__ = ("m",)

    def __init__(self, m: np.ndarray, _skip_check: bool = False):
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError(f"rotation matrix must be 4x4, got {m.shape}")
        if not _skip_check:
            _check_rotation(m)
        self.m = _readonly(m)

    @staticmethod
    def identity() -> "Rotation4":
        return Rotation4(np.eye(4), _skip_check=True)

    def apply(self, p: Vec4) -> Vec4:
        return Vec4.from_array(self.m @ p.to_array())

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        """Rotate an (N, 4) array of points."""
        return np.asarray(pts) @ self.m.T

    def then(self, other: "Rotation4") -> "Rotation4":
        """Return the rotation applying self first, then other."""
        return Rotation4(other.m @ self.m, _skip_check=True)

    def inverse(self) -> "Rotation4":
        return Rotation4(self.m.T.copy(), _skip_check=True)

    def fixes_w_axis(self, tol: float = ORTHO_TOL) -> bool:
        """True if the rotation maps the w axis to itself (pure 3D rotation)."""
        return (
            abs(self.m[3, 3] - 1.0) <= tol
            and np.all(np.abs(self.m[3, :3]) <= tol)
            and np.all(np.abs(self.m[:3, 3]) <= tol)
        )

    def __eq__(self, other):
        return isinstance(other, Rotation4) and np.array_equal(self.m, other.m)

    def __repr__(self):
        return f"Rotation4({self.m.tolist()})"


def _check_rotation(m: np.ndarray, tol: float = ORTHO_TOL):
    err = np.abs(m.T @ m - np.eye(4)).max()
    if err > tol:
        raise ValueError(f"matrix is not orthonormal (max deviation {err:.3e})")
    det = np.linalg.det(m)
    if abs(det - 1.0) > 1e-6:
        raise ValueError(f"matrix is not a proper rotation (det {det:.9f})")


def rotation_from_plane_angles(angles: PlaneAngles) -> Rotation4:
    """Build a rotation from six plane angles in the canonical order.

    The product is R_xy @ R_xz @ R_yz @ R_xw @ R_yw @ R_zw; the zw rotation
    is applied first when the result acts on column vectors.
    """
    if not isinstance(angles, PlaneAngles):
        angles = PlaneAngles(*angles)
    m = np.eye(4)
    for (i, j), a in zip(PLANE_AXES, angles.as_tuple()):
        if a != 0.0:
            m = m @ _plane_rotation_matrix(i, j, a)
    return Rotation4(m, _skip_check=True)


def orthonormalized(m: np.ndarray) -> Rotation4:
    """Snap a nearly-orthonormal matrix back onto the rotation group.

    Uses Gram-Schmidt over columns; used by camera blends, never by the
    algebraic core.
    """
    m = np.array(m, dtype=np.float64)
    for j in range(4):
        for k in range(j):
            m[:, j] -= (m[:, k] @ m[:, j]) * m[:, k]
        n = np.linalg.norm(m[:, j])
        if n < 1e-12:
            raise ValueError("degenerate basis, cannot orthonormalize")
        m[:, j] /= n
    if np.linalg.det(m) < 0:
        m[:, 3] = -m[:, 3]
    return Rotation4(m, _skip_check=True)


@dataclass(frozen=True)
class Transform4:
    """Scale, then rotate, then translate: p -> R @ (s * p) + t.

    Equivalent to a 5x5 homogeneous matrix with last row (0,0,0,0,1).
    Composition and inversion go through the matrix form; results that
    leave the rotate-after-scale family (anisotropic scale followed by a
    rotation on the scaled axes) raise ValueError rather than silently
    shearing.
    """

    rotation: Rotation4 = None  # type: ignore[assignment]
    translation: Vec4 = Vec4()
    scale: Vec4 = Vec4(1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.rotation is None:
            object.__setattr__(self, "rotation", Rotation4.identity())
        s = self.scale
        if min(s.x, s.y, s.z, s.w) <= 0.0:
            raise ValueError(f"scale components must be positive, got {s}")

    @staticmethod
    def identity() -> "Transform4":
        return Transform4()

    @staticmethod
    def translate(x: float, y: float, z: float, w: float) -> "Transform4":
        return Transform4(translation=Vec4(x, y, z, w))

    @staticmethod
    def rotate(angles: PlaneAngles) -> "Transform4":
        return Transform4(rotation=rotation_from_plane_angles(angles))

    @staticmethod
    def scaling(x: float, y: float, z: float, w: float) -> "Transform4":
        return Transform4(scale=Vec4(x, y, z, w))

    def linear(self) -> np.ndarray:
        """The 4x4 linear part, rotation @ diag(scale)."""
        return self.rotation.m * self.scale.to_array()[None, :]

    def matrix5(self) -> np.ndarray:
        """The 5x5 homogeneous matrix."""
        m = np.eye(5)
        m[:4, :4] = self.linear()
        m[:4, 4] = self.translation.to_array()
        return m

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        """Transform an (N, 4) array of points."""
        return np.asarray(pts, dtype=np.float64) @ self.linear().T + self.translation.to_array()

    def is_rigid(self, tol: float = ORTHO_TOL) -> bool:
        s = self.scale
        return max(abs(s.x - 1), abs(s.y - 1), abs(s.z - 1), abs(s.w - 1)) <= tol

    def state_bytes(self) -> bytes:
        """Canonical byte encoding, used for hashing and change detection."""
        return (
            self.rotation.m.tobytes()
            + self.translation.to_array().tobytes()
            + self.scale.to_array().tobytes()
        )


def _factor_linear(linear: np.ndarray) -> tuple[Rotation4, Vec4]:
    """Split a 4x4 linear map into rotation @ diag(scale), or raise."""
    norms = np.linalg.norm(linear, axis=0)
    if np.any(norms <= 0.0) or not np.all(np.isfinite(norms)):
        raise ValueError("linear part is singular")
    r = linear / norms[None, :]
    err = np.abs(r.T @ r - np.eye(4)).max()
    if err > 1e-7:
        raise ValueError(
            "composition leaves the rotate-after-scale family "
            f"(column non-orthogonality {err:.3e}); compose rigid transforms "
            "with scaled ones only on the left"
        )
    return orthonormalized(r), Vec4.from_array(norms)


def compose(a: Transform4, b: Transform4) -> Transform4:
    """The transform applying b first, then a (matrix product of the 5x5 forms)."""
    linear = a.linear() @ b.linear()
    translation = Vec4.from_array(
        a.linear() @ b.translation.to_array() + a.translation.to_array()
    )
    if a.is_rigid():
        # common fast path: rotation and scale stay cleanly factored
        rotation = Rotation4(a.rotation.m @ b.rotation.m, _skip_check=True)
        return Transform4(rotation, translation, b.scale)
    rotation, scale = _factor_linear(linear)
    return Transform4(rotation, translation, scale)


def apply(t: Transform4, p: Vec4) -> Vec4:
    """Apply a transform to a single point: scale, then rotate, then translate."""
    return Vec4.from_array(t.linear() @ p.to_array() + t.translation.to_array())


def invert(t: Transform4) -> Transform4:
    """Inverse transform; compose(invert(t), t) is the identity within 1e-9."""
    inv_linear = (t.rotation.m / t.scale.to_array()[None, :]).T
    rotation, scale = _factor_linear(inv_linear)
    translation = Vec4.from_array(-(inv_linear @ t.translation.to_array()))
    return Transform4(rotation, translation, scale)


def rotation_with_w_axis(direction: Vec4) -> Rotation4:
    """A rotation mapping the w axis onto the given world direction.

    The remaining axes are completed from the identity basis, so axis-aligned
    directions give axis-aligned frames. Used to orient halfspace planes.
    """
    d = direction.to_array()
    n = np.linalg.norm(d)
    if n < 1e-12:
        raise ValueError("direction must be nonzero")
    cols = [d / n]
    for e in np.eye(4):
        v = e.copy()
        for c in cols:
            v -= (c @ v) * c
        ln = np.linalg.norm(v)
        if ln > 1e-9:
            cols.append(v / ln)
        if len(cols) == 4:
            break
    m = np.column_stack([cols[1], cols[2], cols[3], cols[0]])
    if np.linalg.det(m) < 0:
        m[:, 2] = -m[:, 2]
    return Rotation4(m, _skip_check=True)


@dataclass(frozen=True)
class Pose4:
    """A rigid 4D pose: translation plus orientation."""

    translation: Vec4 = Vec4()
    rotation: Rotation4 = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.rotation is None:
            object.__setattr__(self, "rotation", Rotation4.identity())

    def to_transform(self) -> Transform4:
        return Transform4(self.rotation, self.translation)

    def world_to_local(self, pts: np.ndarray) -> np.ndarray:
        """Express world points (N, 4) in this pose's local frame."""
        return (np.asarray(pts, dtype=np.float64) - self.translation.to_array()) @ self.rotation.m

    def local_to_world(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=np.float64) @ self.rotation.m.T + self.translation.to_array()

    def state_bytes(self) -> bytes:
        return self.translation.to_array().tobytes() + self.rotation.m.tobytes()


@dataclass(frozen=True)
class Hyperplane:
    """The 3D subspace of points whose pose-local w coordinate is zero."""

    pose: Pose4 = Pose4()

    @staticmethod
    def axis_aligned(w_offset: float) -> "Hyperplane":
        return Hyperplane(Pose4(translation=Vec4(0.0, 0.0, 0.0, w_offset)))

    def local_w(self, pts: np.ndarray) -> np.ndarray:
        """Signed offsets of world points from the plane (plane-local w)."""
        d = np.asarray(pts, dtype=np.float64) - self.pose.translation.to_array()
        return d @ self.pose.rotation.m[:, 3]

    def normal(self) -> Vec4:
        """World-space direction of increasing local w."""
        return Vec4.from_array(self.pose.rotation.m[:, 3])
