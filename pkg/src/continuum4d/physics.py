"""4D rigid-body dynamics: semi-implicit Euler, simple colliders, impulses.

Gravity acts along y only; nothing in the integrator ever accelerates a
body in w. Angular motion is decorative (scripted rates composed onto the
pose); contacts apply linear impulses with a min-rule restitution and an
80% positional correction split by inverse mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import Hyperplane, PlaneAngles, Pose4, Vec4, rotation_from_plane_angles

FIXED_DT = 1.0 / 120.0
DEFAULT_GRAVITY = Vec4(0.0, -9.81, 0.0, 0.0)
POSITIONAL_CORRECTION = 0.8


@dataclass(frozen=True)
class SphereCollider:
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0):
            raise ValueError(f"radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class BoxCollider:
    half_extents: Vec4

    def __post_init__(self):
        h = self.half_extents
        if min(h.x, h.y, h.z, h.w) <= 0.0:
            raise ValueError(f"half extents must be positive, got {h}")


@dataclass(frozen=True)
class HalfSpaceCollider:
    """Static ground or wall: solid on the negative-local-w side of the plane.

    When attached to a scene node the plane is derived from the node pose:
    its w axis is the node rotation applied to `up` (the free-side normal,
    default the node's own w axis). A fully explicit plane wins over `up`.
    """

    plane: Hyperplane | None = None
    up: Vec4 = Vec4(0.0, 0.0, 0.0, 1.0)


Collider4 = SphereCollider | BoxCollider | HalfSpaceCollider


@dataclass(frozen=True)
class RigidBody4:
    pose: Pose4 = Pose4()
    linear_velocity: Vec4 = Vec4()
    angular_velocity: PlaneAngles = PlaneAngles()
    mass: float = 1.0
    collider: Collider4 = field(default_factory=lambda: SphereCollider(0.5))
    restitution: float = 0.5
    kinematic: bool = False

    def __post_init__(self):
        if not (self.mass > 0.0):
            raise ValueError(f"mass must be positive, got {self.mass}")
        if not (0.0 <= self.restitution <= 1.0):
            raise ValueError(f"restitution must lie in [0, 1], got {self.restitution}")

    @property
    def inv_mass(self) -> float:
        return 0.0 if self.kinematic else 1.0 / self.mass

    def state_bytes(self) -> bytes:
        return (
            self.pose.state_bytes()
            + self.linear_velocity.to_array().tobytes()
            + np.array(self.angular_velocity.as_tuple()).tobytes()
        )


@dataclass(frozen=True)
class Contact:
    body_a: int
    body_b: int
    normal: Vec4  # unit, pointing from a toward b
    depth: float
    point: Vec4


def integrate(bodies: list[RigidBody4], gravity: Vec4 = DEFAULT_GRAVITY,
              dt: float = FIXED_DT) -> list[RigidBody4]:
    """Advance all bodies one step: velocities first, then positions."""
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    out = []
    g = gravity.to_array()
    for body in bodies:
        v = body.linear_velocity.to_array()
        if not body.kinematic:
            v = v + g * dt
        p = body.pose.translation.to_array() + v * dt
        rotation = body.pose.rotation
        if not body.angular_velocity.is_zero():
            step = rotation_from_plane_angles(body.angular_velocity.scaled(dt))
            rotation = rotation.then(step)
        out.append(replace(body, pose=Pose4(Vec4.from_array(p), rotation),
                           linear_velocity=Vec4.from_array(v)))
    return out


def _world_aabb4(body: RigidBody4) -> tuple[np.ndarray, np.ndarray]:
    h = body.collider.half_extents.to_array()
    extent = np.abs(body.pose.rotation.m) @ h
    center = body.pose.translation.to_array()
    return center - extent, center + extent


def _sphere_sphere(ia, a, ib, b):
    pa = a.pose.translation.to_array()
    pb = b.pose.translation.to_array()
    d = pb - pa
    dist = float(np.linalg.norm(d))
    rsum = a.collider.radius + b.collider.radius
    if dist >= rsum:
        return None
    if dist > 1e-12:
        n = d / dist
    else:
        n = np.array([0.0, 1.0, 0.0, 0.0])
    point = pa + n * (a.collider.radius + 0.5 * (dist - rsum))
    return Contact(ia, ib, Vec4.from_array(n), rsum - dist, Vec4.from_array(point))


def _sphere_halfspace(ia, a, ib, b):
    plane = b.collider.plane
    center = a.pose.translation.to_array()
    s = float(plane.local_w(center[None])[0])
    r = a.collider.radius
    if s >= r:
        return None
    up = plane.normal().to_array()
    # normal points from the sphere toward the halfspace (a toward b)
    point = center - up * s
    return Contact(ia, ib, Vec4.from_array(-up), r - s, Vec4.from_array(point))


def _sphere_box(ia, a, ib, b):
    lo, hi = _world_aabb4(b)
    center = a.pose.translation.to_array()
    closest = np.clip(center, lo, hi)
    d = closest - center
    dist = float(np.linalg.norm(d))
    r = a.collider.radius
    if dist >= r:
        return None
    if dist > 1e-12:
        n = d / dist
        depth = r - dist
    else:
        # center inside the box: push out along the least-penetrated axis
        gaps = np.minimum(center - lo, hi - center)
        axis = int(np.argmin(gaps))
        n = np.zeros(4)
        n[axis] = 1.0 if (hi[axis] - center[axis]) < (center[axis] - lo[axis]) else -1.0
        depth = r + float(gaps[axis])
    return Contact(ia, ib, Vec4.from_array(n), depth, Vec4.from_array(closest))


def _box_box(ia, a, ib, b):
    lo_a, hi_a = _world_aabb4(a)
    lo_b, hi_b = _world_aabb4(b)
    overlap = np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b)
    if (overlap <= 0.0).any():
        return None
    axis = int(np.argmin(overlap))
    ca = a.pose.translation.to_array()
    cb = b.pose.translation.to_array()
    n = np.zeros(4)
    n[axis] = 1.0 if cb[axis] >= ca[axis] else -1.0
    point = 0.5 * (np.maximum(lo_a, lo_b) + np.minimum(hi_a, hi_b))
    return Contact(ia, ib, Vec4.from_array(n), float(overlap[axis]), Vec4.from_array(point))


def _box_halfspace(ia, a, ib, b):
    plane = b.collider.plane
    lo, hi = _world_aabb4(a)
    corners_w = plane.local_w(np.array([
        [lo[0], lo[1], lo[2], lo[3]], [hi[0], lo[1], lo[2], lo[3]],
        [lo[0], hi[1], lo[2], lo[3]], [hi[0], hi[1], lo[2], lo[3]],
        [lo[0], lo[1], hi[2], lo[3]], [hi[0], lo[1], hi[2], lo[3]],
        [lo[0], hi[1], hi[2], lo[3]], [hi[0], hi[1], hi[2], lo[3]],
        [lo[0], lo[1], lo[2], hi[3]], [hi[0], lo[1], lo[2], hi[3]],
        [lo[0], hi[1], lo[2], hi[3]], [hi[0], hi[1], lo[2], hi[3]],
        [lo[0], lo[1], hi[2], hi[3]], [hi[0], lo[1], hi[2], hi[3]],
        [lo[0], hi[1], hi[2], hi[3]], [hi[0], hi[1], hi[2], hi[3]],
    ]))
    depth = -float(corners_w.min())
    if depth <= 0.0:
        return None
    up = plane.normal().to_array()
    deepest = a.pose.translation.to_array()
    return Contact(ia, ib, Vec4.from_array(-up), depth, Vec4.from_array(deepest))


def detect_collisions(bodies: list[RigidBody4]) -> list[Contact]:
    """All contacts between body pairs, ordered by (index_a, index_b)."""
    contacts = []
    n = len(bodies)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = bodies[i], bodies[j]
            if a.kinematic and b.kinematic:
                continue
            c = _pair_contact(i, a, j, b)
            if c is not None:
                contacts.append(c)
    return contacts


def _pair_contact(i, a, j, b):
    ka, kb = type(a.collider), type(b.collider)
    if ka is SphereCollider and kb is SphereCollider:
        return _sphere_sphere(i, a, j, b)
    if ka is SphereCollider and kb is HalfSpaceCollider:
        return _sphere_halfspace(i, a, j, b)
    if ka is HalfSpaceCollider and kb is SphereCollider:
        return _flip(_sphere_halfspace(j, b, i, a))
    if ka is SphereCollider and kb is BoxCollider:
        return _sphere_box(i, a, j, b)
    if ka is BoxCollider and kb is SphereCollider:
        return _flip(_sphere_box(j, b, i, a))
    if ka is BoxCollider and kb is BoxCollider:
        return _box_box(i, a, j, b)
    if ka is BoxCollider and kb is HalfSpaceCollider:
        return _box_halfspace(i, a, j, b)
    if ka is HalfSpaceCollider and kb is BoxCollider:
        return _flip(_box_halfspace(j, b, i, a))
    return None  # halfspace vs halfspace


def _flip(c: Contact | None) -> Contact | None:
    if c is None:
        return None
    return Contact(c.body_b, c.body_a, Vec4.from_array(-c.normal.to_array()),
                   c.depth, c.point)


def resolve_contact(contact: Contact, bodies: list[RigidBody4]) -> list[RigidBody4]:
    """Apply a normal impulse plus positional correction for one contact."""
    a = bodies[contact.body_a]
    b = bodies[contact.body_b]
    n = contact.normal.to_array()
    inv_sum = a.inv_mass + b.inv_mass
    if inv_sum == 0.0:
        return bodies
    va = a.linear_velocity.to_array()
    vb = b.linear_velocity.to_array()
    vn = float((vb - va) @ n)
    out = list(bodies)
    if vn < 0.0:
        e = min(a.restitution, b.restitution)
        j = -(1.0 + e) * vn / inv_sum
        va = va - j * n * a.inv_mass
        vb = vb + j * n * b.inv_mass
    correction = POSITIONAL_CORRECTION * contact.depth / inv_sum
    pa = a.pose.translation.to_array() - correction * a.inv_mass * n
    pb = b.pose.translation.to_array() + correction * b.inv_mass * n
    out[contact.body_a] = replace(
        a, pose=Pose4(Vec4.from_array(pa), a.pose.rotation),
        linear_velocity=Vec4.from_array(va))
    out[contact.body_b] = replace(
        b, pose=Pose4(Vec4.from_array(pb), b.pose.rotation),
        linear_velocity=Vec4.from_array(vb))
    return out


def step_world(bodies: list[RigidBody4], gravity: Vec4 = DEFAULT_GRAVITY,
               dt: float = FIXED_DT):
    """One fixed tick: integrate, detect, resolve. Returns (bodies, contacts)."""
    bodies = integrate(bodies, gravity, dt)
    contacts = detect_collisions(bodies)
    for c in contacts:
        bodies = resolve_contact(c, bodies)
    return bodies, contacts
