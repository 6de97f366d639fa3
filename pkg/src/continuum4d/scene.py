"""Hybrid 3D/4D scene model and its JSON document format.

A scene document is strict UTF-8 JSON with a versioned top-level
``{"continuum_scene": 1, ...}``. Unknown fields are rejected; every
validation error names the offending path. ``description`` fields are
allowed anywhere for annotation.

Node geometry comes in two kinds: ``tri3`` (native 3D content, never
touched by 4D projection) and ``tetra4`` (4D content given as a primitive,
an inline mesh, a .tmesh4 file reference, or an extruded 3D surface).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    PlaneAngles,
    Pose4,
    Rotation4,
    Transform4,
    Vec4,
    rotation_from_plane_angles,
)
from .meshes import PrimitiveKind, TetraMesh4, TriMesh3, extrude_lift, make_primitive, read_tmesh4

SCENE_VERSION = 1

DEFAULT_ENERGY = {
    "max": 100.0,
    "move_w_cost": 5.0,     # per meter of w travel
    "frustum_cost": 2.0,    # per second in frustum mode
    "manipulate_cost": 10.0,
    "fire_cost": 5.0,
    "blast_cost": 20.0,
    "field_cost": 5.0,
    "crystal_value": 25.0,
}

DEFAULT_RADAR = {"radius": 50.0, "altitude_scale": 1.0}


class SceneParseError(ValueError):
    """Scene document violation; .path names the offending location."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _check_keys(obj: dict, path: str, required: set, optional: set):
    allowed = required | optional | {"description"}
    for key in obj:
        if key not in allowed:
            raise SceneParseError(f"{path}.{key}", "unknown field")
    for key in required:
        if key not in obj:
            raise SceneParseError(path, f"missing required field '{key}'")


def _floats(value, path: str, n: int) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise SceneParseError(path, f"expected {n} numbers")
    out = []
    for i, x in enumerate(value):
        if not isinstance(x, (int, float)) or isinstance(x, bool) or not math.isfinite(x):
            raise SceneParseError(f"{path}[{i}]", "expected a finite number")
        out.append(float(x))
    return out


def _number(value, path: str, minimum=None) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise SceneParseError(path, "expected a finite number")
    v = float(value)
    if minimum is not None and v < minimum:
        raise SceneParseError(path, f"must be >= {minimum}")
    return v


def parse_transform(obj: dict, path: str) -> Transform4:
    _check_keys(obj, path, set(), {"translation", "rotation_planes", "scale"})
    translation = Vec4(*_floats(obj.get("translation", [0, 0, 0, 0]), f"{path}.translation", 4))
    scale = Vec4(*_floats(obj.get("scale", [1, 1, 1, 1]), f"{path}.scale", 4))
    if min(scale.x, scale.y, scale.z, scale.w) <= 0:
        raise SceneParseError(f"{path}.scale", "components must be positive")
    rotation = Rotation4.identity()
    planes = obj.get("rotation_planes")
    if planes is not None:
        _check_keys(planes, f"{path}.rotation_planes", set(),
                    {"xy", "xz", "yz", "xw", "yw", "zw"})
        angles = PlaneAngles(**{k: _number(v, f"{path}.rotation_planes.{k}")
                                for k, v in planes.items() if k != "description"})
        rotation = rotation_from_plane_angles(angles)
    return Transform4(rotation, translation, scale)


def _parse_tri3_geometry(obj: dict, path: str) -> TriMesh3:
    _check_keys(obj, path, set(), {"kind", "vertices", "triangles", "shape", "size"})
    if "shape" in obj:
        shape = obj["shape"]
        size = _floats(obj.get("size", [1, 1, 1]), f"{path}.size", 3)
        if shape == "box":
            return box_surface(*size)
        if shape == "quad":
            return quad_surface(size[0], size[2])
        raise SceneParseError(f"{path}.shape", f"unknown shape '{shape}'")
    if "vertices" not in obj or "triangles" not in obj:
        raise SceneParseError(path, "tri3 geometry needs vertices+triangles or shape")
    verts = [_floats(v, f"{path}.vertices[{i}]", 3) for i, v in enumerate(obj["vertices"])]
    tris = obj["triangles"]
    try:
        return TriMesh3(np.array(verts), np.array(tris, dtype=np.int64))
    except ValueError as e:
        raise SceneParseError(path, str(e)) from e


def _parse_tetra4_geometry(obj: dict, path: str, base_dir: str | None) -> TetraMesh4:
    _check_keys(obj, path, set(),
                {"kind", "primitive", "size", "subdivision", "path",
                 "vertices", "tetrahedra", "extrude"})
    sources = [k for k in ("primitive", "path", "vertices", "extrude") if k in obj]
    if len(sources) != 1:
        raise SceneParseError(
            path, "tetra4 geometry needs exactly one of primitive/path/vertices/extrude")
    try:
        if "primitive" in obj:
            kind = obj["primitive"]
            if kind not in [p.value for p in PrimitiveKind]:
                raise SceneParseError(f"{path}.primitive", f"unknown primitive '{kind}'")
            return make_primitive(kind, _number(obj.get("size", 1.0), f"{path}.size"),
                                  int(obj.get("subdivision", 0)))
        if "path" in obj:
            rel = obj["path"]
            full = os.path.join(base_dir, rel) if base_dir else rel
            if not os.path.exists(full):
                raise SceneParseError(f"{path}.path", f"mesh file not found: {rel}")
            return read_tmesh4(full)
        if "vertices" in obj:
            if "tetrahedra" not in obj:
                raise SceneParseError(path, "inline tetra4 needs tetrahedra")
            return TetraMesh4(np.array(obj["vertices"], dtype=np.float64),
                              np.array(obj["tetrahedra"], dtype=np.int64))
        ex = obj["extrude"]
        _check_keys(ex, f"{path}.extrude", {"surface", "depth"}, {"center_w"})
        surface = _parse_tri3_geometry(ex["surface"], f"{path}.extrude.surface")
        depth = _number(ex["depth"], f"{path}.extrude.depth")
        mesh = extrude_lift(surface, depth)
        if ex.get("center_w", False):
            # recenter the slab so it spans [-depth/2, +depth/2]
            shifted = mesh.vertices - np.array([0.0, 0.0, 0.0, depth / 2.0])
            mesh = TetraMesh4(shifted, mesh.tetrahedra, mesh.vertex_colors)
        return mesh
    except SceneParseError:
        raise
    except (ValueError, TypeError) as e:
        raise SceneParseError(path, str(e)) from e


def _parse_collider(obj: dict, path: str):
    from .physics import BoxCollider, HalfSpaceCollider, SphereCollider

    _check_keys(obj, path, {"type"}, {"radius", "half_extents", "up"})
    kind = obj["type"]
    if kind == "hypersphere":
        return SphereCollider(_number(obj.get("radius", 0.5), f"{path}.radius", 1e-9))
    if kind == "hyperbox":
        h = _floats(obj.get("half_extents", [0.5] * 4), f"{path}.half_extents", 4)
        return BoxCollider(Vec4(*h))
    if kind == "halfspace":
        # plane derived from the node pose each tick; `up` is the free side
        up = Vec4(*_floats(obj.get("up", [0, 0, 0, 1]), f"{path}.up", 4))
        if up.norm() < 1e-12:
            raise SceneParseError(f"{path}.up", "must be a nonzero direction")
        return HalfSpaceCollider(None, up)
    raise SceneParseError(f"{path}.type", f"unknown collider type '{kind}'")


@dataclass
class BodySpec:
    collider: object
    mass: float = 1.0
    restitution: float = 0.5
    kinematic: bool = False
    velocity: Vec4 = field(default_factory=Vec4)


@dataclass
class AnimationSpec:
    keyframes: list  # (time, Transform4) sorted by time
    trigger: str = "start"  # start | on-hit | player-near
    radius: float = 5.0  # for player-near
    loop: bool = False

    def duration(self) -> float:
        return self.keyframes[-1][0] if self.keyframes else 0.0

    def sample(self, t: float) -> Transform4:
        """Transform at animation time t: piecewise blend of keyframes."""
        frames = self.keyframes
        if self.loop and self.duration() > 0:
            t = t % self.duration()
        if t <= frames[0][0]:
            return frames[0][1]
        if t >= frames[-1][0]:
            return frames[-1][1]
        for (t0, a), (t1, b) in zip(frames, frames[1:]):
            if t0 <= t <= t1:
                alpha = (t - t0) / (t1 - t0) if t1 > t0 else 1.0
                return blend_transforms(a, b, alpha)
        return frames[-1][1]


def blend_transforms(a: Transform4, b: Transform4, alpha: float) -> Transform4:
    """Linear blend: translations and scales lerp, rotation matrices blend
    and re-orthonormalize (the camera-transition style of interpolation)."""
    from .linalg import orthonormalized

    t = Vec4.from_array(
        (1 - alpha) * a.translation.to_array() + alpha * b.translation.to_array())
    s = Vec4.from_array((1 - alpha) * a.scale.to_array() + alpha * b.scale.to_array())
    m = (1 - alpha) * a.rotation.m + alpha * b.rotation.m
    return Transform4(orthonormalized(m), t, s)


@dataclass
class SceneNode:
    id: int
    name: str
    kind: str  # "tri3" | "tetra4"
    tri_mesh: TriMesh3 | None = None
    tetra_mesh: TetraMesh4 | None = None
    transform: Transform4 = field(default_factory=Transform4.identity)
    material: tuple = (0.7, 0.7, 0.7, 1.0)
    body: BodySpec | None = None
    animation: AnimationSpec | None = None
    tags: frozenset = frozenset()

    @property
    def is_4d(self) -> bool:
        return self.kind == "tetra4"


@dataclass
class Scene:
    name: str
    nodes: list[SceneNode]
    gravity: Vec4 = Vec4(0.0, -9.81, 0.0, 0.0)
    w_range: tuple = (-1.0, 1.0)
    spawn_position: Vec4 = field(default_factory=Vec4)
    spawn_yaw: float = 0.0
    energy: dict = field(default_factory=lambda: dict(DEFAULT_ENERGY))
    radar: dict = field(default_factory=lambda: dict(DEFAULT_RADAR))

    def node(self, node_id: int) -> SceneNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(f"no node with id {node_id}")


def _parse_node(obj: dict, path: str, base_dir: str | None) -> SceneNode:
    _check_keys(obj, path, {"id", "geometry"},
                {"name", "transform", "material", "body", "animation", "tags"})
    node_id = obj["id"]
    if not isinstance(node_id, int) or isinstance(node_id, bool) or node_id < 0:
        raise SceneParseError(f"{path}.id", "expected a non-negative integer")
    geo = obj["geometry"]
    if not isinstance(geo, dict) or "kind" not in geo:
        raise SceneParseError(f"{path}.geometry", "expected an object with 'kind'")
    kind = geo["kind"]
    tri_mesh = tetra_mesh = None
    if kind == "tri3":
        tri_mesh = _parse_tri3_geometry(geo, f"{path}.geometry")
    elif kind == "tetra4":
        tetra_mesh = _parse_tetra4_geometry(geo, f"{path}.geometry", base_dir)
    else:
        raise SceneParseError(f"{path}.geometry.kind", f"unknown kind '{kind}'")

    transform = Transform4.identity()
    if "transform" in obj:
        transform = parse_transform(obj["transform"], f"{path}.transform")
    if kind == "tri3":
        t = transform
        if (t.translation.w != 0.0 or t.scale.w != 1.0
                or not t.rotation.fixes_w_axis()):
            raise SceneParseError(
                f"{path}.transform",
                "tri3 nodes must keep identity w components "
                "(translation.w = 0, scale.w = 1, rotation fixing the w axis)")

    material = tuple(_floats(obj.get("material", [0.7, 0.7, 0.7, 1.0]),
                             f"{path}.material", 4))
    body = None
    if "body" in obj:
        b = obj["body"]
        _check_keys(b, f"{path}.body", {"collider"},
                    {"mass", "restitution", "kinematic", "velocity"})
        body = BodySpec(
            collider=_parse_collider(b["collider"], f"{path}.body.collider"),
            mass=_number(b.get("mass", 1.0), f"{path}.body.mass", 1e-12),
            restitution=_number(b.get("restitution", 0.5), f"{path}.body.restitution", 0.0),
            kinematic=bool(b.get("kinematic", False)),
            velocity=Vec4(*_floats(b.get("velocity", [0, 0, 0, 0]), f"{path}.body.velocity", 4)),
        )
        if body.restitution > 1.0:
            raise SceneParseError(f"{path}.body.restitution", "must lie in [0, 1]")
    animation = None
    if "animation" in obj:
        a = obj["animation"]
        _check_keys(a, f"{path}.animation", {"keyframes"}, {"trigger", "radius", "loop"})
        trigger = a.get("trigger", "start")
        if trigger not in ("start", "on-hit", "player-near"):
            raise SceneParseError(f"{path}.animation.trigger", f"unknown trigger '{trigger}'")
        frames = []
        last_t = -math.inf
        for i, kf in enumerate(a["keyframes"]):
            kpath = f"{path}.animation.keyframes[{i}]"
            _check_keys(kf, kpath, {"time", "transform"}, set())
            t = _number(kf["time"], f"{kpath}.time", 0.0)
            if t <= last_t:
                raise SceneParseError(f"{kpath}.time", "keyframe times must increase")
            last_t = t
            frames.append((t, parse_transform(kf["transform"], f"{kpath}.transform")))
        if not frames:
            raise SceneParseError(f"{path}.animation.keyframes", "needs at least one keyframe")
        animation = AnimationSpec(frames, trigger,
                                  _number(a.get("radius", 5.0), f"{path}.animation.radius", 0.0),
                                  bool(a.get("loop", False)))
    tags = obj.get("tags", [])
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise SceneParseError(f"{path}.tags", "expected a list of strings")

    return SceneNode(
        id=node_id, name=obj.get("name", f"node-{node_id}"), kind=kind,
        tri_mesh=tri_mesh, tetra_mesh=tetra_mesh, transform=transform,
        material=material, body=body, animation=animation, tags=frozenset(tags))


def load_scene(text: str, base_dir: str | None = None) -> Scene:
    """Parse and fully validate a scene document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneParseError("$", f"invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SceneParseError("$", "top level must be an object")
    _check_keys(doc, "$", {"continuum_scene", "nodes"},
                {"name", "gravity", "w_range", "player_spawn", "energy", "radar"})
    if doc["continuum_scene"] != SCENE_VERSION:
        raise SceneParseError("$.continuum_scene",
                              f"unsupported version {doc['continuum_scene']}")
    gravity = Vec4(*_floats(doc.get("gravity", [0, -9.81, 0, 0]), "$.gravity", 4))
    w_lo, w_hi = _floats(doc.get("w_range", [-1.0, 1.0]), "$.w_range", 2)
    if not (w_lo < w_hi):
        raise SceneParseError("$.w_range", "w_lo must be < w_hi")

    spawn_position = Vec4(0.0, 1.0, 0.0, 0.0)
    spawn_yaw = 0.0
    if "player_spawn" in doc:
        sp = doc["player_spawn"]
        _check_keys(sp, "$.player_spawn", set(), {"position", "yaw"})
        spawn_position = Vec4(*_floats(sp.get("position", [0, 1, 0, 0]),
                                       "$.player_spawn.position", 4))
        spawn_yaw = _number(sp.get("yaw", 0.0), "$.player_spawn.yaw")
    if not (w_lo <= spawn_position.w <= w_hi):
        raise SceneParseError("$.player_spawn.position", "spawn w outside w_range")

    energy = dict(DEFAULT_ENERGY)
    if "energy" in doc:
        _check_keys(doc["energy"], "$.energy", set(), set(DEFAULT_ENERGY))
        for k, v in doc["energy"].items():
            if k != "description":
                energy[k] = _number(v, f"$.energy.{k}", 0.0)
    radar = dict(DEFAULT_RADAR)
    if "radar" in doc:
        _check_keys(doc["radar"], "$.radar", set(), set(DEFAULT_RADAR))
        for k, v in doc["radar"].items():
            if k != "description":
                radar[k] = _number(v, f"$.radar.{k}", 0.0)

    if not isinstance(doc["nodes"], list):
        raise SceneParseError("$.nodes", "expected a list")
    nodes = []
    seen = set()
    for i, n in enumerate(doc["nodes"]):
        node = _parse_node(n, f"$.nodes[{i}]", base_dir)
        if node.id in seen:
            raise SceneParseError(f"$.nodes[{i}].id", f"duplicate node id {node.id}")
        seen.add(node.id)
        nodes.append(node)
    nodes.sort(key=lambda n: n.id)

    return Scene(name=doc.get("name", "unnamed"), nodes=nodes, gravity=gravity,
                 w_range=(w_lo, w_hi), spawn_position=spawn_position,
                 spawn_yaw=spawn_yaw, energy=energy, radar=radar)


def load_scene_file(path: str) -> Scene:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return load_scene(text, base_dir=os.path.dirname(os.path.abspath(path)))


# --- small procedural 3D surfaces for authoring -------------------------------


def quad_surface(size_x: float, size_z: float) -> TriMesh3:
    """Two-triangle horizontal quad in the xz plane, centered at the origin."""
    hx, hz = size_x / 2.0, size_z / 2.0
    verts = np.array([[-hx, 0, -hz], [hx, 0, -hz], [hx, 0, hz], [-hx, 0, hz]])
    tris = np.array([[0, 2, 1], [0, 3, 2]], dtype=np.int64)
    return TriMesh3(verts, tris)


def box_surface(sx: float, sy: float, sz: float) -> TriMesh3:
    """The 12-triangle surface of an axis-aligned box, outward wound."""
    hx, hy, hz = sx / 2.0, sy / 2.0, sz / 2.0
    verts = np.array([[x, y, z] for x in (-hx, hx) for y in (-hy, hy) for z in (-hz, hz)])
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # x- x+
        (0, 4, 5, 1), (2, 3, 7, 6),  # y- y+
        (0, 2, 6, 4), (1, 5, 7, 3),  # z- z+
    ]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriMesh3(verts, np.array(tris, dtype=np.int64))
