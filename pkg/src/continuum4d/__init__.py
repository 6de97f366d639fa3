"""continuum4d: a 4D tetra-mesh geometry and simulation engine.

Objects live in 4D Euclidean space as tetrahedral meshes, get projected to
3D through a dual-camera model (hyperplane cross-section or 4D frustum),
move under a simple rigid-body generalization of 3D physics, and run in
deterministic interactive sessions over hybrid 3D/4D scenes.
"""

from .linalg import (
    Hyperplane,
    PlaneAngles,
    Pose4,
    Rotation4,
    Transform4,
    Vec4,
    apply,
    compose,
    invert,
    rotation_from_plane_angles,
)
from .meshes import (
    PrimitiveKind,
    TetraMesh4,
    TriMesh3,
    dump_tmesh4,
    extrude_lift,
    load_tmesh4,
    make_primitive,
    mesh_w_extent,
    read_tmesh4,
    write_tmesh4,
)
from .physics import (
    BoxCollider,
    Contact,
    HalfSpaceCollider,
    RigidBody4,
    SphereCollider,
    detect_collisions,
    integrate,
    resolve_contact,
)
from .projection import (
    Camera4,
    CameraRig,
    OrbitState,
    Pose3,
    ProjectionMode,
    SlicePolygon,
    SyncMode,
    cross_section,
    frustum_project,
    orbit_update,
    project_node,
    slice_tetra,
    transition_step,
)
from .scene import Scene, SceneNode, SceneParseError, load_scene, load_scene_file
from .session import Frame, Inputs, RadarPin, Session, run_headless

__version__ = "0.1.0"

__all__ = [
    "Vec4", "PlaneAngles", "Rotation4", "Transform4", "Pose4", "Hyperplane",
    "rotation_from_plane_angles", "compose", "apply", "invert",
    "TetraMesh4", "TriMesh3", "PrimitiveKind", "make_primitive", "extrude_lift",
    "mesh_w_extent", "dump_tmesh4", "load_tmesh4", "read_tmesh4", "write_tmesh4",
    "Camera4", "CameraRig", "Pose3", "OrbitState", "ProjectionMode", "SyncMode",
    "SlicePolygon", "slice_tetra", "cross_section", "frustum_project",
    "project_node", "orbit_update", "transition_step",
    "RigidBody4", "SphereCollider", "BoxCollider", "HalfSpaceCollider", "Contact",
    "integrate", "detect_collisions", "resolve_contact",
    "Scene", "SceneNode", "SceneParseError", "load_scene", "load_scene_file",
    "Session", "Inputs", "Frame", "RadarPin", "run_headless",
]
