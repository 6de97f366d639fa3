"""Deterministic interactive sessions over hybrid 3D/4D scenes.

One session owns one mutable state advanced by fixed-dt ticks. A tick
applies inputs, advances animations and physics, projects the visible
nodes through the camera rig, and emits a Frame. Replaying the same input
log from the same seed reproduces bitwise-identical state hashes.

Key bindings (applied by the session, sent by any client):
w/a/s/d move, q/e move along w, z/x orbit the 4D camera, f toggles
projection mode; actions: fire, manipulate, ghost, blast, field.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import (
    Hyperplane,
    PlaneAngles,
    Pose4,
    Rotation4,
    Transform4,
    Vec4,
    compose,
    rotation_from_plane_angles,
    rotation_with_w_axis,
)
from .meshes import TriMesh3, make_primitive, mesh_w_extent
from .physics import (
    FIXED_DT,
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
    SyncMode,
    cross_section,
    orbit_update,
    project_node,
    synced_camera4,
    transition_step,
)
from .scene import Scene, SceneNode

PLAYER_RADIUS = 0.4
PLAYER_MASS = 70.0
PLAYER_EYE_HEIGHT = 0.6
MOVE_SPEED = 5.0       # m/s in xz
W_MOVE_SPEED = 2.0     # m/s along w
MOUSE_SENSITIVITY = 0.003
ORBIT_RATE = 1.5       # rad/s on z/x keys
TRANSITION_TIME = 0.5  # s for frustum -> cross-section rejoin
BULLET_SPEED = 30.0
BULLET_RADIUS = 0.15
BULLET_AMPLITUDE = 1.0
BULLET_OMEGA = 2.0 * math.pi
BULLET_LIFETIME = 10.0
BLAST_RADIUS = 10.0
FIELD_RADIUS = 10.0
PROJECTILE_ID_BASE = 10_000


@dataclass
class Inputs:
    """One tick of player input."""

    keys: frozenset = frozenset()
    mouse_dx: float = 0.0
    mouse_dy: float = 0.0
    actions: tuple = ()

    @staticmethod
    def from_dict(obj: dict) -> "Inputs":
        keys = frozenset(str(k).lower() for k in obj.get("keys", []))
        actions = tuple(obj.get("actions", []))
        return Inputs(keys, float(obj.get("mouse_dx", 0.0)),
                      float(obj.get("mouse_dy", 0.0)), actions)


@dataclass
class RadarPin:
    node_id: int
    planar: tuple  # (x, z) relative to the player
    altitude: float  # altitude_scale * (node center w - player w)


@dataclass
class FrameMesh:
    node_id: int
    mesh: TriMesh3
    material: tuple
    changed: bool
    wireframe: bool = False


@dataclass
class Frame:
    tick: int
    time: float
    energy: float
    meshes: list[FrameMesh]
    radar: list[RadarPin]
    camera: dict
    events: list[dict]


@dataclass
class Projectile:
    id: int
    position: Vec4
    velocity: Vec4
    birth_time: float
    base_w: float
    amplitude: float = BULLET_AMPLITUDE
    omega: float = BULLET_OMEGA
    sinusoidal: bool = True  # until first impact, w follows the sine track
    alive: bool = True


class NodeState:
    """Mutable per-node runtime state on top of the immutable scene node."""

    def __init__(self, node: SceneNode):
        self.node = node
        self.transform = node.transform
        self.alive = True
        self.velocity = node.body.velocity if node.body else Vec4()
        self.anim_start: float | None = (
            0.0 if node.animation and node.animation.trigger == "start" else None)
        self.wireframe_until = -1.0
        self.was_visible: bool | None = None


class Session:
    """Owns all mutable state of one running scene."""

    def __init__(self, scene: Scene, seed: int = 0):
        self.scene = scene
        self.rng_seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.time = 0.0
        self.tick_index = 0
        self.energy = float(scene.energy["max"]) / 2.0
        self.nodes = {n.id: NodeState(n) for n in scene.nodes}
        self.projectiles: list[Projectile] = []
        self._next_projectile = PROJECTILE_ID_BASE
        self.yaw = scene.spawn_yaw
        self.pitch = 0.0
        self.player = RigidBody4(
            pose=Pose4(scene.spawn_position),
            mass=PLAYER_MASS,
            collider=SphereCollider(PLAYER_RADIUS),
            restitution=0.0,
        )
        self.transition_remaining = 0.0
        cam3 = self._cam3_pose()
        cam4 = synced_camera4(cam3, scene.spawn_position.w, Camera4())
        self.rig = CameraRig(cam4=cam4, cam3_pose=cam3, sync=SyncMode.SYNCED)
        self._mesh_cache: dict[int, tuple[bytes, TriMesh3]] = {}
        self._bullet_mesh = make_primitive("hypersphere", BULLET_RADIUS, 1)
        self._events: list[dict] = []
        self._spent = 0.0
        self._gained = 0.0
        self._touching: set[tuple] = set()

    # --- orientation helpers -------------------------------------------------

    def _cam3_matrix(self) -> np.ndarray:
        """Camera-to-world: x right, y up, z forward (view direction)."""
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        yaw_m = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
        pitch_m = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
        return yaw_m @ pitch_m

    def _cam3_pose(self) -> Pose3:
        p = self.player.pose.translation
        eye = (p.x, p.y + PLAYER_EYE_HEIGHT, p.z)
        m = self._cam3_matrix()
        return Pose3(eye, tuple(map(tuple, m)))

    def _forward3(self) -> np.ndarray:
        return self._cam3_matrix() @ np.array([0.0, 0.0, 1.0])

    # --- public operations ----------------------------------------------------

    def fire_projectile(self, kind: str = "sinusoid") -> bool:
        """Spawn a w-oscillating bullet if energy allows; returns success."""
        if kind != "sinusoid":
            self._events.append({"type": "invalid-input",
                                 "reason": f"unknown projectile kind '{kind}'"})
            return False
        cost = self.scene.energy["fire_cost"]
        if self.energy < cost:
            self._events.append({"type": "insufficient-energy", "action": "fire"})
            return False
        self.energy -= cost
        self._spent += cost
        fwd = self._forward3()
        p = self.player.pose.translation
        start = Vec4(p.x + fwd[0] * (PLAYER_RADIUS + BULLET_RADIUS + 0.1),
                     p.y + PLAYER_EYE_HEIGHT + fwd[1] * (PLAYER_RADIUS + BULLET_RADIUS + 0.1),
                     p.z + fwd[2] * (PLAYER_RADIUS + BULLET_RADIUS + 0.1),
                     p.w)
        bullet = Projectile(
            id=self._next_projectile,
            position=start,
            velocity=Vec4(fwd[0] * BULLET_SPEED, fwd[1] * BULLET_SPEED,
                          fwd[2] * BULLET_SPEED, 0.0),
            birth_time=self.time,
            base_w=p.w,
        )
        self._next_projectile += 1
        self.projectiles.append(bullet)
        self._events.append({"type": "projectile-spawned", "id": bullet.id})
        return True

    def ghost_previews(self, node_id: int,
                       candidates: list[PlaneAngles]) -> list[TriMesh3]:
        """Projected previews of candidate 4D rotations; never mutates state."""
        state = self.nodes.get(node_id)
        if state is None or not state.alive:
            raise KeyError(f"no live node with id {node_id}")
        if "manipulable" not in state.node.tags:
            raise ValueError(f"node {node_id} is not manipulable")
        previews = []
        for angles in candidates:
            transform = self._manipulated_transform(state, angles)
            previews.append(self._project_4d(state.node.tetra_mesh, transform))
        return previews

    def apply_manipulation(self, node_id: int, angles: PlaneAngles) -> bool:
        state = self.nodes.get(node_id)
        if state is None or not state.alive:
            self._events.append({"type": "invalid-input",
                                 "reason": f"no live node {node_id}"})
            return False
        if "manipulable" not in state.node.tags or not state.node.is_4d:
            self._events.append({"type": "invalid-input",
                                 "reason": f"node {node_id} not manipulable"})
            return False
        cost = self.scene.energy["manipulate_cost"]
        if self.energy < cost:
            self._events.append({"type": "insufficient-energy", "action": "manipulate"})
            return False
        self.energy -= cost
        self._spent += cost
        state.transform = self._manipulated_transform(state, angles)
        self._events.append({"type": "manipulated", "node_id": node_id})
        return True

    def _manipulated_transform(self, state: NodeState, angles: PlaneAngles) -> Transform4:
        """Rotate the node about its own centroid: T_c . R . T_c^-1 . current."""
        centroid = state.transform.apply_points(state.node.tetra_mesh.vertices).mean(axis=0)
        c = Vec4.from_array(centroid)
        spin = compose(
            Transform4.translate(c.x, c.y, c.z, c.w),
            compose(Transform4.rotate(angles),
                    Transform4.translate(-c.x, -c.y, -c.z, -c.w)))
        return compose(spin, state.transform)

    def radar_pins(self) -> list[RadarPin]:
        """One pin per live 4D node (and bullet) within radar range."""
        pins = []
        p = self.player.pose.translation
        radius = self.scene.radar["radius"]
        k = self.scene.radar["altitude_scale"]
        for nid in sorted(self.nodes):
            state = self.nodes[nid]
            if not state.alive or not state.node.is_4d:
                continue
            w_lo, w_hi = mesh_w_extent(state.node.tetra_mesh, state.transform)
            center = state.transform.apply_points(
                state.node.tetra_mesh.vertices).mean(axis=0)
            dx, dz = center[0] - p.x, center[2] - p.z
            if math.hypot(dx, dz) > radius:
                continue
            pins.append(RadarPin(nid, (dx, dz), k * ((w_lo + w_hi) / 2.0 - p.w)))
        for bullet in self.projectiles:
            if not bullet.alive:
                continue
            b = bullet.position
            dx, dz = b.x - p.x, b.z - p.z
            if math.hypot(dx, dz) > radius:
                continue
            pins.append(RadarPin(bullet.id, (dx, dz), k * (b.w - p.w)))
        return pins

    # --- the tick -------------------------------------------------------------

    def tick(self, inputs: Inputs, dt: float = FIXED_DT) -> Frame:
        if not (dt > 0.0):
            raise ValueError(f"dt must be positive, got {dt}")
        self._events: list[dict] = []
        self._spent = 0.0
        self._gained = 0.0

        self._apply_look(inputs)
        self._apply_movement(inputs, dt)
        self._apply_actions(inputs, dt)
        self._advance_animations(dt)
        self._step_physics(dt)
        self._update_rig(inputs, dt)

        self.time += dt
        self.tick_index += 1
        frame = self._emit_frame()
        return frame

    def _apply_look(self, inputs: Inputs):
        self.yaw -= inputs.mouse_dx * MOUSE_SENSITIVITY
        self.pitch = max(-1.5, min(1.5, self.pitch - inputs.mouse_dy * MOUSE_SENSITIVITY))

    def _apply_movement(self, inputs: Inputs, dt: float):
        keys = inputs.keys
        move = np.zeros(3)
        fwd = self._cam3_matrix() @ np.array([0.0, 0.0, 1.0])
        fwd[1] = 0.0
        n = np.linalg.norm(fwd)
        fwd = fwd / n if n > 1e-9 else np.array([0.0, 0.0, 1.0])
        right = np.array([fwd[2], 0.0, -fwd[0]])
        if "w" in keys:
            move += fwd
        if "s" in keys:
            move -= fwd
        if "d" in keys:
            move += right
        if "a" in keys:
            move -= right
        n = np.linalg.norm(move)
        v = self.player.linear_velocity
        if n > 1e-9:
            move = move / n * MOVE_SPEED
            new_v = Vec4(move[0], v.y, move[2], 0.0)
        else:
            new_v = Vec4(0.0, v.y, 0.0, 0.0)
        self.player = replace(self.player, linear_velocity=new_v)

        dw = 0.0
        if "q" in keys:
            dw -= W_MOVE_SPEED * dt
        if "e" in keys:
            dw += W_MOVE_SPEED * dt
        if dw != 0.0:
            w_lo, w_hi = self.scene.w_range
            p = self.player.pose.translation
            target = max(w_lo, min(w_hi, p.w + dw))
            actual = target - p.w
            if actual != 0.0:
                cost = self.scene.energy["move_w_cost"] * abs(actual)
                if self.energy >= cost:
                    self.energy -= cost
                    self._spent += cost
                    pose = Pose4(Vec4(p.x, p.y, p.z, target), self.player.pose.rotation)
                    self.player = replace(self.player, pose=pose)
                else:
                    self._events.append({"type": "insufficient-energy", "action": "move-w"})

    def _apply_actions(self, inputs: Inputs, dt: float):
        for action in inputs.actions:
            if not isinstance(action, dict) or "type" not in action:
                self._events.append({"type": "invalid-input", "reason": "malformed action"})
                continue
            kind = action["type"]
            if kind == "fire":
                self.fire_projectile(str(action.get("kind", "sinusoid")))
            elif kind == "toggle_mode":
                self._toggle_mode()
            elif kind == "manipulate":
                try:
                    angles = PlaneAngles(**{k: float(v) for k, v in
                                            action.get("rotation", {}).items()})
                except (TypeError, ValueError):
                    self._events.append({"type": "invalid-input",
                                         "reason": "malformed rotation"})
                    continue
                self.apply_manipulation(int(action.get("node_id", -1)), angles)
            elif kind == "ghost":
                self._ghost_action(action)
            elif kind == "blast":
                self._radial_blast()
            elif kind == "field":
                self._wireframe_field()
            else:
                self._events.append({"type": "invalid-input",
                                     "reason": f"unknown action '{kind}'"})

    def _toggle_mode(self):
        if self.rig.cam4.mode is ProjectionMode.CROSS_SECTION:
            if self.energy <= 0.0:
                self._events.append({"type": "insufficient-energy", "action": "frustum"})
                return
            # freeze the 4D camera at the synced pose and start orbiting
            fwd = self._forward3()
            p = self.rig.cam4.pose.translation
            focus = Vec4(p.x + fwd[0] * 3.0, p.y + fwd[1] * 3.0, p.z + fwd[2] * 3.0, p.w)
            orbit = OrbitState(focus=focus, radius=3.0, angle=0.0,
                               initial_dir=Vec4(fwd[0], fwd[1], fwd[2], 0.0))
            cam4 = replace(self.rig.cam4, mode=ProjectionMode.FRUSTUM)
            self.rig = replace(self.rig, cam4=cam4, sync=SyncMode.DETACHED, orbit=orbit)
            self.transition_remaining = 0.0
            self._events.append({"type": "mode-switch", "mode": "frustum"})
        elif self.transition_remaining <= 0.0:
            self.transition_remaining = TRANSITION_TIME
            self._events.append({"type": "mode-switch", "mode": "cross_section"})

    def _ghost_action(self, action: dict):
        """Answer a viewer's preview request with projected ghost meshes.

        The previews ride in a frame event so the thin client never needs
        geometry code of its own.
        """
        node_id = int(action.get("node_id", -1))
        raw = action.get("candidates", [{"xw": math.pi / 2}, {"xw": math.pi},
                                        {"zw": math.pi / 2}])
        try:
            candidates = [PlaneAngles(**{k: float(v) for k, v in c.items()})
                          for c in raw]
            previews = self.ghost_previews(node_id, candidates)
        except (KeyError, ValueError, TypeError) as e:
            self._events.append({"type": "invalid-input", "reason": str(e)})
            return
        payload = []
        for angles, mesh in zip(candidates, previews):
            payload.append({
                "rotation": {k: v for k, v in zip(
                    ("xy", "xz", "yz", "xw", "yw", "zw"), angles.as_tuple()) if v},
                "vertices": [float(x) for x in mesh.vertices.reshape(-1)],
                "triangles": [int(i) for i in mesh.triangles.reshape(-1)],
            })
        self._events.append({"type": "ghost-previews", "node_id": node_id,
                             "previews": payload})

    def _radial_blast(self):
        cost = self.scene.energy["blast_cost"]
        if self.energy < cost:
            self._events.append({"type": "insufficient-energy", "action": "blast"})
            return
        self.energy -= cost
        self._spent += cost
        p = self.player.pose.translation
        moved = []
        for nid in sorted(self.nodes):
            state = self.nodes[nid]
            if not state.alive or not state.node.is_4d:
                continue
            center = state.transform.apply_points(
                state.node.tetra_mesh.vertices).mean(axis=0)
            if np.linalg.norm(center[:3] - np.array([p.x, p.y, p.z])) > BLAST_RADIUS:
                continue
            dt_w = p.w - center[3]
            state.transform = compose(Transform4.translate(0, 0, 0, dt_w), state.transform)
            moved.append(nid)
        self._events.append({"type": "blast", "nodes": moved})

    def _wireframe_field(self):
        cost = self.scene.energy["field_cost"]
        if self.energy < cost:
            self._events.append({"type": "insufficient-energy", "action": "field"})
            return
        self.energy -= cost
        self._spent += cost
        p = self.player.pose.translation.to_array()
        marked = []
        for nid in sorted(self.nodes):
            state = self.nodes[nid]
            if not state.alive or not state.node.is_4d:
                continue
            center = state.transform.apply_points(
                state.node.tetra_mesh.vertices).mean(axis=0)
            if np.linalg.norm(center[:3] - p[:3]) > FIELD_RADIUS:
                continue
            state.wireframe_until = self.time + 5.0
            marked.append(nid)
        self._events.append({"type": "field", "nodes": marked})

    def _advance_animations(self, dt: float):
        p = self.player.pose.translation.to_array()
        for nid in sorted(self.nodes):
            state = self.nodes[nid]
            anim = state.node.animation
            if anim is None or not state.alive:
                continue
            if state.anim_start is None and anim.trigger == "player-near":
                center = state.transform.apply_points(
                    state.node.tetra_mesh.vertices
                    if state.node.is_4d else
                    np.hstack([state.node.tri_mesh.vertices,
                               np.zeros((state.node.tri_mesh.n_vertices, 1))])
                ).mean(axis=0)
                if np.linalg.norm(center - p) <= anim.radius:
                    state.anim_start = self.time
                    self._events.append({"type": "animation-started", "node_id": nid})
            if state.anim_start is not None:
                state.transform = anim.sample(self.time + dt - state.anim_start)

    def _node_body(self, state: NodeState) -> RigidBody4:
        spec = state.node.body
        collider = spec.collider
        if isinstance(collider, HalfSpaceCollider) and collider.plane is None:
            axis = Rotation4(state.transform.rotation.m
                             @ rotation_with_w_axis(collider.up).m, _skip_check=True)
            collider = HalfSpaceCollider(Hyperplane(Pose4(
                state.transform.translation, axis)))
        return RigidBody4(
            pose=Pose4(state.transform.translation, state.transform.rotation),
            linear_velocity=state.velocity,
            mass=spec.mass,
            collider=collider,
            restitution=spec.restitution,
            kinematic=spec.kinematic,
        )

    def _step_physics(self, dt: float):
        # body roster: player, then body nodes by id, then live bullets
        ids: list[tuple[str, int]] = [("player", -1)]
        bodies = [self.player]
        node_ids = [nid for nid in sorted(self.nodes)
                    if self.nodes[nid].node.body is not None and self.nodes[nid].alive]
        for nid in node_ids:
            ids.append(("node", nid))
            bodies.append(self._node_body(self.nodes[nid]))
        bullets = [b for b in self.projectiles if b.alive]
        for b in bullets:
            ids.append(("bullet", b.id))
            bodies.append(RigidBody4(
                pose=Pose4(b.position), linear_velocity=b.velocity, mass=0.3,
                collider=SphereCollider(BULLET_RADIUS), restitution=0.4))

        bodies = integrate(bodies, self.scene.gravity, dt)

        # player w motion is purely kinematic: no w velocity survives a tick
        p = bodies[0]
        bodies[0] = replace(
            p, pose=Pose4(Vec4(p.pose.translation.x, p.pose.translation.y,
                               p.pose.translation.z, self.player.pose.translation.w)),
            linear_velocity=replace_w(p.linear_velocity, 0.0))

        # sinusoidal bullets override integrated w with their parametric track
        t_next = self.time + dt
        for slot, b in enumerate(bullets):
            bi = 1 + len(node_ids) + slot
            if b.sinusoidal:
                body = bodies[bi]
                w = b.base_w + b.amplitude * math.sin(b.omega * (t_next - b.birth_time))
                w_vel = b.amplitude * b.omega * math.cos(b.omega * (t_next - b.birth_time))
                bodies[bi] = replace(
                    body,
                    pose=Pose4(replace_w(body.pose.translation, w), body.pose.rotation),
                    linear_velocity=replace_w(body.linear_velocity, w_vel))

        contacts = detect_collisions(bodies)
        crystals = {nid for nid in node_ids if "crystal" in self.nodes[nid].node.tags}
        touching_now: set[tuple] = set()
        for contact in contacts:
            kind_a, id_a = ids[contact.body_a]
            kind_b, id_b = ids[contact.body_b]
            pair = ((kind_a, id_a), (kind_b, id_b))
            touching_now.add(pair)
            # crystal pickup: sensor contact, no impulse
            crystal = None
            if kind_a == "node" and id_a in crystals:
                crystal = id_a
                other = kind_b
            elif kind_b == "node" and id_b in crystals:
                crystal = id_b
                other = kind_a
            if crystal is not None:
                if other == "player":
                    value = self.scene.energy["crystal_value"]
                    gain = min(value, self.scene.energy["max"] - self.energy)
                    self.energy += gain
                    self._gained += gain
                    self.nodes[crystal].alive = False
                    self._events.append({"type": "pickup", "node_id": crystal,
                                         "value": value})
                continue
            bodies = resolve_contact(contact, bodies)
            if pair not in self._touching:
                # only report entering contacts; resting pairs stay silent
                self._events.append({
                    "type": "collision",
                    "a": f"{kind_a}:{id_a if id_a >= 0 else ''}".rstrip(":"),
                    "b": f"{kind_b}:{id_b if id_b >= 0 else ''}".rstrip(":"),
                })
            for kind, ident in ((kind_a, id_a), (kind_b, id_b)):
                if kind == "bullet":
                    for b in bullets:
                        if b.id == ident:
                            b.sinusoidal = False
                if kind == "node":
                    anim = self.nodes[ident].node.animation
                    if (anim is not None and anim.trigger == "on-hit"
                            and self.nodes[ident].anim_start is None):
                        self.nodes[ident].anim_start = self.time + dt
                        self._events.append({"type": "animation-started",
                                             "node_id": ident})

        self._touching = touching_now

        # write back
        self.player = bodies[0]
        pw = self.player.pose.translation
        w_lo, w_hi = self.scene.w_range
        if not (w_lo <= pw.w <= w_hi):
            clamped = max(w_lo, min(w_hi, pw.w))
            self.player = replace(self.player, pose=Pose4(
                replace_w(pw, clamped), self.player.pose.rotation))
        for slot, nid in enumerate(node_ids):
            body = bodies[1 + slot]
            state = self.nodes[nid]
            if not state.node.body.kinematic:
                state.transform = Transform4(
                    body.pose.rotation, body.pose.translation, state.transform.scale)
                state.velocity = body.linear_velocity
        for slot, b in enumerate(bullets):
            body = bodies[1 + len(node_ids) + slot]
            b.position = body.pose.translation
            b.velocity = body.linear_velocity
            if t_next - b.birth_time > BULLET_LIFETIME:
                b.alive = False
        self.projectiles = [b for b in self.projectiles if b.alive]

    def _update_rig(self, inputs: Inputs, dt: float):
        cam3 = self._cam3_pose()
        if self.rig.sync is SyncMode.SYNCED:
            w = self.player.pose.translation.w
            cam4 = synced_camera4(cam3, w, self.rig.cam4)
            self.rig = replace(self.rig, cam4=cam4, cam3_pose=cam3)
            return
        # detached: 3D camera follows the player, 4D camera is independent
        self.rig = replace(self.rig, cam3_pose=cam3)
        if self.rig.cam4.mode is ProjectionMode.FRUSTUM:
            drain = min(self.scene.energy["frustum_cost"] * dt, self.energy)
            self.energy -= drain
            self._spent += drain
            if self.energy <= 0.0 and self.transition_remaining <= 0.0:
                self.transition_remaining = TRANSITION_TIME
                self._events.append({"type": "mode-switch", "mode": "cross_section",
                                     "reason": "energy-depleted"})
        if self.transition_remaining > 0.0:
            alpha = 1.0 if self.transition_remaining <= dt else dt / self.transition_remaining
            self.transition_remaining = max(0.0, self.transition_remaining - dt)
            self.rig = transition_step(self.rig, alpha)
            return
        if self.rig.orbit is not None:
            delta = 0.0
            if "z" in inputs.keys:
                delta += ORBIT_RATE * dt
            if "x" in inputs.keys:
                delta -= ORBIT_RATE * dt
            if delta != 0.0:
                self.rig = orbit_update(self.rig, delta)

    # --- frame assembly --------------------------------------------------------

    def _camera_key(self) -> bytes:
        """Projection-relevant camera state for the mesh cache.

        In synced cross-section mode the slice set is {w = player w}
        whatever the 3D camera does, so only w enters the key: mouse look
        and resting-contact jitter never invalidate node caches.
        """
        cam = self.rig.cam4
        if self.rig.sync is SyncMode.SYNCED and cam.mode is ProjectionMode.CROSS_SECTION:
            return b"sliceW" + struct.pack("<d", cam.pose.translation.w)
        return (cam.pose.state_bytes() + cam.mode.value.encode()
                + struct.pack("<dd", cam.focal, cam.near_w))

    def _project_4d(self, mesh4, transform: Transform4) -> TriMesh3:
        """World-space projection of 4D geometry through the current rig.

        Synced cross-section slices against the canonical axis-aligned plane
        at the shared w (the same point set as the camera-pose plane, already
        in world coordinates); everything else goes through project_node.
        Session projections keep the raw marching output (simplify=False).
        """
        cam = self.rig.cam4
        if self.rig.sync is SyncMode.SYNCED and cam.mode is ProjectionMode.CROSS_SECTION:
            plane = Hyperplane.axis_aligned(cam.pose.translation.w)
            return cross_section(mesh4, transform, plane, simplify=False)
        return project_node(mesh4, transform, self.rig, simplify=False)

    def _project(self, state: NodeState) -> tuple[TriMesh3, bool]:
        """Project one node, reusing the cached mesh when nothing changed."""
        node = state.node
        if node.is_4d:
            key = state.transform.state_bytes() + self._camera_key()
        else:
            key = state.transform.state_bytes()
        cached = self._mesh_cache.get(node.id)
        if cached is not None and cached[0] == key:
            return cached[1], False
        if node.is_4d:
            mesh = self._project_4d(node.tetra_mesh, state.transform)
        else:
            pts4 = np.hstack([node.tri_mesh.vertices,
                              np.zeros((node.tri_mesh.n_vertices, 1))])
            world = state.transform.apply_points(pts4)[:, :3]
            mesh = TriMesh3(world, node.tri_mesh.triangles,
                            node.tri_mesh.vertex_colors, validate=False)
        self._mesh_cache[node.id] = (key, mesh)
        return mesh, True

    def _project_bullet(self, bullet: Projectile) -> tuple[TriMesh3, bool]:
        transform = Transform4(translation=bullet.position)
        key = transform.state_bytes() + self._camera_key()
        cached = self._mesh_cache.get(bullet.id)
        if cached is not None and cached[0] == key:
            return cached[1], False
        mesh = self._project_4d(self._bullet_mesh, transform)
        self._mesh_cache[bullet.id] = (key, mesh)
        return mesh, True

    def _emit_frame(self) -> Frame:
        meshes = []
        for nid in sorted(self.nodes):
            state = self.nodes[nid]
            if not state.alive:
                if state.was_visible:
                    self._events.append({"type": "node-vanished", "node_id": nid})
                    state.was_visible = False
                self._mesh_cache.pop(nid, None)
                continue
            mesh, changed = self._project(state)
            visible = not mesh.is_empty
            if state.was_visible is not None and visible != state.was_visible:
                self._events.append({
                    "type": "node-appeared" if visible else "node-vanished",
                    "node_id": nid})
            state.was_visible = visible
            if visible:
                meshes.append(FrameMesh(
                    nid, mesh, state.node.material, changed,
                    wireframe=self.time < state.wireframe_until))
        for bullet in self.projectiles:
            mesh, changed = self._project_bullet(bullet)
            if not mesh.is_empty:
                meshes.append(FrameMesh(bullet.id, mesh, (1.0, 0.3, 0.1, 1.0), changed))
        cam = self.rig.cam4
        camera = {
            "mode": cam.mode.value,
            "sync": self.rig.sync.value,
            "cam4_position": list(cam.pose.translation.to_array()),
            "cam3_position": list(self.rig.cam3_pose.position),
            "yaw": self.yaw,
            "pitch": self.pitch,
            "orbit_angle": self.rig.orbit.angle if self.rig.orbit else None,
            "focus": list(self.rig.orbit.focus.to_array()) if self.rig.orbit else None,
        }
        frame = Frame(
            tick=self.tick_index, time=self.time, energy=self.energy,
            meshes=meshes, radar=self.radar_pins(), camera=camera,
            events=list(self._events))
        return frame

    # --- hashing ---------------------------------------------------------------

    def state_hash(self) -> str:
        """Canonical digest of the full dynamic state (bitwise-stable)."""
        h = hashlib.sha256()
        h.update(struct.pack("<qdq", self.tick_index, self.time, self.rng_seed))
        h.update(struct.pack("<ddd", self.energy, self.yaw, self.pitch))
        h.update(self.player.state_bytes())
        h.update(self.rig.cam4.pose.state_bytes())
        h.update(self.rig.cam4.mode.value.encode())
        h.update(self.rig.sync.value.encode())
        h.update(struct.pack("<d", self.transition_remaining))
        if self.rig.orbit:
            h.update(self.rig.orbit.focus.to_array().tobytes())
            h.update(struct.pack("<dd", self.rig.orbit.radius, self.rig.orbit.angle))
        for nid in sorted(self.nodes):
            state = self.nodes[nid]
            h.update(struct.pack("<q?", nid, state.alive))
            if state.alive:
                h.update(state.transform.state_bytes())
                h.update(state.velocity.to_array().tobytes())
                h.update(struct.pack("<d", -1.0 if state.anim_start is None
                                     else state.anim_start))
        for b in self.projectiles:
            h.update(struct.pack("<q?d", b.id, b.sinusoidal, b.birth_time))
            h.update(b.position.to_array().tobytes())
            h.update(b.velocity.to_array().tobytes())
        return h.hexdigest()


def replace_w(v: Vec4, w: float) -> Vec4:
    return Vec4(v.x, v.y, v.z, w)


def run_headless(scene: Scene, input_log: dict[int, Inputs], ticks: int,
                 seed: int = 0, on_tick=None) -> tuple[Session, list[str]]:
    """Run a session without I/O; returns the session and per-tick log lines.

    Log line format: tick,time,player_pose(9 numbers),energy,state_hash
    where the pose numbers are position xyzw, velocity xyzw, yaw.
    """
    session = Session(scene, seed=seed)
    lines = []
    for k in range(ticks):
        inputs = input_log.get(k, Inputs())
        frame = session.tick(inputs)
        p = session.player.pose.translation
        v = session.player.linear_velocity
        pose9 = [p.x, p.y, p.z, p.w, v.x, v.y, v.z, v.w, session.yaw]
        lines.append(
            f"{frame.tick},{frame.time!r},"
            + ",".join(repr(x) for x in pose9)
            + f",{session.energy!r},{session.state_hash()}")
        if on_tick is not None:
            on_tick(session, frame)
    return session, lines
