"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one [ACCEPTANCE] pass/fail line (visible with `pytest -s`
or in the failure report). Oracles are the independent implementations in
conftest: brute-force edge slicing, Monte Carlo containment, convex hulls.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from continuum4d.bench import run_bench
from continuum4d.cli import main
from continuum4d.linalg import (
    Hyperplane,
    PlaneAngles,
    Pose4,
    Transform4,
    Vec4,
    rotation_from_plane_angles,
)
from continuum4d.meshes import extrude_lift, make_primitive, mesh_w_extent
from continuum4d.physics import (
    RigidBody4,
    SphereCollider,
    detect_collisions,
    integrate,
    resolve_contact,
)
from continuum4d.projection import (
    Camera4,
    CameraRig,
    Pose3,
    ProjectionMode,
    SyncMode,
    cross_section,
    project_node,
    slice_tetra,
)
from continuum4d.scene import box_surface, load_scene, load_scene_file
from continuum4d.session import Inputs, Session

from conftest import (
    brute_force_slice,
    convex_hull_volume,
    mc_volume_tri_mesh,
    polygons_match,
    random_rigid_transform,
    random_tetra,
)

SCENES = os.path.join(os.path.dirname(__file__), "..", "scenes")


def report(name, ok, detail=""):
    print(f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"{name}: {detail}"


def test_tesseract_axis_aligned_slice():
    start = time.perf_counter()
    mesh = make_primitive("tesseract", 1.0)
    out = cross_section(mesh, Transform4.identity(), Hyperplane.axis_aligned(0.0))
    got = set(map(tuple, np.round(out.vertices, 9)))
    want = {(x, y, z) for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)}
    volume = convex_hull_volume(out.vertices)
    elapsed = time.perf_counter() - start
    ok = (out.n_vertices == 8 and got == want
          and abs(volume - 1.0) <= 1e-9 and elapsed < 1.0)
    report("tesseract-axis-slice", ok,
           f"verts={out.n_vertices} volume={volume:.12f} time={elapsed:.3f}s")


def test_rotated_tesseract_slice_volume():
    start = time.perf_counter()
    mesh = make_primitive("tesseract", 1.0)
    model = Transform4.rotate(PlaneAngles(xw=math.pi / 4))
    out = cross_section(mesh, model, Hyperplane.axis_aligned(0.0))
    mc = mc_volume_tri_mesh(out.vertices, out.triangles, samples=10 ** 6)
    expected = math.sqrt(2.0)
    ext = out.vertices.max(axis=0) - out.vertices.min(axis=0)
    stretched = ext[0] > 1.2 and abs(ext[1] - 1.0) < 1e-6 and abs(ext[2] - 1.0) < 1e-6
    elapsed = time.perf_counter() - start
    ok = abs(mc - expected) <= 0.01 * expected and stretched and elapsed < 30.0
    report("rotated-slice-volume", ok,
           f"mc={mc:.5f} expected={expected:.5f} stretch_x={ext[0]:.5f} "
           f"time={elapsed:.1f}s")


def test_persistence_window():
    mesh = make_primitive("tesseract", 1.0)

    def empty_at(model, c):
        return cross_section(mesh, model, Hyperplane.axis_aligned(c),
                             simplify=False).is_empty

    def transition(model, c_empty, c_full):
        lo, hi = c_empty, c_full
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if empty_at(model, mid):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    results = []
    for s in (1.0, 2.0, 3.0):
        model = Transform4.scaling(1, 1, 1, s)
        w_lo, w_hi = mesh_w_extent(mesh, model)
        lower = transition(model, w_lo - 1.0, 0.0)
        upper = transition(model, w_hi + 1.0, 0.0)
        results.append((s, upper - lower))
    ok = all(abs(length - s) <= 1e-6 for s, length in results)
    report("persistence-window", ok,
           " ".join(f"s={s:g}:len={l:.9f}" for s, l in results))


def test_slicing_oracle_equivalence():
    rng = np.random.default_rng(20240811)
    mismatches = 0
    for k in range(10_000):
        pts = random_tetra(rng)
        if k % 3 == 0:
            pose = Pose4()
        else:
            t = random_rigid_transform(rng)
            pose = Pose4(t.translation, t.rotation)
        plane = Hyperplane(pose)
        poly = slice_tetra(*(Vec4.from_array(p) for p in pts), plane)
        want = brute_force_slice(pts, pose.rotation.m, pose.translation.to_array())
        if not polygons_match(poly.vertices, want, tol=1e-9):
            mismatches += 1
    report("slicing-oracle-equivalence", mismatches == 0,
           f"mismatches={mismatches}/10000")


def test_frustum_agreement_at_switch():
    # compliant scene: no 4D-rotated geometry and no 4D content near the
    # slice (the one 4D node sits behind the projector's near margin, so
    # both modes see nothing of it)
    doc = {
        "continuum_scene": 1,
        "name": "switch-test",
        "w_range": [-8.0, 2.0],
        "player_spawn": {"position": [0, 1, 0, 0], "yaw": 0.0},
        "nodes": [
            {"id": 1, "geometry": {"kind": "tri3", "shape": "quad",
                                   "size": [20, 0, 20]},
             "body": {"collider": {"type": "halfspace", "up": [0, 1, 0, 0]},
                      "kinematic": True}},
            {"id": 2, "geometry": {"kind": "tetra4", "primitive": "tesseract",
                                   "size": 1.0},
             "transform": {"translation": [0, 1, 4, -5.0]}},
        ],
    }
    scene = load_scene(json.dumps(doc))
    session = Session(scene)
    for _ in range(300):
        last_cross = session.tick(Inputs())
    session.energy = 100.0
    first_frustum = session.tick(Inputs(actions=({"type": "toggle_mode"},)))
    ok = session.rig.cam4.mode is ProjectionMode.FRUSTUM

    def mesh_map(frame):
        return {m.node_id: m.mesh for m in frame.meshes}

    a, b = mesh_map(last_cross), mesh_map(first_frustum)
    ok = ok and set(a) == set(b)
    max_dev = 0.0
    for nid in a:
        if a[nid].vertices.shape != b[nid].vertices.shape:
            ok = False
            break
        max_dev = max(max_dev, float(np.abs(a[nid].vertices - b[nid].vertices).max()
                                     if len(a[nid].vertices) else 0.0))
    ok = ok and max_dev <= 1e-9

    # detached-mode projections bitwise-invariant under 3D-camera movement
    mesh4 = make_primitive("tesseract", 1.0)
    cam4 = Camera4(pose=Pose4(Vec4(0, 1, 0, 0)), mode=ProjectionMode.FRUSTUM)
    rig1 = CameraRig(cam4=cam4, cam3_pose=Pose3((0, 1, 0)), sync=SyncMode.DETACHED)
    rig2 = CameraRig(cam4=cam4, cam3_pose=Pose3((9.0, -2.0, 7.0)), sync=SyncMode.DETACHED)
    model = Transform4.translate(0, 1, 4, 0.2)
    bitwise = (project_node(mesh4, model, rig1).state_bytes()
               == project_node(mesh4, model, rig2).state_bytes())
    ok = ok and bitwise
    report("frustum-switch-agreement", ok,
           f"max_vertex_dev={max_dev:.2e} detached_bitwise={bitwise}")


def test_extrusion_roundtrip():
    surface = box_surface(1.0, 1.0, 1.0)
    slab = extrude_lift(surface, 0.5)
    ok = slab.n_tetrahedra == 36
    out = cross_section(slab, Transform4.identity(), Hyperplane.axis_aligned(0.25))
    slice_verts = out.vertices
    corners = np.array([[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5)
                        for z in (-0.5, 0.5)])
    worst = 0.0
    for corner in corners:
        dist = np.min(np.linalg.norm(slice_verts - corner, axis=1))
        worst = max(worst, float(dist))
    ok = ok and worst <= 1e-9
    # and nothing outside the original surface: every slice vertex on the cube
    on_surface = np.all(
        np.isclose(np.abs(slice_verts), 0.5, atol=1e-9).any(axis=1)
        & (np.abs(slice_verts) <= 0.5 + 1e-9).all(axis=1))
    area = _total_area(out)
    ok = ok and on_surface and abs(area - 6.0) <= 1e-6
    report("extrusion-roundtrip", ok,
           f"corner_dev={worst:.2e} area={area:.9f} on_surface={bool(on_surface)}")


def _total_area(mesh):
    tri = mesh.vertices[mesh.triangles]
    return float(np.sum(np.linalg.norm(
        np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)) / 2.0)


def test_physics_criteria():
    # equal-mass elastic head-on exchange
    a = RigidBody4(pose=Pose4(Vec4(0, 0, 0, 0)), linear_velocity=Vec4(2, 0, 0, 0),
                   collider=SphereCollider(1.0), restitution=1.0)
    b = RigidBody4(pose=Pose4(Vec4(1.9, 0, 0, 0)), linear_velocity=Vec4(-1, 0, 0, 0),
                   collider=SphereCollider(1.0), restitution=1.0)
    (c,) = detect_collisions([a, b])
    out = resolve_contact(c, [a, b])
    exchange_dev = max(
        float(np.abs(out[0].linear_velocity.to_array() - [-1, 0, 0, 0]).max()),
        float(np.abs(out[1].linear_velocity.to_array() - [2, 0, 0, 0]).max()))
    ok = exchange_dev <= 1e-9

    # momentum conservation across 1000 random two-body contacts
    rng = np.random.default_rng(20240812)
    worst_momentum = 0.0
    for _ in range(1000):
        pa = rng.uniform(-2, 2, 4)
        d = rng.normal(size=4)
        d = d / np.linalg.norm(d) * rng.uniform(0.3, 1.95)
        ma, mb = rng.uniform(0.2, 8.0, 2)
        bodies = [
            RigidBody4(pose=Pose4(Vec4(*pa)), linear_velocity=Vec4(*rng.uniform(-8, 8, 4)),
                       mass=ma, collider=SphereCollider(1.0),
                       restitution=rng.uniform(0, 1)),
            RigidBody4(pose=Pose4(Vec4(*(pa + d))),
                       linear_velocity=Vec4(*rng.uniform(-8, 8, 4)),
                       mass=mb, collider=SphereCollider(1.0),
                       restitution=rng.uniform(0, 1)),
        ]
        (contact,) = detect_collisions(bodies)
        after = resolve_contact(contact, bodies)
        p0 = ma * bodies[0].linear_velocity.to_array() + mb * bodies[1].linear_velocity.to_array()
        p1 = ma * after[0].linear_velocity.to_array() + mb * after[1].linear_velocity.to_array()
        rel = np.abs(p1 - p0).max() / max(1.0, np.abs(p0).max())
        worst_momentum = max(worst_momentum, float(rel))
    ok = ok and worst_momentum <= 1e-9

    # gravity never accelerates w
    body = RigidBody4(pose=Pose4(Vec4(0, 10, 0, 0.7)),
                      collider=SphereCollider(0.5))
    for _ in range(1000):
        (body,) = integrate([body])
    w_clean = body.linear_velocity.w == 0.0 and body.pose.translation.w == 0.7
    ok = ok and w_clean
    report("physics", ok,
           f"exchange_dev={exchange_dev:.2e} momentum_rel={worst_momentum:.2e} "
           f"w_clean={w_clean}")


def test_simulate_determinism_5000_ticks(tmp_path, capsys):
    # recorded input log covering movement, w travel, firing, manipulation,
    # the projection-mode switch and the orbit keys
    records = []
    for k in range(100, 400):
        records.append({"tick": k, "keys": ["w"], "mouse_dx": 2.0})
    for k in range(500, 900):
        records.append({"tick": k, "keys": ["e"]})
    records.append({"tick": 950, "actions": [{"type": "fire"}]})
    records.append({"tick": 1000, "actions": [{"type": "toggle_mode"}]})
    for k in range(1050, 1400):
        records.append({"tick": k, "keys": ["z"]})
    records.append({"tick": 1500, "actions": [{"type": "toggle_mode"}]})
    for k in range(1600, 2000):
        records.append({"tick": k, "keys": ["q", "a"]})
    records.append({"tick": 2100, "actions": [
        {"type": "manipulate", "node_id": 6, "rotation": {"xw": 1.2}}]})
    records.append({"tick": 2200, "actions": [{"type": "blast"}]})
    for k in range(2500, 3500, 3):
        records.append({"tick": k, "keys": ["w", "d"], "mouse_dx": -1.0})
    records.append({"tick": 4000, "actions": [{"type": "fire"}]})
    log_path = tmp_path / "inputs.jsonl"
    log_path.write_text("\n".join(json.dumps(r) for r in records) + "\n")

    hashes = []
    for _ in range(2):
        code = main(["simulate", "--scene", os.path.join(SCENES, "mini_level.json"),
                     "--input-log", str(log_path), "--ticks", "5000", "--seed", "42"])
        assert code == 0
        hashes.append(capsys.readouterr().out.strip().splitlines()[-1])
    ok = hashes[0] == hashes[1] and len(hashes[0]) == 64
    with capsys.disabled():
        report("simulate-determinism", ok, f"hash={hashes[0][:16]}...")


def test_benchmark_scaling():
    counts = [1000, 5000, 10000, 50000, 100000]
    start = time.perf_counter()
    records, fits = run_bench(["cross_section", "frustum"], counts, repetitions=9)
    total = time.perf_counter() - start
    r2_cross = fits["cross_section"][2]
    r2_frustum = fits["frustum"][2]
    cross_100k = next(r.wall_time_ms for r in records
                      if r.method == "cross_section" and r.tetra_count == 100000)
    ok = (r2_cross > 0.95 and r2_frustum > 0.95 and total < 60.0
          and cross_100k < 33.0)
    report("benchmark-scaling", ok,
           f"r2_cross={r2_cross:.4f} r2_frustum={r2_frustum:.4f} "
           f"cross_100k={cross_100k:.1f}ms total={total:.1f}s")


def test_scenario_replays():
    # sinusoidal-w bullet: visible exactly while its extent crosses the slice
    scene = load_scene_file(os.path.join(SCENES, "ballistics.json"))
    session = Session(scene, seed=3)
    for _ in range(240):
        session.tick(Inputs())
    session.energy = 100.0
    session.tick(Inputs(actions=({"type": "fire"},)))
    bullet = session.projectiles[0]
    extent = 0.15  # bullet hypersphere radius
    violations = 0
    saw_visible = saw_hidden = False
    wall_hit_tick = None
    descending = False
    for _ in range(1200):
        frame = session.tick(Inputs())
        if bullet.alive and bullet.sinusoidal:
            # visibility must track the parametric w razor-exactly
            dw = abs(bullet.position.w - session.rig.cam4.pose.translation.w)
            visible = any(m.node_id == bullet.id for m in frame.meshes)
            saw_visible = saw_visible or visible
            saw_hidden = saw_hidden or not visible
            if abs(dw - extent) > 1e-6 and visible != (dw < extent):
                violations += 1
        for e in frame.events:
            if (e["type"] == "collision"
                    and "bullet" in (e["a"].split(":")[0], e["b"].split(":")[0])
                    and "node:2" in (e["a"], e["b"])):
                wall_hit_tick = wall_hit_tick or session.tick_index
        if wall_hit_tick and bullet.alive:
            # gravity takes over after the wall strike: the bullet descends
            # (and may then bounce off the ground)
            descending = descending or bullet.velocity.y < -1.0
        if wall_hit_tick and session.tick_index >= wall_hit_tick + 80:
            break
    hit_wall = wall_hit_tick is not None
    ok = (violations == 0 and saw_visible and saw_hidden
          and hit_wall and descending)
    report("scenario-replays", ok,
           f"visibility_violations={violations} wall_hit={hit_wall} "
           f"y_descent={descending}")
