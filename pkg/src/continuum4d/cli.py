"""Command-line entry point: render, simulate, bench, validate, serve.

Exit codes: 0 success, 2 validation/input error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .bench import records_to_csv, run_bench
from .linalg import PlaneAngles, Pose4, Vec4, rotation_from_plane_angles
from .meshes import TriMesh3
from .physics import FIXED_DT
from .projection import Camera4, CameraRig, ProjectionMode, SyncMode, project_node
from .scene import Scene, SceneParseError, load_scene_file
from .session import Inputs, run_headless
from .wire import SessionServer

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _load_scene_or_exit(path: str) -> Scene:
    if not os.path.exists(path):
        raise SceneParseError("$", f"scene file not found: {path}")
    return load_scene_file(path)


def _parse_camera_script(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if not isinstance(doc, list):
        raise SceneParseError("$", "camera script must be a JSON list")
    entries = []
    for i, entry in enumerate(doc):
        where = f"$[{i}]"
        if not isinstance(entry, dict):
            raise SceneParseError(where, "expected an object")
        allowed = {"time", "position", "rotation_planes", "mode", "focal",
                   "near_w", "description"}
        for key in entry:
            if key not in allowed:
                raise SceneParseError(f"{where}.{key}", "unknown field")
        mode = entry.get("mode", "cross_section")
        if mode not in ("cross_section", "frustum"):
            raise SceneParseError(f"{where}.mode", f"unknown mode '{mode}'")
        pos = entry.get("position", [0, 0, 0, 0])
        if len(pos) != 4 or not all(
                isinstance(x, (int, float)) and math.isfinite(x) for x in pos):
            raise SceneParseError(f"{where}.position", "expected 4 finite numbers")
        planes = entry.get("rotation_planes", {})
        if not set(planes) <= {"xy", "xz", "yz", "xw", "yw", "zw"}:
            raise SceneParseError(f"{where}.rotation_planes", "unknown plane name")
        entries.append({
            "time": float(entry.get("time", i / 30.0)),
            "position": [float(x) for x in pos],
            "angles": PlaneAngles(**{k: float(v) for k, v in planes.items()}),
            "mode": mode,
            "focal": float(entry.get("focal", 2.0)),
            "near_w": float(entry.get("near_w", 0.1)),
        })
    return entries


def _rig_from_entry(entry: dict) -> CameraRig:
    pose = Pose4(Vec4(*entry["position"]), rotation_from_plane_angles(entry["angles"]))
    cam4 = Camera4(pose=pose, mode=ProjectionMode(entry["mode"]),
                   focal=entry["focal"], near_w=entry["near_w"])
    return CameraRig(cam4=cam4, sync=SyncMode.DETACHED)


def cmd_render(args) -> int:
    from .objio import write_obj

    scene = _load_scene_or_exit(args.scene)
    script = _parse_camera_script(args.camera_script)
    if args.format != "obj":
        raise SceneParseError("$.format", f"unsupported format '{args.format}'")
    os.makedirs(args.out, exist_ok=True)
    files = []
    times = []
    for index, entry in enumerate(script):
        rig = _rig_from_entry(entry)
        t = entry["time"]
        meshes = []
        for node in scene.nodes:
            anim = node.animation
            transform = node.transform
            if anim is not None and anim.trigger == "start":
                transform = anim.sample(t)
            if node.is_4d:
                mesh = project_node(node.tetra_mesh, transform, rig)
            else:
                pts4 = np.hstack([node.tri_mesh.vertices,
                                  np.zeros((node.tri_mesh.n_vertices, 1))])
                world = transform.apply_points(pts4)[:, :3]
                mesh = TriMesh3(world, node.tri_mesh.triangles,
                                node.tri_mesh.vertex_colors, validate=False)
            if not mesh.is_empty:
                meshes.append((mesh, node.material))
        name = f"frame_{index:05d}.obj"
        write_obj(os.path.join(args.out, name), meshes)
        files.append(name)
        times.append(t)
    manifest = {"scene": scene.name, "frames": len(files), "files": files,
                "times": times}
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"rendered {len(files)} frames to {args.out}")
    return EXIT_OK


def read_input_log(path: str) -> dict[int, Inputs]:
    """Input log: one JSON object per line with a 'tick' field."""
    log: dict[int, Inputs] = {}
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
                tick = int(obj["tick"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise SceneParseError(f"$line{ln + 1}", f"bad input record: {e}")
            log[tick] = Inputs.from_dict(obj)
    return log


def cmd_simulate(args) -> int:
    scene = _load_scene_or_exit(args.scene)
    log = read_input_log(args.input_log) if args.input_log else {}
    if args.ticks <= 0:
        raise SceneParseError("$.ticks", "ticks must be positive")
    session, lines = run_headless(scene, log, args.ticks, seed=args.seed)
    header = "tick,time,px,py,pz,pw,vx,vy,vz,vw,yaw,energy,state_hash"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(header + "\n")
            f.write("\n".join(lines) + "\n")
    print(session.state_hash())
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = {"cross": ["cross_section"], "frustum": ["frustum"],
               "both": ["cross_section", "frustum"]}[args.method]
    counts = [int(c) for c in args.counts.split(",") if c]
    if not counts or any(c <= 0 for c in counts):
        raise SceneParseError("$.counts", "counts must be positive integers")
    if args.reps <= 0:
        raise SceneParseError("$.reps", "repetitions must be positive")
    records, fits = run_bench(methods, counts, args.reps)
    csv = records_to_csv(records)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(csv)
    else:
        sys.stdout.write(csv)
    for method, (slope, intercept, r2) in fits.items():
        print(f"# {method}: time_ms = {slope:.6g} * tetras + {intercept:.6g}  "
              f"(R^2 = {r2:.4f})")
    return EXIT_OK


def cmd_validate(args) -> int:
    scene = _load_scene_or_exit(args.scene)
    n4d = sum(1 for n in scene.nodes if n.is_4d)
    print(f"scene '{scene.name}' OK: {len(scene.nodes)} nodes ({n4d} four-dimensional)")
    return EXIT_OK


def cmd_serve(args) -> int:
    scene = _load_scene_or_exit(args.scene)
    try:
        server = SessionServer(scene, port=args.port, host=args.host,
                               tick_rate=args.tick_rate, seed=args.seed)
        server.bind()
    except OSError as e:
        print(f"error: cannot bind {args.host}:{args.port}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"serving '{scene.name}' on {args.host}:{server.port} "
          f"at {args.tick_rate:g} ticks/s", flush=True)
    try:
        server.serve_forever(max_connections=args.max_connections)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="continuum",
        description="4D tetra-mesh engine: render, simulate, bench, validate, serve")
    sub = parser.add_subparsers(dest="command", required=True)

    render = sub.add_parser("render", help="project scene frames to OBJ files")
    render.add_argument("--scene", required=True)
    render.add_argument("--camera-script", required=True)
    render.add_argument("--out", required=True)
    render.add_argument("--format", default="obj")
    render.set_defaults(func=cmd_render)

    sim = sub.add_parser("simulate", help="run a deterministic headless session")
    sim.add_argument("--scene", required=True)
    sim.add_argument("--input-log", default=None)
    sim.add_argument("--ticks", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=None, help="state log CSV path")
    sim.set_defaults(func=cmd_simulate)

    bench = sub.add_parser("bench", help="projection throughput benchmark")
    bench.add_argument("--method", choices=["cross", "frustum", "both"], default="both")
    bench.add_argument("--counts", default="1000,5000,10000,50000,100000")
    bench.add_argument("--reps", type=int, default=5)
    bench.add_argument("--out", default=None, help="CSV output path")
    bench.set_defaults(func=cmd_bench)

    validate = sub.add_parser("validate", help="check a scene document")
    validate.add_argument("--scene", required=True)
    validate.set_defaults(func=cmd_validate)

    serve = sub.add_parser("serve", help="run the session server")
    serve.add_argument("--scene", required=True)
    serve.add_argument("--port", type=int, required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--tick-rate", type=float, default=1.0 / FIXED_DT)
    serve.add_argument("--seed", type=int, default=0)
    serve.add_argument("--max-connections", type=int, default=None,
                       help=argparse.SUPPRESS)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SceneParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
