import json
import os
import socket
import subprocess
import sys
import time

import pytest

from continuum4d.cli import main
from continuum4d.wire import WireClient

SCENES = os.path.join(os.path.dirname(__file__), "..", "scenes")


def scene_path(name):
    return os.path.join(SCENES, name)


def write_sweep_script(path, w_values, mode="cross_section"):
    script = [{"time": i / 30.0, "position": [0.0, 0.0, 0.0, w],
               "mode": mode} for i, w in enumerate(w_values)]
    with open(path, "w") as f:
        json.dump(script, f)


def minimal_scene(path, nodes=None):
    doc = {
        "continuum_scene": 1,
        "name": "cli-test",
        "nodes": nodes if nodes is not None else [
            {"id": 1, "geometry": {"kind": "tetra4", "primitive": "tesseract",
                                   "size": 1.0}},
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f)


class TestValidate:
    def test_ok(self, capsys):
        assert main(["validate", "--scene", scene_path("mini_level.json")]) == 0
        assert "OK" in capsys.readouterr().out

    def test_schema_error_exit_2_with_path(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"continuum_scene": 1, "nodes": [
            {"id": 1, "geometry": {"kind": "tri3", "shape": "quad",
                                   "size": [1, 0, 1]}, "wat": 1}]}))
        assert main(["validate", "--scene", str(bad)]) == 2
        err = capsys.readouterr().err
        assert "nodes[0].wat" in err

    def test_missing_file_exit_2(self):
        assert main(["validate", "--scene", "no-such-scene.json"]) == 2


class TestRender:
    def test_w_sweep_empty_nonempty_empty(self, tmp_path):
        scene = tmp_path / "scene.json"
        minimal_scene(str(scene))
        script = tmp_path / "script.json"
        write_sweep_script(str(script), [-1.0, -0.75, 0.0, 0.75, 1.0])
        out = tmp_path / "frames"
        assert main(["render", "--scene", str(scene), "--camera-script",
                     str(script), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["frames"] == 5
        sizes = []
        for name in manifest["files"]:
            text = (out / name).read_text()
            sizes.append(sum(1 for line in text.splitlines() if line.startswith("f ")))
        # unit tesseract spans w in [-0.5, 0.5]: outer frames empty
        assert sizes[0] == 0 and sizes[-1] == 0
        assert sizes[2] > 0

    def test_zero_frame_script(self, tmp_path):
        scene = tmp_path / "scene.json"
        minimal_scene(str(scene))
        script = tmp_path / "script.json"
        script.write_text("[]")
        out = tmp_path / "frames"
        assert main(["render", "--scene", str(scene), "--camera-script",
                     str(script), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["frames"] == 0
        assert not [f for f in os.listdir(out) if f.endswith(".obj")]

    def test_invalid_scene_exit_2(self, tmp_path, capsys):
        scene = tmp_path / "scene.json"
        scene.write_text(json.dumps({"continuum_scene": 1}))
        script = tmp_path / "script.json"
        script.write_text("[]")
        assert main(["render", "--scene", str(scene), "--camera-script",
                     str(script), "--out", str(tmp_path / "o")]) == 2
        assert "$" in capsys.readouterr().err

    def test_output_bit_identical_across_runs(self, tmp_path):
        scene = tmp_path / "scene.json"
        minimal_scene(str(scene))
        script = tmp_path / "script.json"
        write_sweep_script(str(script), [0.0, 0.3], mode="frustum")
        outs = []
        for run in ("a", "b"):
            out = tmp_path / run
            assert main(["render", "--scene", str(scene), "--camera-script",
                         str(script), "--out", str(out)]) == 0
            blob = b""
            for name in sorted(os.listdir(out)):
                blob += (out / name).read_bytes()
            outs.append(blob)
        assert outs[0] == outs[1]

    def test_vertex_color_lines(self, tmp_path):
        scene = tmp_path / "scene.json"
        minimal_scene(str(scene))
        script = tmp_path / "script.json"
        write_sweep_script(str(script), [0.0])
        out = tmp_path / "frames"
        main(["render", "--scene", str(scene), "--camera-script", str(script),
              "--out", str(out)])
        text = (out / "frame_00000.obj").read_text()
        v_lines = [l for l in text.splitlines() if l.startswith("v ")]
        assert v_lines
        assert all(len(l.split()) == 7 for l in v_lines)  # v x y z r g b


class TestSimulate:
    def test_same_log_same_hash(self, tmp_path, capsys):
        log = tmp_path / "inputs.jsonl"
        lines = [json.dumps({"tick": k, "keys": ["w"], "actions": []})
                 for k in range(20, 60)]
        log.write_text("\n".join(lines) + "\n")
        hashes = []
        for _ in range(2):
            assert main(["simulate", "--scene", scene_path("mini_level.json"),
                         "--input-log", str(log), "--ticks", "200",
                         "--seed", "5"]) == 0
            hashes.append(capsys.readouterr().out.strip().splitlines()[-1])
        assert hashes[0] == hashes[1]
        assert len(hashes[0]) == 64

    def test_state_log_format(self, tmp_path, capsys):
        out = tmp_path / "log.csv"
        assert main(["simulate", "--scene", scene_path("two_worlds.json"),
                     "--ticks", "50", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "tick,time,px,py,pz,pw,vx,vy,vz,vw,yaw,energy,state_hash"
        assert len(lines) == 51
        first = lines[1].split(",")
        assert len(first) == 13
        assert first[0] == "1"

    def test_static_scene_settles_only(self, tmp_path, capsys):
        assert main(["simulate", "--scene", scene_path("two_worlds.json"),
                     "--ticks", "1000"]) == 0
        # run again capturing the log to inspect the trajectory
        out = tmp_path / "log.csv"
        main(["simulate", "--scene", scene_path("two_worlds.json"),
              "--ticks", "1000", "--out", str(out)])
        rows = [line.split(",") for line in out.read_text().splitlines()[1:]]
        xs = {row[2] for row in rows}
        zs = {row[4] for row in rows}
        ws = {row[5] for row in rows}
        assert len(xs) == 1 and len(zs) == 1 and len(ws) == 1  # only y settles
        y_first, y_last = float(rows[0][3]), float(rows[-1][3])
        assert y_last < y_first  # gravity settling

    def test_bad_ticks(self):
        assert main(["simulate", "--scene", scene_path("two_worlds.json"),
                     "--ticks", "0"]) == 2


class TestBench:
    def test_small_bench_csv_and_monotone(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        assert main(["bench", "--method", "both", "--counts", "500,2000",
                     "--reps", "2", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("method,tetra_count")
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 4
        by_method = {}
        for method, count, objs, ms, thr in rows:
            by_method.setdefault(method, []).append((int(count), float(ms)))
            assert int(count) > 0 and float(ms) > 0
        for method, pairs in by_method.items():
            pairs.sort()
            assert pairs[1][1] > pairs[0][1] * 0.5  # larger count not faster x2
        printed = capsys.readouterr().out
        assert "R^2" in printed

    def test_zero_reps_invalid(self):
        assert main(["bench", "--counts", "100", "--reps", "0"]) == 2


class TestServe:
    def test_bind_failure_exit_3(self):
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        port = blocker.getsockname()[1]
        blocker.listen(1)
        try:
            assert main(["serve", "--scene", scene_path("two_worlds.json"),
                         "--port", str(port)]) == 3
        finally:
            blocker.close()

    def test_serve_subprocess_handshake(self, tmp_path):
        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        env = dict(os.environ)
        proc = subprocess.Popen(
            [sys.executable, "-m", "continuum4d", "serve", "--scene",
             scene_path("two_worlds.json"), "--port", str(port),
             "--max-connections", "1"],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, env=env)
        try:
            deadline = time.monotonic() + 10.0
            client = None
            while time.monotonic() < deadline:
                try:
                    client = WireClient("127.0.0.1", port, timeout=1.0)
                    break
                except OSError:
                    time.sleep(0.1)
            assert client is not None, proc.stderr.read().decode() if proc.poll() else "timeout"
            client.send({"type": "hello", "protocol": 1})
            config = client.recv(timeout=5.0)
            assert config["type"] == "config"
            frame = client.recv(timeout=5.0)
            assert frame["type"] == "frame"
            client.close()
        finally:
            proc.terminate()
            proc.wait(timeout=5.0)
