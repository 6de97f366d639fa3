"""Projection-throughput benchmark: time vs tetrahedron count.

Builds grids of tesseracts at requested total tetra counts, applies a
fresh 4D rotation before every pass (so nothing can be cached), and times
the projection stage only: no physics, no I/O, no simplification pass.
Reports per-count wall time plus a least-squares linear fit of time
against count.
"""

from __future__ import annotations

import gc
import time
from dataclasses import dataclass

import numpy as np

from .linalg import Hyperplane, PlaneAngles, Pose4, Transform4, Vec4, rotation_from_plane_angles
from .meshes import TetraMesh4, make_primitive
from .projection import Camera4, ProjectionMode, cross_section, frustum_project

TETRA_PER_TESSERACT = 48


@dataclass
class BenchRecord:
    method: str  # "cross_section" | "frustum"
    tetra_count: int
    objects_on_screen: int
    wall_time_ms: float
    throughput: float  # tetra per ms

    def __post_init__(self):
        if self.tetra_count <= 0 or self.wall_time_ms <= 0:
            raise ValueError("counts and times must be positive")


SCENE_EXTENT = 16.0  # spatial spread of the object batch, all counts


def build_tesseract_array(tetra_count: int) -> tuple[TetraMesh4, int]:
    """A merged batch of unit tesseracts totalling tetra_count tetrahedra.

    Objects fill a grid over a fixed spatial extent centered on the origin
    whatever the count, so under the rotating model transform the fraction
    of tetrahedra crossing the slice (and the frustum's depth range) is
    count-independent and a pass does work proportional to the count.
    Density grows with count instead of reach; nothing ever near-clips.
    """
    if tetra_count <= 0:
        raise ValueError("tetra_count must be positive")
    n_obj = (tetra_count + TETRA_PER_TESSERACT - 1) // TETRA_PER_TESSERACT
    base = make_primitive("tesseract", 1.0)
    side = int(np.ceil(n_obj ** (1.0 / 3.0)))
    spacing = SCENE_EXTENT / max(side, 1)
    verts, tets = [], []
    offset = 0
    for i in range(n_obj):
        gx, gy, gz = i % side, (i // side) % side, i // (side * side)
        shift = np.array([
            (gx - (side - 1) / 2.0) * spacing,
            (gy - (side - 1) / 2.0) * spacing,
            (gz - (side - 1) / 2.0) * spacing,
            0.0,
        ])
        verts.append(base.vertices + shift)
        tets.append(base.tetrahedra + offset)
        offset += base.n_vertices
    mesh = TetraMesh4(np.vstack(verts), np.vstack(tets)[:tetra_count])
    return mesh, n_obj


def time_projection(method: str, mesh: TetraMesh4, repetitions: int) -> float:
    """Wall milliseconds for one projection pass under live rotation.

    Each repetition rotates the batch to a fresh orientation of the same
    magnitude (so the workload stays constant but nothing is cacheable) and
    the fastest pass is reported, the standard way to measure code cost on
    a machine with background noise. The collector is paused during timed
    passes so its pauses land between measurements instead of inside them.
    """
    if repetitions <= 0:
        raise ValueError("repetitions must be positive")
    plane = Hyperplane.axis_aligned(0.0)
    # camera behind the batch along w: nothing ever near-clips
    cam = Camera4(pose=Pose4(Vec4(0.0, 0.0, 0.0, -2.0 - SCENE_EXTENT)),
                  mode=ProjectionMode.FRUSTUM)
    times = []
    for rep in range(repetitions + 1):  # first pass warms caches, not timed
        angle = 0.3 + 0.002 * rep
        model = Transform4(rotation=rotation_from_plane_angles(
            PlaneAngles(xw=angle, yw=0.3 * angle)))
        gc_was_enabled = gc.isenabled()
        gc.disable()
        try:
            start = time.perf_counter()
            if method == "cross_section":
                cross_section(mesh, model, plane, simplify=False)
            elif method == "frustum":
                frustum_project(mesh, model, cam)
            else:
                raise ValueError(f"unknown method '{method}'")
            elapsed = (time.perf_counter() - start) * 1000.0
        finally:
            if gc_was_enabled:
                gc.enable()
        if rep > 0:
            times.append(elapsed)
    return float(min(times))


def linear_fit(counts, times) -> tuple[float, float, float]:
    """Least squares time = slope*count + intercept; returns (slope, intercept, r2)."""
    x = np.asarray(counts, dtype=np.float64)
    y = np.asarray(times, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def run_bench(methods: list[str], counts: list[int], repetitions: int):
    """Benchmark each method at each count.

    Returns (records, fits) where fits maps method -> (slope, intercept, r2).
    """
    if repetitions <= 0:
        raise ValueError("repetitions must be positive")
    records = []
    fits = {}
    for method in methods:
        times = []
        for count in counts:
            mesh, n_obj = build_tesseract_array(count)
            ms = time_projection(method, mesh, repetitions)
            times.append(ms)
            records.append(BenchRecord(method, count, n_obj, ms, count / ms))
        fits[method] = linear_fit(counts, times)
    return records, fits


def records_to_csv(records: list[BenchRecord]) -> str:
    lines = ["method,tetra_count,objects_on_screen,wall_time_ms,throughput_tetra_per_ms"]
    for r in records:
        lines.append(f"{r.method},{r.tetra_count},{r.objects_on_screen},"
                     f"{r.wall_time_ms!r},{r.throughput!r}")
    return "\n".join(lines) + "\n"
