"""OBJ export for projected frames, with per-vertex colors.

Vertices are written as extended ``v x y z r g b`` lines (a common OBJ
extension); faces are 1-based triangles. Output is byte-identical across
runs: floats use shortest round-trip repr.
"""

from __future__ import annotations

from .meshes import TriMesh3


def obj_lines(meshes: list[tuple[TriMesh3, tuple]]) -> list[str]:
    """OBJ text for a list of (mesh, rgba material); colors fall back to the
    material when the mesh has no per-vertex colors."""
    lines = ["# continuum frame export"]
    offset = 1
    for index, (mesh, material) in enumerate(meshes):
        lines.append(f"o node_{index}")
        colors = mesh.vertex_colors
        for vi in range(mesh.n_vertices):
            x, y, z = mesh.vertices[vi]
            r, g, b = (colors[vi][:3] if colors is not None else material[:3])
            lines.append(f"v {x!r} {y!r} {z!r} {r!r} {g!r} {b!r}")
        for tri in mesh.triangles:
            a, b_, c = (int(i) + offset for i in tri)
            lines.append(f"f {a} {b_} {c}")
        offset += mesh.n_vertices
    return lines


def write_obj(path: str, meshes: list[tuple[TriMesh3, tuple]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(obj_lines(meshes)) + "\n")
