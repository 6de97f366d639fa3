"""Cross-section tour: slide a hyperplane through the four primitives.

Slicing a 4D solid with the w=c hyperplane gives a 3D mesh that morphs as
c moves, shrinking to nothing once c leaves the object's w extent; objects
scaled along w stay visible over proportionally longer sweeps.

Run: python3 demos/slice_tour.py
"""

import numpy as np

from continuum4d import (
    Hyperplane,
    Transform4,
    cross_section,
    make_primitive,
    mesh_w_extent,
)


def describe(kind, size, subdivision=0, w_scale=1.0):
    mesh = make_primitive(kind, size, subdivision)
    model = Transform4.scaling(1, 1, 1, w_scale)
    lo, hi = mesh_w_extent(mesh, model)
    print(f"\n{kind} (size {size}, w-scale {w_scale}): "
          f"{mesh.n_tetrahedra} tetrahedra, w extent [{lo:+.2f}, {hi:+.2f}]")
    for c in np.linspace(lo - 0.25, hi + 0.25, 9):
        out = cross_section(mesh, model, Hyperplane.axis_aligned(c))
        if out.is_empty:
            print(f"  w = {c:+.3f}: (no intersection)")
        else:
            ext = out.vertices.max(axis=0) - out.vertices.min(axis=0)
            print(f"  w = {c:+.3f}: {out.n_vertices:3d} vertices, "
                  f"{out.n_triangles:3d} triangles, "
                  f"extent {ext[0]:.2f} x {ext[1]:.2f} x {ext[2]:.2f}")


if __name__ == "__main__":
    describe("tesseract", 1.0)
    describe("tesseract", 1.0, w_scale=3.0)  # more persistent along w
    describe("pentachoron", 1.0)
    describe("hexadecachoron", 1.0)
    describe("hypersphere", 0.5, subdivision=2)
