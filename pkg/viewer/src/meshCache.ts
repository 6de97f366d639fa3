// Client-side mesh cache: the server omits geometry for unchanged meshes
// after first transmission, so a frame entry with changed=false must be
// served from here. Misses on unchanged entries indicate a protocol bug
// and are counted for the tests.

import type { FrameMeshEntry } from "./protocol.js";

export interface CachedMesh {
  vertices: Float32Array;
  triangles: Uint32Array;
  colors: Float32Array | null;
  material: [number, number, number, number];
  wireframe: boolean;
}

export class ClientMeshCache {
  private meshes = new Map<number, CachedMesh>();
  hits = 0;
  misses = 0;

  /** Resolve a frame entry to geometry, updating the cache. */
  resolve(entry: FrameMeshEntry): CachedMesh | null {
    if (entry.vertices !== undefined && entry.triangles !== undefined) {
      const mesh: CachedMesh = {
        vertices: Float32Array.from(entry.vertices),
        triangles: Uint32Array.from(entry.triangles),
        colors: entry.colors ? Float32Array.from(entry.colors) : null,
        material: entry.material,
        wireframe: entry.wireframe,
      };
      this.meshes.set(entry.node_id, mesh);
      return mesh;
    }
    const cached = this.meshes.get(entry.node_id);
    if (cached === undefined) {
      this.misses += 1;
      return null;
    }
    this.hits += 1;
    // material and flags may change without re-sending geometry
    cached.material = entry.material;
    cached.wireframe = entry.wireframe;
    return cached;
  }

  /** Drop nodes that stopped appearing in frames (vanished or destroyed). */
  retainOnly(liveIds: Set<number>): number[] {
    const removed: number[] = [];
    for (const id of this.meshes.keys()) {
      if (!liveIds.has(id)) {
        this.meshes.delete(id);
        removed.push(id);
      }
    }
    return removed;
  }

  get size(): number {
    return this.meshes.size;
  }
}
