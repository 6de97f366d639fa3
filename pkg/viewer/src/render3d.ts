// three.js renderer: one Mesh per streamed node, rebuilt only when the
// server marks the geometry changed. The 3D camera mirrors the server's
// camera state (the server's z-forward/yaw-pitch convention mapped onto
// three's -z forward).

import * as THREE from "three";
import type { CachedMesh } from "./meshCache.js";
import type { CameraState } from "./protocol.js";
import type { GhostPreview, MeshRenderer } from "./client.js";

export class ThreeRenderer implements MeshRenderer {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  private renderer: THREE.WebGLRenderer;
  private nodes = new Map<number, THREE.Mesh>();
  private ghosts = new THREE.Group();

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(
      70,
      canvas.clientWidth / Math.max(1, canvas.clientHeight),
      0.05,
      500,
    );
    this.scene.background = new THREE.Color(0x0a0e14);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.45));
    const sun = new THREE.DirectionalLight(0xffffff, 1.1);
    sun.position.set(4, 10, 2);
    this.scene.add(sun);
    this.scene.add(this.ghosts);
  }

  upsert(nodeId: number, mesh: CachedMesh, geometryChanged: boolean): void {
    let object = this.nodes.get(nodeId);
    if (object === undefined) {
      object = new THREE.Mesh(
        new THREE.BufferGeometry(),
        new THREE.MeshLambertMaterial({ side: THREE.DoubleSide }),
      );
      this.nodes.set(nodeId, object);
      this.scene.add(object);
      geometryChanged = true;
    }
    if (geometryChanged) {
      const geometry = new THREE.BufferGeometry();
      geometry.setAttribute("position", new THREE.BufferAttribute(mesh.vertices, 3));
      geometry.setIndex(new THREE.BufferAttribute(mesh.triangles, 1));
      if (mesh.colors) {
        // drop alpha: three expects rgb vertex colors
        const rgb = new Float32Array((mesh.colors.length / 4) * 3);
        for (let i = 0; i < mesh.colors.length / 4; i++) {
          rgb[i * 3] = mesh.colors[i * 4];
          rgb[i * 3 + 1] = mesh.colors[i * 4 + 1];
          rgb[i * 3 + 2] = mesh.colors[i * 4 + 2];
        }
        geometry.setAttribute("color", new THREE.BufferAttribute(rgb, 3));
      }
      geometry.computeVertexNormals();
      object.geometry.dispose();
      object.geometry = geometry;
    }
    const material = object.material as THREE.MeshLambertMaterial;
    const [r, g, b, a] = mesh.material;
    material.color.setRGB(r, g, b);
    material.transparent = a < 1;
    material.opacity = a;
    material.wireframe = mesh.wireframe;
    material.vertexColors = mesh.colors !== null;
  }

  remove(nodeId: number): void {
    const object = this.nodes.get(nodeId);
    if (object) {
      this.scene.remove(object);
      object.geometry.dispose();
      this.nodes.delete(nodeId);
    }
  }

  setCamera(camera: CameraState): void {
    const [x, y, z] = camera.cam3_position;
    this.camera.position.set(x, y, z);
    // server yaw/pitch look along +z; three looks along -z
    this.camera.rotation.set(0, 0, 0);
    this.camera.rotateY(camera.yaw + Math.PI);
    this.camera.rotateX(camera.pitch);
  }

  showGhosts(_nodeId: number, previews: GhostPreview[], selected: number): void {
    this.ghosts.clear();
    previews.forEach((preview, index) => {
      const geometry = new THREE.BufferGeometry();
      geometry.setAttribute(
        "position",
        new THREE.BufferAttribute(Float32Array.from(preview.vertices), 3),
      );
      geometry.setIndex(new THREE.BufferAttribute(Uint32Array.from(preview.triangles), 1));
      geometry.computeVertexNormals();
      const material = new THREE.MeshLambertMaterial({
        color: index === selected ? 0x8cf2b0 : 0x7fb4d9,
        transparent: true,
        opacity: index === selected ? 0.55 : 0.25,
        side: THREE.DoubleSide,
      });
      this.ghosts.add(new THREE.Mesh(geometry, material));
    });
  }

  clearGhosts(): void {
    this.ghosts.clear();
  }

  resize(width: number, height: number): void {
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / Math.max(1, height);
    this.camera.updateProjectionMatrix();
  }

  draw(): void {
    this.renderer.render(this.scene, this.camera);
  }
}
