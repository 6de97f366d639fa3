// The viewer core: handshake, frame intake through the mesh cache, input
// batching, and ghost-preview cycling. Renderer-agnostic so the test
// suite can drive it headlessly over TCP while the browser uses three.js.

import { ClientMeshCache, type CachedMesh } from "./meshCache.js";
import {
  makeHello,
  type CameraState,
  type ConfigMessage,
  type FrameMessage,
  type ServerMessage,
} from "./protocol.js";
import { InputTracker } from "./input.js";
import type { Transport } from "./transport.js";

export interface GhostPreview {
  rotation: Record<string, number>;
  vertices: Float32Array;
  triangles: Uint32Array;
}

export interface MeshRenderer {
  /** geometryChanged=false means the mesh came straight from the cache and
   * only material/flags may differ; renderers keep their GPU buffers. */
  upsert(nodeId: number, mesh: CachedMesh, geometryChanged: boolean): void;
  remove(nodeId: number): void;
  setCamera(camera: CameraState): void;
  showGhosts(nodeId: number, previews: GhostPreview[], selected: number): void;
}

export interface ClientStats {
  framesReceived: number;
  cacheHits: number;
  cacheMisses: number;
  errors: number;
}

export class ViewerClient {
  readonly cache = new ClientMeshCache();
  readonly input = new InputTracker();
  config: ConfigMessage | null = null;
  lastFrame: FrameMessage | null = null;
  ghostTarget: number | null = null;
  private ghostPreviews: GhostPreview[] = [];
  private ghostIndex = 0;
  private errorCount = 0;
  private frameCount = 0;
  private frameHandler: ((frame: FrameMessage) => void) | null = null;

  constructor(private transport: Transport) {
    transport.onMessage((message) => this.handle(message));
  }

  /** Send hello and wait for the config reply. */
  handshake(timeoutMs = 5000): Promise<ConfigMessage> {
    this.transport.send(makeHello());
    return new Promise((resolve, reject) => {
      const started = Date.now();
      const poll = () => {
        if (this.config) return resolve(this.config);
        if (Date.now() - started > timeoutMs) {
          return reject(new Error("handshake timed out"));
        }
        setTimeout(poll, 5);
      };
      poll();
    });
  }

  onFrame(handler: (frame: FrameMessage) => void): void {
    this.frameHandler = handler;
  }

  get stats(): ClientStats {
    return {
      framesReceived: this.frameCount,
      cacheHits: this.cache.hits,
      cacheMisses: this.cache.misses,
      errors: this.errorCount,
    };
  }

  private handle(message: ServerMessage): void {
    if (message.type === "config") {
      this.config = message;
    } else if (message.type === "error") {
      this.errorCount += 1;
    } else if (message.type === "frame") {
      this.frameCount += 1;
      this.lastFrame = message;
      // geometry payloads ride each mesh at most once per connection:
      // ingest at intake so frames consumed before the first render
      // (e.g. during the handshake) still populate the cache
      for (const entry of message.meshes) {
        if (entry.vertices !== undefined) this.cache.resolve(entry);
      }
      for (const event of message.events) {
        if (event.type === "ghost-previews") {
          this.ghostPreviews = (event.previews as any[]).map((p) => ({
            rotation: p.rotation as Record<string, number>,
            vertices: Float32Array.from(p.vertices as number[]),
            triangles: Uint32Array.from(p.triangles as number[]),
          }));
          this.ghostIndex = 0;
        }
      }
      this.frameHandler?.(message);
    }
  }

  /** Apply a frame to a renderer through the cache. */
  renderFrame(frame: FrameMessage, renderer: MeshRenderer): void {
    const live = new Set<number>();
    for (const entry of frame.meshes) {
      live.add(entry.node_id);
      const mesh = this.cache.resolve(entry);
      if (mesh !== null) {
        renderer.upsert(entry.node_id, mesh, entry.vertices !== undefined);
      }
    }
    for (const removed of this.cache.retainOnly(live)) {
      renderer.remove(removed);
    }
    renderer.setCamera(frame.camera);
    if (this.ghostTarget !== null && this.ghostPreviews.length) {
      renderer.showGhosts(this.ghostTarget, this.ghostPreviews, this.ghostIndex);
    }
  }

  /** Pick the nearest on-plane radar pin as the manipulation target. */
  nearestPinNode(): number | null {
    const frame = this.lastFrame;
    if (!frame || frame.radar.length === 0) return null;
    let best: number | null = null;
    let bestDist = Infinity;
    for (const pin of frame.radar) {
      const d = Math.hypot(pin.x, pin.z) + Math.abs(pin.altitude) * 10;
      if (d < bestDist) {
        bestDist = d;
        best = pin.node_id;
      }
    }
    return best;
  }

  /** Batch inputs, translating the local ghost-cycling pseudo-actions into
   * wire actions, and send them tagged with the latest tick. */
  flushInputs(): void {
    const tick = this.lastFrame?.tick ?? 0;
    const message = this.input.drain(tick);
    if (!message) return;
    const actions: Record<string, unknown>[] = [];
    for (const action of message.actions) {
      if (action.type === "cycle_ghost") {
        if (this.ghostPreviews.length) {
          this.ghostIndex = (this.ghostIndex + 1) % this.ghostPreviews.length;
        } else {
          this.ghostTarget = this.ghostTarget ?? this.nearestPinNode();
          if (this.ghostTarget !== null) {
            actions.push({ type: "ghost", node_id: this.ghostTarget });
          }
        }
      } else if (action.type === "confirm_ghost") {
        const preview = this.ghostPreviews[this.ghostIndex];
        if (this.ghostTarget !== null && preview) {
          actions.push({
            type: "manipulate",
            node_id: this.ghostTarget,
            rotation: preview.rotation,
          });
          this.ghostPreviews = [];
        }
      } else {
        actions.push(action);
      }
    }
    message.actions = actions;
    this.transport.send(message);
  }

  close(): void {
    this.transport.close();
  }
}
