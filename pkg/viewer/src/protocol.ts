// Wire protocol v1: JSON messages, length-prefixed over TCP or carried in
// WebSocket text frames. The viewer only ever sends hello and input; all
// simulation state lives server-side.

export const PROTOCOL_VERSION = 1;

export interface HelloMessage {
  type: "hello";
  protocol: number;
}

export interface InputMessage {
  type: "input";
  tick: number;
  keys: string[];
  mouse_dx: number;
  mouse_dy: number;
  actions: Record<string, unknown>[];
}

export interface ConfigMessage {
  type: "config";
  protocol: number;
  scene_name: string;
  tick_rate: number;
  energy_max: number;
  w_range: [number, number];
}

export interface RadarPin {
  node_id: number;
  x: number;
  z: number;
  altitude: number;
}

export interface FrameMeshEntry {
  node_id: number;
  changed: boolean;
  material: [number, number, number, number];
  wireframe: boolean;
  // geometry present when changed or on first transmission
  vertices?: number[];
  triangles?: number[];
  colors?: number[];
}

export interface CameraState {
  mode: "cross_section" | "frustum";
  sync: "synced" | "detached";
  cam4_position: number[];
  cam3_position: number[];
  yaw: number;
  pitch: number;
  orbit_angle: number | null;
  focus: number[] | null;
}

export interface FrameMessage {
  type: "frame";
  tick: number;
  time: number;
  energy: number;
  camera: CameraState;
  radar: RadarPin[];
  events: Record<string, unknown>[];
  meshes: FrameMeshEntry[];
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = ConfigMessage | FrameMessage | ErrorMessage;

export function encodeLengthPrefixed(message: object): Uint8Array {
  const payload = new TextEncoder().encode(JSON.stringify(message));
  const out = new Uint8Array(4 + payload.length);
  new DataView(out.buffer).setUint32(0, payload.length, false);
  out.set(payload, 4);
  return out;
}

/** Incremental decoder for the 4-byte-length + JSON framing. */
export class LengthPrefixedDecoder {
  private buffer = new Uint8Array(0);

  push(chunk: Uint8Array): ServerMessage[] {
    const merged = new Uint8Array(this.buffer.length + chunk.length);
    merged.set(this.buffer);
    merged.set(chunk, this.buffer.length);
    this.buffer = merged;
    const out: ServerMessage[] = [];
    for (;;) {
      if (this.buffer.length < 4) break;
      const view = new DataView(this.buffer.buffer, this.buffer.byteOffset);
      const length = view.getUint32(0, false);
      if (this.buffer.length < 4 + length) break;
      const payload = this.buffer.slice(4, 4 + length);
      this.buffer = this.buffer.slice(4 + length);
      out.push(JSON.parse(new TextDecoder().decode(payload)) as ServerMessage);
    }
    return out;
  }
}

export function makeHello(): HelloMessage {
  return { type: "hello", protocol: PROTOCOL_VERSION };
}

export function makeInput(
  tick: number,
  keys: Iterable<string>,
  mouseDx: number,
  mouseDy: number,
  actions: Record<string, unknown>[],
): InputMessage {
  return {
    type: "input",
    tick,
    keys: [...keys],
    mouse_dx: mouseDx,
    mouse_dy: mouseDy,
    actions,
  };
}
