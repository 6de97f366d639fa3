// Key bindings: WASD + mouse look, q/e move along w, f toggles frustum
// projection, z/x orbit the 4D camera, r fires, g cycles ghost previews
// and shift+g confirms the selected one. Inputs are batched per animation
// frame and tagged with the latest server tick.

import { makeInput, type InputMessage } from "./protocol.js";

const TRACKED_KEYS = new Set(["w", "a", "s", "d", "q", "e", "z", "x"]);

export class InputTracker {
  private held = new Set<string>();
  private mouseDx = 0;
  private mouseDy = 0;
  private actions: Record<string, unknown>[] = [];
  private lastSentKeys = "";

  keyDown(key: string, shift = false): void {
    key = key.toLowerCase();
    if (TRACKED_KEYS.has(key)) {
      this.held.add(key);
    } else if (key === "r") {
      this.actions.push({ type: "fire" });
    } else if (key === "f") {
      this.actions.push({ type: "toggle_mode" });
    } else if (key === "g") {
      this.actions.push(shift ? { type: "confirm_ghost" } : { type: "cycle_ghost" });
    }
  }

  keyUp(key: string): void {
    this.held.delete(key.toLowerCase());
  }

  mouseMove(dx: number, dy: number): void {
    this.mouseDx += dx;
    this.mouseDy += dy;
  }

  pushAction(action: Record<string, unknown>): void {
    this.actions.push(action);
  }

  /** The batched input for this frame, or null when nothing would change
   * server state (held keys must keep flowing only when they changed,
   * since the server latches the last key set). */
  drain(tick: number): InputMessage | null {
    const keys = [...this.held].sort();
    const keysSig = keys.join(",");
    const idle =
      this.mouseDx === 0 && this.mouseDy === 0 && this.actions.length === 0 &&
      keysSig === this.lastSentKeys;
    if (idle) return null;
    const message = makeInput(tick, keys, this.mouseDx, this.mouseDy, this.actions);
    this.lastSentKeys = keysSig;
    this.mouseDx = 0;
    this.mouseDy = 0;
    this.actions = [];
    return message;
  }

  attach(target: Pick<Document, "addEventListener">): void {
    target.addEventListener("keydown", (event) => {
      const e = event as KeyboardEvent;
      if (!e.repeat) this.keyDown(e.key, e.shiftKey);
    });
    target.addEventListener("keyup", (event) => {
      this.keyUp((event as KeyboardEvent).key);
    });
    target.addEventListener("mousemove", (event) => {
      const e = event as MouseEvent;
      if (document.pointerLockElement) this.mouseMove(e.movementX, e.movementY);
    });
  }
}
