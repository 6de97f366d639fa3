// HUD: energy bar, projection-mode indicator, and the holographic radar.
// Layout math is pure (testable); canvas drawing stays thin.

import type { CameraState, FrameMessage, RadarPin } from "./protocol.js";

export interface HudState {
  energyFraction: number;
  mode: "cross_section" | "frustum";
  orbitAngle: number | null;
  focus: number[] | null;
  pins: RadarPin[];
  wOffset: number; // 4D camera w relative to nothing: shown numerically
}

export function hudStateFrom(frame: FrameMessage, energyMax: number): HudState {
  const fraction = energyMax > 0 ? frame.energy / energyMax : 0;
  return {
    energyFraction: Math.min(1, Math.max(0, fraction)),
    mode: frame.camera.mode,
    orbitAngle: frame.camera.orbit_angle,
    focus: frame.camera.focus,
    pins: frame.radar,
    wOffset: frame.camera.cam4_position[3] ?? 0,
  };
}

export interface RadarDot {
  nodeId: number;
  screenX: number; // radar-local pixels, player at the origin
  screenY: number;
  barHeight: number; // signed pixels, up for +w
  onPlane: boolean;
}

/** Player-centered layout: x right, z up; altitude becomes a signed bar. */
export function radarLayout(
  pins: RadarPin[],
  worldRadius: number,
  screenRadius: number,
  altitudeScalePx = 14,
  onPlaneEps = 0.05,
): RadarDot[] {
  const k = screenRadius / worldRadius;
  const dots: RadarDot[] = [];
  for (const pin of pins) {
    const r = Math.hypot(pin.x, pin.z);
    if (r > worldRadius) continue;
    dots.push({
      nodeId: pin.node_id,
      screenX: pin.x * k,
      screenY: -pin.z * k,
      barHeight: -pin.altitude * altitudeScalePx,
      onPlane: Math.abs(pin.altitude) <= onPlaneEps,
    });
  }
  return dots;
}

export class HudOverlay {
  private canvas: HTMLCanvasElement;
  radarWorldRadius = 50;

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas;
  }

  render(state: HudState): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);

    // energy bar
    const barW = Math.min(260, width * 0.3);
    ctx.fillStyle = "rgba(0,0,0,0.5)";
    ctx.fillRect(16, 16, barW, 18);
    ctx.fillStyle = state.energyFraction > 0.25 ? "#48d9a4" : "#e4564a";
    ctx.fillRect(18, 18, (barW - 4) * state.energyFraction, 14);
    ctx.fillStyle = "#dce8f2";
    ctx.font = "12px monospace";
    ctx.fillText(
      `${state.mode === "frustum" ? "FRUSTUM" : "CROSS-SECTION"}  w=${state.wOffset.toFixed(2)}` +
        (state.orbitAngle !== null ? `  orbit=${state.orbitAngle.toFixed(2)}` : ""),
      16,
      50,
    );

    // radar: player-centered disc in the corner
    const radarR = Math.min(90, height * 0.18);
    const cx = width - radarR - 20;
    const cy = height - radarR - 20;
    ctx.strokeStyle = "rgba(120,200,255,0.6)";
    ctx.fillStyle = "rgba(10,30,50,0.55)";
    ctx.beginPath();
    ctx.arc(cx, cy, radarR, 0, Math.PI * 2);
    ctx.fill();
    ctx.stroke();
    ctx.fillStyle = "#9fd8ff";
    ctx.fillRect(cx - 2, cy - 2, 4, 4); // the player

    for (const dot of radarLayout(state.pins, this.radarWorldRadius, radarR)) {
      const x = cx + dot.screenX;
      const y = cy + dot.screenY;
      ctx.strokeStyle = "rgba(150,220,255,0.7)";
      ctx.beginPath();
      ctx.moveTo(x, y);
      ctx.lineTo(x, y + dot.barHeight);
      ctx.stroke();
      ctx.fillStyle = dot.onPlane ? "#ffe066" : "#6fb9e8";
      ctx.beginPath();
      ctx.arc(x, y + dot.barHeight, dot.onPlane ? 4 : 3, 0, Math.PI * 2);
      ctx.fill();
    }

    // focus / 4D-camera markers while orbiting
    if (state.focus) {
      ctx.fillStyle = "#ff9d5c";
      ctx.font = "11px monospace";
      ctx.fillText(
        `focus (${state.focus.map((v) => v.toFixed(1)).join(", ")})`,
        16,
        68,
      );
    }
  }
}
