// Browser entry: connect to a continuum serve session over WebSocket,
// render streamed frames, capture input, draw the HUD. Reconnect prompt
// on disconnect.

import { ViewerClient } from "./client.js";
import { HudOverlay, hudStateFrom } from "./hud.js";
import { ThreeRenderer } from "./render3d.js";
import { WebSocketTransport } from "./transport.js";

export async function connectAndRun(url: string): Promise<void> {
  const view = document.getElementById("view") as HTMLCanvasElement;
  const overlay = document.getElementById("hud") as HTMLCanvasElement;
  const status = document.getElementById("status") as HTMLElement;

  const transport = new WebSocketTransport(url);
  await transport.ready();
  const client = new ViewerClient(transport);
  const renderer = new ThreeRenderer(view);
  const hud = new HudOverlay(overlay);

  const resize = () => {
    view.width = window.innerWidth;
    view.height = window.innerHeight;
    overlay.width = window.innerWidth;
    overlay.height = window.innerHeight;
    renderer.resize(view.width, view.height);
  };
  window.addEventListener("resize", resize);
  resize();

  const config = await client.handshake();
  status.textContent =
    `scene '${config.scene_name}' @ ${config.tick_rate} Hz — ` +
    `WASD move, mouse look, Q/E move along w, F frustum, Z/X orbit, ` +
    `R fire, G ghosts (shift+G confirm)`;

  client.input.attach(document);
  view.addEventListener("click", () => view.requestPointerLock());

  transport.onClose(() => {
    status.textContent = "disconnected — reload to reconnect";
  });

  let pendingFrame = client.lastFrame;
  client.onFrame((frame) => {
    pendingFrame = frame;
  });

  const animate = () => {
    if (pendingFrame) {
      client.renderFrame(pendingFrame, renderer);
      hud.render(hudStateFrom(pendingFrame, config.energy_max));
      pendingFrame = null;
    }
    client.flushInputs();
    renderer.draw();
    requestAnimationFrame(animate);
  };
  animate();
}

const params = new URLSearchParams(window.location.search);
const wsUrl = params.get("server") ?? `ws://${window.location.hostname}:8765`;
connectAndRun(wsUrl).catch((error) => {
  const status = document.getElementById("status");
  if (status) status.textContent = `connection failed: ${error}`;
});
