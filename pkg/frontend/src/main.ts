/**
 * Cockpit bootstrap: connect, pump keys, paint at the animation rate.
 */

import { CockpitClient } from "./client.js";
import { KeyIntentPump } from "./keymap.js";
import {
  VIEW_SCALE,
  drawArmSchematic,
  drawConnectionBadge,
  drawDesiredSwatch,
  drawIntentBar,
  drawPromptPanel,
  drawStatePanel,
  drawToast,
  frameToRgba,
} from "./render.js";
import { UiSessionState } from "./session.js";

const FRAME_SIZE = 128;

function serverUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const addr = params.get("server") ?? `${window.location.hostname || "127.0.0.1"}:8766`;
  return `ws://${addr}`;
}

function boot(): void {
  const canvas = document.getElementById("cockpit") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context");

  const session = new UiSessionState();
  const client = new CockpitClient({
    url: serverUrl(),
    session,
    onDisconnect: () => pump.releaseAll(),
  });
  const pump = new KeyIntentPump({ send: (cmd) => client.send(cmd) });

  window.addEventListener("keydown", (ev) => {
    if (ev.repeat) return;
    if (pump.keyDown(ev.key)) ev.preventDefault();
  });
  window.addEventListener("keyup", (ev) => pump.keyUp(ev.key));
  window.addEventListener("blur", () => pump.releaseAll());

  const offscreen = document.createElement("canvas");
  offscreen.width = FRAME_SIZE;
  offscreen.height = FRAME_SIZE;
  const offctx = offscreen.getContext("2d")!;

  function paint(): void {
    ctx!.fillStyle = "#101418";
    ctx!.fillRect(0, 0, canvas.width, canvas.height);

    const frame = frameToRgba(session);
    if (frame) {
      const image = new ImageData(frame.rgba, frame.width, frame.height);
      offctx.putImageData(image, 0, 0);
      (ctx as CanvasRenderingContext2D).imageSmoothingEnabled = false;
      ctx!.drawImage!(offscreen, 0, 0,
                      FRAME_SIZE * VIEW_SCALE, FRAME_SIZE * VIEW_SCALE);
    } else {
      ctx!.fillStyle = "#303030";
      ctx!.fillRect(0, 0, FRAME_SIZE * VIEW_SCALE, FRAME_SIZE * VIEW_SCALE);
    }
    if (session.status !== "connected") {
      ctx!.globalAlpha = 0.6;
      ctx!.fillStyle = "#202020";
      ctx!.fillRect(0, 0, FRAME_SIZE * VIEW_SCALE, FRAME_SIZE * VIEW_SCALE);
      ctx!.globalAlpha = 1.0;
    }

    const panelX = FRAME_SIZE * VIEW_SCALE + 16;
    drawConnectionBadge(ctx!, session, panelX, 20);
    drawStatePanel(ctx!, session.latestState, panelX, 44);
    drawIntentBar(ctx!, session.latestState, panelX, 150, 180);
    drawPromptPanel(ctx!, session, panelX, 200);
    drawToast(ctx!, session, panelX, 230);
    // desired object swatch in the bottom right corner
    drawDesiredSwatch(ctx!, session.latestState,
                      canvas.width - 90, canvas.height - 80);

    const state = session.latestState;
    if (state) {
      drawArmSchematic(ctx!, state.joints, panelX + 60, canvas.height - 16,
                       140, "#d0d0d0");
      const trainerJoints = (state as unknown as { trainer_joints?: number[] })
        .trainer_joints;
      if (trainerJoints) {
        drawArmSchematic(ctx!, trainerJoints, panelX + 60, canvas.height - 16,
                         140, "rgba(64, 224, 64, 0.6)");
      }
    }
    requestAnimationFrame(paint);
  }

  client.connect();
  requestAnimationFrame(paint);
}

window.addEventListener("DOMContentLoaded", boot);
