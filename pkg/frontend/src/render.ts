/**
 * Canvas painting for the cockpit. Everything drawn comes straight from
 * the most recent telemetry; nothing is extrapolated client side.
 *
 * The drawing surface is addressed through a minimal structural interface
 * so tests can record calls without a browser canvas.
 */

import { UiSessionState } from "./session.js";
import { CLASS_NAMES, decodeFramePixels, rgbToRgba, StateMessage } from "./wire.js";

export interface Surface {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  font: string;
  lineWidth: number;
  globalAlpha: number;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  putImageData?(data: ImageData, x: number, y: number): void;
  drawImage?(image: CanvasImageSource, x: number, y: number,
             w: number, h: number): void;
}

export const VIEW_SCALE = 3; // 128 px frames on a 384 px canvas

const STATE_LABELS: Record<number, string> = {
  1: "1 object search",
  2: "2 center object",
  3: "3 initial approach",
  4: "4 final approach",
  5: "5 grasp object",
  6: "6 return to start",
};

const SWATCH_COLORS: Record<string, string> = {
  red: "#e03030",
  yellow: "#e0d020",
  blue: "#3040e0",
};

/** Convert the latest frame into RGBA suitable for ImageData. */
export function frameToRgba(session: UiSessionState): {
  rgba: Uint8ClampedArray<ArrayBuffer>;
  width: number;
  height: number;
} | null {
  const frame = session.latestFrame;
  if (!frame) return null;
  return {
    rgba: rgbToRgba(decodeFramePixels(frame)),
    width: frame.width,
    height: frame.height,
  };
}

export function drawStatePanel(ctx: Surface, state: StateMessage | null,
                               x: number, y: number): void {
  ctx.font = "14px monospace";
  ctx.fillStyle = "#d8d8d8";
  if (!state) {
    ctx.fillText("waiting for telemetry...", x, y);
    return;
  }
  const lines = [
    `t = ${state.sim_time.toFixed(2)} s${state.paused ? "  [paused]" : ""}`,
    `state: ${STATE_LABELS[state.fsm_state] ?? state.fsm_name}`,
    `mode: ${state.mode} / ${state.protocol}`,
    `gripper: ${state.gripper}`,
    `joints: ${state.joints.map((j) => j.toFixed(2)).join("  ")}`,
  ];
  lines.forEach((line, i) => ctx.fillText(line, x, y + i * 18));
}

export function drawIntentBar(ctx: Surface, state: StateMessage | null,
                              x: number, y: number, width: number): void {
  ctx.fillStyle = "#d8d8d8";
  ctx.font = "14px monospace";
  const cls = state?.intent.class ?? null;
  const certainty = state?.intent.certainty ?? 0;
  const label = cls === null ? "none" : CLASS_NAMES[cls as 0 | 1 | 2 | 3];
  ctx.fillText(`intent: ${label}`, x, y);
  ctx.strokeStyle = "#808080";
  ctx.strokeRect(x, y + 8, width, 12);
  ctx.fillStyle = "#40c040";
  ctx.fillRect(x, y + 8, width * Math.min(certainty, 1), 12);
}

export function drawDesiredSwatch(ctx: Surface, state: StateMessage | null,
                                  x: number, y: number): void {
  if (!state?.desired_object) return;
  const [shape, color] = state.desired_object;
  ctx.fillStyle = SWATCH_COLORS[color] ?? "#ffffff";
  const cx = x + 18;
  const cy = y + 18;
  ctx.beginPath();
  if (shape === "cube") {
    ctx.fillRect(x + 4, y + 4, 28, 28);
  } else if (shape === "sphere") {
    ctx.arc(cx, cy, 14, 0, Math.PI * 2);
    ctx.fill();
  } else {
    ctx.fillRect(x + 8, y + 2, 20, 32);
  }
  ctx.fillStyle = "#d8d8d8";
  ctx.font = "12px monospace";
  ctx.fillText(`${color} ${shape}`, x, y + 48);
}

export function drawPromptPanel(ctx: Surface, session: UiSessionState,
                                x: number, y: number): void {
  const phase = session.promptPhase();
  const prompt = session.latestPrompt;
  if (!phase || !prompt) return;
  ctx.font = "16px monospace";
  ctx.fillStyle = phase.label === "move" ? "#40c040" : "#c0c040";
  ctx.fillText(
    `${phase.label}: ${CLASS_NAMES[prompt.class]} (${phase.remaining.toFixed(1)}s)`,
    x, y,
  );
}

export function drawToast(ctx: Surface, session: UiSessionState,
                          x: number, y: number): void {
  const toast = session.activeToast();
  if (!toast) return;
  ctx.font = "16px monospace";
  ctx.fillStyle = toast.success ? "#40e040" : "#e04040";
  ctx.fillText(toast.text, x, y);
}

/**
 * Schematic side view of an arm in the vertical plane of its yaw:
 * shoulder lift, long arm at the shoulder pitch, short arm at the elbow,
 * gripper stub perpendicular to the forearm plus the wrist pitch.
 */
export function armSideProfile(joints: number[], originX: number,
                               originY: number, scale: number):
    Array<[number, number]> {
  const q2 = joints[1] ?? 0;
  const q3 = joints[2] ?? 0;
  const q5 = joints[4] ?? 0;
  const points: Array<[number, number]> = [[originX, originY]];
  let x = originX;
  let y = originY - 0.2 * scale;
  points.push([x, y]);
  const segments: Array<[number, number]> = [
    [0.4, q2],
    [0.3, q2 + q3],
    [0.1, q2 + q3 + q5 + Math.PI / 2],
  ];
  for (const [length, pitch] of segments) {
    x += length * scale * Math.sin(pitch);
    y -= length * scale * Math.cos(pitch);
    points.push([x, y]);
  }
  return points;
}

export function drawArmSchematic(ctx: Surface, joints: number[],
                                 originX: number, originY: number,
                                 scale: number, color: string): void {
  const points = armSideProfile(joints, originX, originY, scale);
  ctx.strokeStyle = color;
  ctx.lineWidth = 3;
  ctx.beginPath();
  const first = points[0]!;
  ctx.moveTo(first[0], first[1]);
  for (const [x, y] of points.slice(1)) ctx.lineTo(x, y);
  ctx.stroke();
  ctx.lineWidth = 1;
}

export function drawConnectionBadge(ctx: Surface, session: UiSessionState,
                                    x: number, y: number): void {
  ctx.font = "13px monospace";
  const colors = {
    connected: "#40c040",
    connecting: "#c0c040",
    disconnected: "#e04040",
  } as const;
  ctx.fillStyle = colors[session.status];
  ctx.fillText(session.status, x, y);
}
