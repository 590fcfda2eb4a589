/**
 * Wire protocol: one JSON object per WebSocket text frame (or per line on
 * the plain TCP transport). Mirrors the server schema field for field.
 */

export type IntentClass = 0 | 1 | 2 | 3;

export const CLASS_NAMES: Record<IntentClass, string> = {
  0: "left",
  1: "right",
  2: "both hands",
  3: "both feet",
};

export interface StateMessage {
  type: "state";
  sim_time: number;
  fsm_state: number;
  fsm_name: string;
  joints: number[];
  gripper: string;
  ooi_bbox: [number, number, number, number] | null;
  ooi_id: number | null;
  desired_object: [string, string] | null;
  intent: { class: number | null; certainty: number };
  mode: "test" | "trainer";
  protocol: string;
  paused: boolean;
}

export interface FrameMessage {
  type: "frame";
  sim_time: number;
  width: number;
  height: number;
  rgb_base64: string;
}

export interface PromptMessage {
  type: "prompt";
  sim_time: number;
  class: IntentClass;
  move_start: number;
  move_duration: number;
  rest_duration: number;
}

export interface TrialResultMessage {
  type: "trial_result";
  sim_time: number;
  record: {
    desired_object: [string, string];
    selected_object: [string, string] | null;
    grasp_success: boolean;
    correct_selection: boolean;
    duration: number;
  };
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type TelemetryMessage =
  | StateMessage
  | FrameMessage
  | PromptMessage
  | TrialResultMessage
  | ErrorMessage;

export interface IntentCommand {
  type: "intent";
  class: IntentClass;
  certainty: number;
}

export interface ControlCommand {
  type: "control";
  action: "start" | "pause" | "reset" | "set_mode" | "set_protocol";
  mode?: "test" | "trainer";
  protocol?: string;
}

export type Command = IntentCommand | ControlCommand;

const TELEMETRY_TYPES = new Set([
  "state",
  "frame",
  "prompt",
  "trial_result",
  "error",
]);

/** Parse one telemetry payload; returns null for noise we don't know. */
export function parseTelemetry(raw: string): TelemetryMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as { type?: unknown };
  if (typeof msg.type !== "string" || !TELEMETRY_TYPES.has(msg.type)) {
    return null;
  }
  return data as TelemetryMessage;
}

export function encodeCommand(cmd: Command): string {
  return JSON.stringify(cmd);
}

export function intentCommand(cls: IntentClass, certainty = 1.0): IntentCommand {
  return { type: "intent", class: cls, certainty };
}

/** Decode a base64 raw-RGB8 frame into bytes (length = w * h * 3). */
export function decodeFramePixels(msg: FrameMessage): Uint8ClampedArray<ArrayBuffer> {
  const binary = atob(msg.rgb_base64);
  const expected = msg.width * msg.height * 3;
  if (binary.length !== expected) {
    throw new Error(`frame payload ${binary.length} != ${expected}`);
  }
  const out = new Uint8ClampedArray(new ArrayBuffer(expected));
  for (let i = 0; i < expected; i++) out[i] = binary.charCodeAt(i);
  return out;
}

/** Expand RGB8 into RGBA for a canvas ImageData buffer. */
export function rgbToRgba(rgb: Uint8ClampedArray): Uint8ClampedArray<ArrayBuffer> {
  const pixels = rgb.length / 3;
  const out = new Uint8ClampedArray(new ArrayBuffer(pixels * 4));
  for (let i = 0; i < pixels; i++) {
    out[i * 4] = rgb[i * 3]!;
    out[i * 4 + 1] = rgb[i * 3 + 1]!;
    out[i * 4 + 2] = rgb[i * 3 + 2]!;
    out[i * 4 + 3] = 255;
  }
  return out;
}
