/**
 * Client-side session state: the latest of everything the server said.
 *
 * The store never extrapolates robot state; every displayed value traces
 * to the most recent telemetry message.
 */

import {
  FrameMessage,
  PromptMessage,
  StateMessage,
  TelemetryMessage,
  TrialResultMessage,
} from "./wire.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface ToastEntry {
  text: string;
  success: boolean;
  receivedAt: number;
}

export class UiSessionState {
  status: ConnectionStatus = "connecting";
  latestState: StateMessage | null = null;
  latestFrame: FrameMessage | null = null;
  latestPrompt: PromptMessage | null = null;
  lastResult: TrialResultMessage | null = null;
  toast: ToastEntry | null = null;
  lastError: string | null = null;
  framesReceived = 0;

  private readonly now: () => number;

  constructor(now: () => number = () => Date.now()) {
    this.now = now;
  }

  get simTime(): number {
    return this.latestState?.sim_time ?? 0;
  }

  apply(msg: TelemetryMessage): void {
    switch (msg.type) {
      case "state":
        this.latestState = msg;
        break;
      case "frame":
        this.latestFrame = msg;
        this.framesReceived += 1;
        break;
      case "prompt":
        this.latestPrompt = msg;
        break;
      case "trial_result": {
        this.lastResult = msg;
        const rec = msg.record;
        const picked = rec.selected_object
          ? `${rec.selected_object[1]} ${rec.selected_object[0]}`
          : "nothing";
        this.toast = {
          text: rec.grasp_success
            ? `grasped ${picked}${rec.correct_selection ? " (desired!)" : ""}`
            : `missed ${picked}`,
          success: rec.grasp_success,
          receivedAt: this.now(),
        };
        break;
      }
      case "error":
        this.lastError = msg.message;
        break;
    }
  }

  setStatus(status: ConnectionStatus): void {
    this.status = status;
  }

  /** Trainer prompt phase at the current simulated time. */
  promptPhase(): { label: string; remaining: number } | null {
    const prompt = this.latestPrompt;
    if (!prompt || this.latestState?.mode !== "trainer") return null;
    const t = this.simTime;
    const moveEnd = prompt.move_start + prompt.move_duration;
    const restEnd = moveEnd + prompt.rest_duration;
    if (t < prompt.move_start) return null;
    if (t < moveEnd) {
      return { label: "move", remaining: moveEnd - t };
    }
    if (t < restEnd) {
      return { label: "rest", remaining: restEnd - t };
    }
    return null;
  }

  /** Toasts fade after a few seconds of wall time. */
  activeToast(ttlMs = 4000): ToastEntry | null {
    if (this.toast && this.now() - this.toast.receivedAt < ttlMs) {
      return this.toast;
    }
    return null;
  }
}
