/**
 * Keyboard steering: the human stands in for the intent classifier.
 *
 * A, D, W, S map to left, right, both hands, both feet. While a key is
 * held the intent repeats every 100 ms at full certainty; on release the
 * emission stops and the server's staleness window quiets the arm. R asks
 * for a reset, T and G switch between test and trainer modes.
 */

import { Command, IntentClass, intentCommand } from "./wire.js";

export const REPEAT_MS = 100;

const KEY_TO_CLASS: Record<string, IntentClass> = {
  a: 0,
  d: 1,
  w: 2,
  s: 3,
};

export interface KeymapOptions {
  send: (cmd: Command) => void;
  certainty?: () => number;
  setIntervalFn?: typeof setInterval;
  clearIntervalFn?: typeof clearInterval;
}

export class KeyIntentPump {
  private readonly send: (cmd: Command) => void;
  private readonly certainty: () => number;
  private readonly setIntervalFn: typeof setInterval;
  private readonly clearIntervalFn: typeof clearInterval;
  private readonly held = new Set<IntentClass>();
  private timer: ReturnType<typeof setInterval> | null = null;
  private active: IntentClass | null = null;

  constructor(options: KeymapOptions) {
    this.send = options.send;
    this.certainty = options.certainty ?? (() => 1.0);
    this.setIntervalFn = options.setIntervalFn ?? setInterval;
    this.clearIntervalFn = options.clearIntervalFn ?? clearInterval;
  }

  get activeClass(): IntentClass | null {
    return this.active;
  }

  get heldClasses(): ReadonlySet<IntentClass> {
    return this.held;
  }

  keyDown(key: string): boolean {
    const normalized = key.toLowerCase();
    if (normalized === "r") {
      this.send({ type: "control", action: "reset" });
      return true;
    }
    if (normalized === "t") {
      this.send({ type: "control", action: "set_mode", mode: "test" });
      return true;
    }
    if (normalized === "g") {
      this.send({ type: "control", action: "set_mode", mode: "trainer" });
      return true;
    }
    const cls = KEY_TO_CLASS[normalized];
    if (cls === undefined) return false;
    if (!this.held.has(cls)) {
      this.held.add(cls);
      this.activate(cls);
    }
    return true;
  }

  keyUp(key: string): void {
    const cls = KEY_TO_CLASS[key.toLowerCase()];
    if (cls === undefined) return;
    this.held.delete(cls);
    if (this.active === cls) {
      const next = this.held.values().next();
      this.activate(next.done ? null : next.value);
    }
  }

  /** Stop emitting entirely (window blur, disconnect). */
  releaseAll(): void {
    this.held.clear();
    this.activate(null);
  }

  private activate(cls: IntentClass | null): void {
    if (this.timer !== null) {
      this.clearIntervalFn(this.timer);
      this.timer = null;
    }
    this.active = cls;
    if (cls === null) return;
    this.emit();
    this.timer = this.setIntervalFn(() => this.emit(), REPEAT_MS);
  }

  private emit(): void {
    if (this.active === null) return;
    this.send(intentCommand(this.active, this.certainty()));
  }
}
