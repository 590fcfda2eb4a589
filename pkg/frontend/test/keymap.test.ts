import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { KeyIntentPump, REPEAT_MS } from "../src/keymap.js";
import { Command } from "../src/wire.js";

describe("KeyIntentPump", () => {
  let sent: Command[];
  let pump: KeyIntentPump;

  beforeEach(() => {
    vi.useFakeTimers();
    sent = [];
    pump = new KeyIntentPump({ send: (cmd) => sent.push(cmd) });
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  function intents(): Command[] {
    return sent.filter((c) => c.type === "intent");
  }

  it("maps a/d/w/s to the four classes", () => {
    for (const [key, cls] of [["a", 0], ["d", 1], ["w", 2], ["s", 3]] as const) {
      sent.length = 0;
      pump.keyDown(key);
      pump.keyUp(key);
      expect(intents()[0]).toMatchObject({ class: cls, certainty: 1.0 });
    }
  });

  it("repeats every 100 ms while held", () => {
    pump.keyDown("d");
    vi.advanceTimersByTime(1000);
    pump.keyUp("d");
    // >= 9 messages over one second of hold
    expect(intents().length).toBeGreaterThanOrEqual(9);
    expect(intents().every((c) => c.type === "intent" && c.class === 1)).toBe(true);
  });

  it("stops emitting on release", () => {
    pump.keyDown("w");
    vi.advanceTimersByTime(300);
    pump.keyUp("w");
    const after = intents().length;
    vi.advanceTimersByTime(1000);
    expect(intents().length).toBe(after);
  });

  it("no keys held means no intent traffic", () => {
    vi.advanceTimersByTime(2000);
    expect(intents().length).toBe(0);
  });

  it("falls back to a still-held key on release", () => {
    pump.keyDown("w");
    pump.keyDown("a");
    sent.length = 0;
    pump.keyUp("a");
    vi.advanceTimersByTime(250);
    const classes = new Set(intents().map((c) => c.type === "intent" && c.class));
    expect(classes).toEqual(new Set([2]));
  });

  it("ignores unknown keys", () => {
    expect(pump.keyDown("q")).toBe(false);
    vi.advanceTimersByTime(500);
    expect(sent.length).toBe(0);
  });

  it("ignores duplicate keydown from OS auto-repeat", () => {
    pump.keyDown("w");
    const after = sent.length;
    pump.keyDown("w");
    expect(sent.length).toBe(after);
  });

  it("sends reset and mode controls", () => {
    pump.keyDown("r");
    pump.keyDown("t");
    pump.keyDown("g");
    expect(sent).toEqual([
      { type: "control", action: "reset" },
      { type: "control", action: "set_mode", mode: "test" },
      { type: "control", action: "set_mode", mode: "trainer" },
    ]);
  });

  it("releaseAll silences everything", () => {
    pump.keyDown("w");
    pump.keyDown("s");
    pump.releaseAll();
    const after = intents().length;
    vi.advanceTimersByTime(1000);
    expect(intents().length).toBe(after);
    expect(pump.activeClass).toBeNull();
  });

  it("uses the certainty supplier", () => {
    const attenuated = new KeyIntentPump({
      send: (cmd) => sent.push(cmd),
      certainty: () => 0.4,
    });
    attenuated.keyDown("a");
    const first = sent.find((c) => c.type === "intent");
    expect(first).toMatchObject({ certainty: 0.4 });
  });
});
