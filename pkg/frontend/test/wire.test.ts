import { describe, expect, it } from "vitest";

import {
  decodeFramePixels,
  encodeCommand,
  intentCommand,
  parseTelemetry,
  rgbToRgba,
  FrameMessage,
} from "../src/wire.js";

describe("parseTelemetry", () => {
  it("accepts known message types", () => {
    const raw = JSON.stringify({
      type: "state", sim_time: 1.5, fsm_state: 1, fsm_name: "object_search",
      joints: [0, 0, 0, 0, 1.05, 0], gripper: "open", ooi_bbox: null,
      ooi_id: null, desired_object: ["cube", "red"],
      intent: { class: null, certainty: 0 }, mode: "test",
      protocol: "set_locations", paused: false,
    });
    const msg = parseTelemetry(raw);
    expect(msg?.type).toBe("state");
    if (msg?.type === "state") {
      expect(msg.desired_object).toEqual(["cube", "red"]);
    }
  });

  it("returns null on junk", () => {
    expect(parseTelemetry("not json")).toBeNull();
    expect(parseTelemetry("42")).toBeNull();
    expect(parseTelemetry('{"type": "martian"}')).toBeNull();
  });
});

describe("commands", () => {
  it("encodes intents on the wire schema", () => {
    const line = encodeCommand(intentCommand(2, 1.0));
    expect(JSON.parse(line)).toEqual({ type: "intent", class: 2, certainty: 1 });
  });

  it("encodes control messages", () => {
    const line = encodeCommand({ type: "control", action: "set_mode", mode: "trainer" });
    expect(JSON.parse(line).action).toBe("set_mode");
  });
});

describe("frame decoding", () => {
  function frameOf(bytes: number[], width: number, height: number): FrameMessage {
    const binary = String.fromCharCode(...bytes);
    return {
      type: "frame", sim_time: 0, width, height,
      rgb_base64: Buffer.from(binary, "binary").toString("base64"),
    };
  }

  it("round-trips pixels", () => {
    const bytes = [255, 0, 0, 0, 255, 0, 0, 0, 255, 9, 9, 9];
    const rgb = decodeFramePixels(frameOf(bytes, 2, 2));
    expect(Array.from(rgb)).toEqual(bytes);
  });

  it("rejects wrong payload sizes", () => {
    expect(() => decodeFramePixels(frameOf([1, 2, 3], 2, 2))).toThrow();
  });

  it("expands to rgba with opaque alpha", () => {
    const rgba = rgbToRgba(new Uint8ClampedArray([10, 20, 30, 40, 50, 60]));
    expect(Array.from(rgba)).toEqual([10, 20, 30, 255, 40, 50, 60, 255]);
  });
});
