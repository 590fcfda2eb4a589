/**
 * End-to-end cockpit loop against the real simulator service.
 *
 * A scripted client drives the actual keymap: holding W (both hands) from
 * ObjectSearch with an object centered in the home view must walk the
 * controller through states 1 -> 2 -> 3 -> 4 -> 5 and produce a
 * trial_result; releasing the key must read back as a none intent within
 * half a simulated second.
 */

import { spawn, ChildProcess } from "node:child_process";
import net from "node:net";
import readline from "node:readline";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { KeyIntentPump } from "../src/keymap.js";
import { encodeCommand } from "../src/wire.js";

const HOST = "127.0.0.1";
const PORT = 18930;
const SPEED = 2; // sim seconds per wall second

let server: ChildProcess;

async function waitForPort(port: number, timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const ok = await new Promise<boolean>((resolve) => {
      const sock = net.connect(port, HOST);
      sock.once("connect", () => {
        sock.destroy();
        resolve(true);
      });
      sock.once("error", () => resolve(false));
    });
    if (ok) return;
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(`server did not open port ${port}`);
}

beforeAll(async () => {
  server = spawn("python3", [
    "-m", "bcigrasp.cli", "serve",
    "--addr", `${HOST}:${PORT}`,
    "--seed", "4",
    "--speed", String(SPEED),
  ], { stdio: ["ignore", "ignore", "pipe"] });
  server.on("error", (err) => {
    throw err;
  });
  await waitForPort(PORT);
}, 30000);

afterAll(() => {
  server?.kill("SIGKILL");
});

interface StatePayload {
  type: string;
  sim_time: number;
  fsm_state: number;
  intent: { class: number | null; certainty: number };
}

describe("cockpit loop", () => {
  it(
    "holding W drives 1->2->3->4->5, yields a trial result, and release goes quiet",
    async () => {
      const sock = net.connect(PORT, HOST);
      await new Promise<void>((resolve, reject) => {
        sock.once("connect", () => resolve());
        sock.once("error", reject);
      });
      const lines = readline.createInterface({ input: sock });

      const pump = new KeyIntentPump({
        send: (cmd) => sock.write(encodeCommand(cmd) + "\n"),
      });

      const visited: number[] = [];
      let trialResultSeen = false;
      let lastIntentTime = 0;
      let noneAfterRelease: number | null = null;
      let released = false;

      const finished = new Promise<void>((resolve, reject) => {
        const guard = setTimeout(
          () => reject(new Error(
            `timed out; visited=${visited} result=${trialResultSeen}`)),
          90000,
        );
        lines.on("line", (line) => {
          let msg: StatePayload;
          try {
            msg = JSON.parse(line);
          } catch {
            return;
          }
          if (msg.type === "trial_result") {
            trialResultSeen = true;
          }
          if (msg.type !== "state") return;
          if (visited.at(-1) !== msg.fsm_state) visited.push(msg.fsm_state);

          if (!released) {
            if (msg.intent.class === 2) lastIntentTime = msg.sim_time;
            if (trialResultSeen && msg.fsm_state >= 5) {
              released = true;
              pump.keyUp("w");
            }
          } else if (msg.intent.class === 2) {
            lastIntentTime = msg.sim_time;
          } else if (msg.intent.class === null && noneAfterRelease === null) {
            noneAfterRelease = msg.sim_time;
            clearTimeout(guard);
            resolve();
          }
        });
      });

      pump.keyDown("w");
      await finished;
      pump.releaseAll();
      sock.destroy();

      // the full main pathway appears, in order
      const order = [1, 2, 3, 4, 5];
      let cursor = 0;
      for (const state of visited) {
        if (state === order[cursor]) cursor += 1;
        if (cursor === order.length) break;
      }
      expect(cursor).toBe(order.length);
      expect(trialResultSeen).toBe(true);
      // staleness: none-intent within half a simulated second of the last push
      expect(noneAfterRelease).not.toBeNull();
      expect(noneAfterRelease! - lastIntentTime).toBeLessThanOrEqual(0.6);
    },
    120000,
  );
});
