"""Network boundary: telemetry out, intent and session control in.

One TCP listener speaks newline-delimited JSON for scripts and tests; a
second listener on the next port speaks WebSocket (text frames carrying the
same JSON messages) so a browser can join without a bridge.  All clients
receive the same broadcast stream; inbound commands funnel through a single
queue into the simulation thread, so connecting clients can never perturb
determinism beyond the intent they deliberately inject.

Message schema (every telemetry message carries ``sim_time``):

  state         fsm state number and name, joints, gripper, OOI bbox and id,
                desired object, last intent echo, mode, protocol, paused
  frame         width, height, base64 raw RGB8, post-AR-overlay
  prompt        trainer cue: class plus move/rest timing
  trial_result  full trial record after each grasp attempt
  error         reply to a malformed or unknown inbound message

Inbound:

  {"type": "intent", "class": 0..3, "certainty": 0..1}
  {"type": "control", "action": "start" | "pause" | "reset"
                    | "set_mode", "mode": "test" | "trainer"
                    | "set_protocol", "protocol": "set_locations" | ...}
"""

from __future__ import annotations

import base64
import dataclasses
import hashlib
import json
import queue
import socket
import struct
import threading
import time
import warnings

import numpy as np

from .config import SimConfig
from .harness import TrialRecord
from .intent import ExternalIntent
from .scene import SET_LOCATIONS, PROTOCOLS
from .sim import GraspSimulator
from .trainer import TrainerSimulator
from .fsm import STATE_NAMES

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
FRAME_EVERY_N_STEPS = 2  # 10 Hz at the 20 Hz step rate


# ---------------------------------------------------------------------------
# Message construction and validation


def state_message(sim_time, fsm, robot, view, last_intent, desired,
                  mode, protocol, paused, trainer_joints=None) -> dict:
    ooi_bbox = list(view.ooi.blob.bbox) if view.has_ooi else None
    return {
        "type": "state",
        "sim_time": round(float(sim_time), 6),
        "fsm_state": int(fsm.current),
        "fsm_name": STATE_NAMES[fsm.current],
        "joints": [round(float(j), 6) for j in robot.joints],
        "gripper": robot.gripper,
        "ooi_bbox": ooi_bbox,
        "ooi_id": view.ooi_object_id,
        "desired_object": list(desired) if desired else None,
        "intent": {"class": last_intent.cls, "certainty": float(last_intent.certainty)},
        "mode": mode,
        "protocol": protocol,
        "paused": paused,
        "trainer_joints": ([round(float(j), 6) for j in trainer_joints]
                           if trainer_joints is not None else None),
    }


def frame_message(sim_time, rgb: np.ndarray) -> dict:
    return {
        "type": "frame",
        "sim_time": round(float(sim_time), 6),
        "width": int(rgb.shape[1]),
        "height": int(rgb.shape[0]),
        "rgb_base64": base64.b64encode(rgb.astype(np.uint8).tobytes()).decode("ascii"),
    }


def decode_frame_message(msg: dict) -> np.ndarray:
    raw = base64.b64decode(msg["rgb_base64"])
    return np.frombuffer(raw, dtype=np.uint8).reshape(msg["height"], msg["width"], 3)


def prompt_message(sim_time, prompt) -> dict:
    return {
        "type": "prompt",
        "sim_time": round(float(sim_time), 6),
        "class": int(prompt.cls),
        "move_start": float(prompt.move_start),
        "move_duration": float(prompt.move_duration),
        "rest_duration": float(prompt.rest_duration),
    }


def trial_result_message(sim_time, record: TrialRecord) -> dict:
    return {
        "type": "trial_result",
        "sim_time": round(float(sim_time), 6),
        "record": json.loads(record.to_json()),
    }


def error_message(text: str) -> dict:
    return {"type": "error", "message": text}


class UnknownMessageType(Exception):
    """Well-formed message of a type this server does not speak."""


def parse_command(raw: str) -> dict:
    """Validate one inbound line.

    Raises ValueError for malformed messages (the caller replies with an
    error) and UnknownMessageType for well-formed messages of an unknown
    type (the caller ignores them with a warning).
    """
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"bad json: {exc}") from exc
    if not isinstance(msg, dict) or "type" not in msg:
        raise ValueError("message must be an object with a type")
    kind = msg["type"]
    if kind == "intent":
        cls = msg.get("class")
        if not isinstance(cls, int) or not 0 <= cls <= 3:
            raise ValueError("intent class must be an integer 0..3")
        cert = msg.get("certainty", 1.0)
        if not isinstance(cert, (int, float)):
            raise ValueError("certainty must be a number")
        msg["certainty"] = max(0.0, min(1.0, float(cert)))
        return msg
    if kind == "control":
        action = msg.get("action")
        if action not in ("start", "pause", "reset", "set_mode", "set_protocol"):
            raise ValueError(f"unknown control action {action!r}")
        if action == "set_mode" and msg.get("mode") not in ("test", "trainer"):
            raise ValueError("mode must be test or trainer")
        if action == "set_protocol" and msg.get("protocol") not in PROTOCOLS:
            raise ValueError("unknown protocol")
        return msg
    raise UnknownMessageType(kind)


# ---------------------------------------------------------------------------
# Client transports


class NdjsonClient:
    """Plain TCP client: one JSON object per line in both directions."""

    def __init__(self, conn: socket.socket):
        self.conn = conn
        self.lock = threading.Lock()
        self._file = conn.makefile("r", encoding="utf-8", newline="\n")

    def send_text(self, text: str) -> None:
        with self.lock:
            self.conn.sendall(text.encode("utf-8") + b"\n")

    def messages(self):
        for line in self._file:
            line = line.strip()
            if line:
                yield line

    def close(self) -> None:
        try:
            self.conn.close()
        except OSError:
            pass


class WebSocketClient:
    """Server side of a WebSocket connection (text frames only)."""

    def __init__(self, conn: socket.socket):
        self.conn = conn
        self.lock = threading.Lock()

    @staticmethod
    def handshake(conn: socket.socket) -> bool:
        data = b""
        while b"\r\n\r\n" not in data:
            chunk = conn.recv(4096)
            if not chunk:
                return False
            data += chunk
            if len(data) > 65536:
                return False
        headers = {}
        for line in data.split(b"\r\n")[1:]:
            if b":" in line:
                key, _, value = line.partition(b":")
                headers[key.strip().lower()] = value.strip()
        key = headers.get(b"sec-websocket-key")
        if key is None:
            return False
        accept = base64.b64encode(
            hashlib.sha1(key + WS_GUID.encode("ascii")).digest())
        conn.sendall(
            b"HTTP/1.1 101 Switching Protocols\r\n"
            b"Upgrade: websocket\r\n"
            b"Connection: Upgrade\r\n"
            b"Sec-WebSocket-Accept: " + accept + b"\r\n\r\n")
        return True

    def _recv_exact(self, n: int) -> bytes | None:
        buf = b""
        while len(buf) < n:
            chunk = self.conn.recv(n - len(buf))
            if not chunk:
                return None
            buf += chunk
        return buf

    def send_text(self, text: str) -> None:
        payload = text.encode("utf-8")
        header = bytearray([0x81])
        n = len(payload)
        if n < 126:
            header.append(n)
        elif n < 65536:
            header.append(126)
            header += struct.pack(">H", n)
        else:
            header.append(127)
            header += struct.pack(">Q", n)
        with self.lock:
            self.conn.sendall(bytes(header) + payload)

    def messages(self):
        fragments = []
        while True:
            head = self._recv_exact(2)
            if head is None:
                return
            fin = bool(head[0] & 0x80)
            opcode = head[0] & 0x0F
            masked = bool(head[1] & 0x80)
            length = head[1] & 0x7F
            if length == 126:
                ext = self._recv_exact(2)
                if ext is None:
                    return
                length = struct.unpack(">H", ext)[0]
            elif length == 127:
                ext = self._recv_exact(8)
                if ext is None:
                    return
                length = struct.unpack(">Q", ext)[0]
            mask = b"\x00" * 4
            if masked:
                mask = self._recv_exact(4)
                if mask is None:
                    return
            payload = self._recv_exact(length) if length else b""
            if payload is None:
                return
            if masked:
                payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
            if opcode == 0x8:      # close
                return
            if opcode == 0x9:      # ping -> pong
                with self.lock:
                    self.conn.sendall(bytes([0x8A, len(payload)]) + payload)
                continue
            if opcode in (0x1, 0x0):
                fragments.append(payload)
                if fin:
                    text = b"".join(fragments).decode("utf-8", errors="replace")
                    fragments = []
                    if text.strip():
                        yield text.strip()

    def close(self) -> None:
        try:
            self.conn.close()
        except OSError:
            pass


# ---------------------------------------------------------------------------
# Server


class TelemetryServer:
    """Live simulation with broadcast telemetry and a command queue.

    ``speed`` is the real-time factor; zero means run unpaced (tests).
    """

    def __init__(self, cfg: SimConfig, host: str = "127.0.0.1", port: int = 8765,
                 *, protocol: str = SET_LOCATIONS, seed: int = 0,
                 speed: float = 1.0, separability: float = 1.0):
        self.cfg = cfg
        self.host = host
        self.port = port
        self.protocol = protocol
        self.seed = seed
        self.speed = speed
        self.separability = separability

        self.external = ExternalIntent()
        self.commands: queue.Queue = queue.Queue()
        self.clients: list = []
        self.clients_lock = threading.Lock()
        self.running = threading.Event()
        self.paused = False
        self.mode = "test"
        self.sim_time = 0.0
        self._trial_counter = 0
        self._threads: list[threading.Thread] = []
        self._listeners: list[socket.socket] = []
        self._last_prompt = None
        self._build_sim()

    # -- simulation plumbing -------------------------------------------------

    def _draw_desired(self) -> int:
        rng = np.random.default_rng([abs(self.seed), self._trial_counter, 0xF00D])
        self._trial_counter += 1
        n = 9 if self.protocol == SET_LOCATIONS else 1
        return int(rng.integers(0, n))

    def _build_sim(self) -> None:
        if self.mode == "trainer":
            self.sim = TrainerSimulator(self.cfg, self.seed, self.external,
                                        separability=self.separability)
        else:
            self.sim = GraspSimulator(self.cfg, self.protocol, self.seed,
                                      self.external,
                                      desired_id=self._draw_desired())
        self._last_prompt = None

    # -- client fan-out -------------------------------------------------------

    def broadcast(self, message: dict) -> None:
        line = json.dumps(message)
        with self.clients_lock:
            clients = list(self.clients)
        for client in clients:
            try:
                client.send_text(line)
            except OSError:
                self._drop(client)

    def _drop(self, client) -> None:
        with self.clients_lock:
            if client in self.clients:
                self.clients.remove(client)
            remaining = len(self.clients)
        client.close()
        if remaining == 0:
            self.external.disconnect()

    # -- inbound --------------------------------------------------------------

    def _client_reader(self, client) -> None:
        try:
            for raw in client.messages():
                try:
                    msg = parse_command(raw)
                except UnknownMessageType as exc:
                    warnings.warn(f"ignoring message of unknown type {exc}")
                    continue
                except ValueError as exc:
                    try:
                        client.send_text(json.dumps(error_message(str(exc))))
                    except OSError:
                        break
                    continue
                self.commands.put(msg)
        except (OSError, ValueError):
            pass  # client vanished mid-read
        finally:
            self._drop(client)

    def _apply_commands(self) -> None:
        while True:
            try:
                msg = self.commands.get_nowait()
            except queue.Empty:
                return
            if msg["type"] == "intent":
                self.external.push(msg["class"], msg["certainty"],
                                   recv_time=self.sim_time)
            elif msg["type"] == "control":
                action = msg["action"]
                if action == "start":
                    self.paused = False
                elif action == "pause":
                    self.paused = True
                elif action == "reset":
                    self._build_sim()
                elif action == "set_mode":
                    self.mode = msg["mode"]
                    self._build_sim()
                elif action == "set_protocol":
                    self.protocol = msg["protocol"]
                    if self.mode == "test":
                        self._build_sim()

    # -- main loop ------------------------------------------------------------

    def _emit_state(self) -> None:
        trainer_joints = None
        if self.mode == "trainer":
            sim = self.sim
            from .scene import forward_kinematics
            from .vision import observe
            _, camera = forward_kinematics(sim.scene.robot, self.cfg)
            view = observe(sim.scene, camera, self.cfg)
            fsm = sim.fsm
            robot = sim.scene.robot
            desired = None
            from .intent import none_intent
            intent = none_intent(self.sim_time)
            trainer_joints = sim.scene.training_robot.joints
        else:
            sim = self.sim
            view = sim.current_view()
            fsm = sim.fsm
            robot = sim.scene.robot
            d = sim.desired_object()
            desired = (d.shape, d.color) if d else None
            intent = sim.last_intent
        self.broadcast(state_message(self.sim_time, fsm, robot, view, intent,
                                     desired, self.mode, self.protocol,
                                     self.paused, trainer_joints=trainer_joints))

    def _emit_frame(self) -> None:
        if self.mode == "trainer":
            from .scene import forward_kinematics
            from .vision import render
            _, camera = forward_kinematics(self.sim.scene.robot, self.cfg)
            rgb = render(self.sim.scene, camera, self.cfg).rgb
        else:
            _, rgb = self.sim.render_frame(with_overlay=True)
        self.broadcast(frame_message(self.sim_time, rgb))

    def _step_test_mode(self) -> None:
        self.sim.tick()
        self.sim_time = self.sim.t
        if self.sim.grasp_attempted():
            sim = self.sim
            m = sim.measurement
            desired = sim.desired_object()
            record = TrialRecord(
                trial_id=self._trial_counter,
                protocol=self.protocol,
                desired_object=(desired.shape, desired.color),
                selected_object=m.selected,
                grasp_success=bool(m.outcome.success),
                correct_selection=m.selected == (desired.shape, desired.color),
                duration=float((m.attempt_time or sim.t) - sim.trial_start),
                seed=self.seed,
                intent_kind="external",
            )
            self.broadcast(trial_result_message(self.sim_time, record))
            sim.start_new_trial(desired_id=self._draw_desired())

    def _step_trainer_mode(self) -> None:
        self.sim.tick()
        self.sim_time = self.sim.scene.sim_time
        prompt = self.sim.prompt
        if prompt is not self._last_prompt:
            self._last_prompt = prompt
            self.broadcast(prompt_message(self.sim_time, prompt))

    def _loop(self) -> None:
        step = 0
        wall_start = time.monotonic()
        sim_start = self.sim_time
        while self.running.is_set():
            self._apply_commands()
            if self.paused:
                self._emit_state()
                time.sleep(0.05)
                continue
            if self.mode == "trainer":
                self._step_trainer_mode()
            else:
                self._step_test_mode()
            self._emit_state()
            if step % FRAME_EVERY_N_STEPS == 0:
                self._emit_frame()
            step += 1
            if self.speed > 0:
                target = wall_start + (self.sim_time - sim_start) / self.speed
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)

    # -- listeners ------------------------------------------------------------

    def _accept_ndjson(self, listener: socket.socket) -> None:
        while self.running.is_set():
            try:
                conn, _ = listener.accept()
            except OSError:
                return
            client = NdjsonClient(conn)
            with self.clients_lock:
                self.clients.append(client)
            thread = threading.Thread(target=self._client_reader,
                                      args=(client,), daemon=True)
            thread.start()

    def _accept_websocket(self, listener: socket.socket) -> None:
        while self.running.is_set():
            try:
                conn, _ = listener.accept()
            except OSError:
                return
            try:
                ok = WebSocketClient.handshake(conn)
            except OSError:
                ok = False
            if not ok:
                try:
                    conn.close()
                except OSError:
                    pass
                continue
            client = WebSocketClient(conn)
            with self.clients_lock:
                self.clients.append(client)
            thread = threading.Thread(target=self._client_reader,
                                      args=(client,), daemon=True)
            thread.start()

    @property
    def ws_port(self) -> int:
        return self.port + 1

    def start(self) -> None:
        self.running.set()
        tcp = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        tcp.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        tcp.bind((self.host, self.port))
        tcp.listen(8)
        ws = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        ws.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        ws.bind((self.host, self.ws_port))
        ws.listen(8)
        self._listeners = [tcp, ws]
        self._threads = [
            threading.Thread(target=self._accept_ndjson, args=(tcp,), daemon=True),
            threading.Thread(target=self._accept_websocket, args=(ws,), daemon=True),
            threading.Thread(target=self._loop, daemon=True),
        ]
        for thread in self._threads:
            thread.start()

    def stop(self) -> None:
        self.running.clear()
        for listener in self._listeners:
            try:
                listener.close()
            except OSError:
                pass
        with self.clients_lock:
            clients = list(self.clients)
        for client in clients:
            client.close()

    def serve_forever(self) -> None:
        self.start()
        try:
            while True:
                time.sleep(0.5)
        except KeyboardInterrupt:
            self.stop()
