import base64
import json
import socket
import struct
import time

import numpy as np
import pytest

from bcigrasp.config import SimConfig
from bcigrasp.harness import TrialRecord
from bcigrasp.service import (
    TelemetryServer,
    decode_frame_message,
    frame_message,
    parse_command,
    prompt_message,
    state_message,
    trial_result_message,
)
from bcigrasp.trainer import Prompt

CFG = SimConfig()


def free_port():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


class LineClient:
    def __init__(self, port, timeout=10.0):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=timeout)
        self.file = self.sock.makefile("r", encoding="utf-8")

    def send(self, obj):
        self.sock.sendall((json.dumps(obj) + "\n").encode())

    def next_message(self, want_type=None, max_messages=4000):
        for _ in range(max_messages):
            line = self.file.readline()
            if not line:
                raise AssertionError("connection closed")
            msg = json.loads(line)
            if want_type is None or msg["type"] == want_type:
                return msg
        raise AssertionError(f"no {want_type} message seen")

    def close(self):
        self.sock.close()


@pytest.fixture
def server():
    port = free_port()
    srv = TelemetryServer(CFG, "127.0.0.1", port, seed=3, speed=0.0)
    srv.start()
    time.sleep(0.05)
    yield srv
    srv.stop()


class TestSchema:
    def test_parse_command_intent(self):
        msg = parse_command('{"type": "intent", "class": 2, "certainty": 0.7}')
        assert msg["class"] == 2 and msg["certainty"] == 0.7

    def test_parse_clamps_certainty(self):
        msg = parse_command('{"type": "intent", "class": 0, "certainty": 7}')
        assert msg["certainty"] == 1.0

    def test_parse_rejects_garbage(self):
        for bad in ("not json", '{"no": "type"}', '{"type": "intent", "class": 9}',
                    '{"type": "control", "action": "fly"}'):
            with pytest.raises(ValueError):
                parse_command(bad)

    def test_unknown_type_is_flagged_separately(self):
        from bcigrasp.service import UnknownMessageType
        with pytest.raises(UnknownMessageType):
            parse_command('{"type": "wat"}')

    def test_frame_roundtrip(self):
        rng = np.random.default_rng(0)
        rgb = rng.integers(0, 256, size=(128, 128, 3), dtype=np.uint8)
        msg = frame_message(1.25, rgb)
        encoded = json.loads(json.dumps(msg))
        np.testing.assert_array_equal(decode_frame_message(encoded), rgb)

    def test_trial_result_roundtrip(self):
        record = TrialRecord(
            trial_id=1, protocol="set_locations",
            desired_object=("cube", "red"), selected_object=("cube", "red"),
            grasp_success=True, correct_selection=True, duration=20.0,
            seed=5, intent_kind="external",
        )
        msg = json.loads(json.dumps(trial_result_message(3.0, record)))
        again = TrialRecord.from_json(json.dumps(msg["record"]))
        assert again == record

    def test_prompt_message_fields(self):
        msg = prompt_message(2.0, Prompt(cls=3, move_start=4.0))
        assert msg["class"] == 3 and msg["move_start"] == 4.0
        assert msg["sim_time"] == 2.0

    def test_every_message_carries_sim_time(self):
        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        record = TrialRecord(0, "set_locations", ("cube", "red"), None, False,
                             False, 1.0, 0, "external")
        for msg in (frame_message(1.0, rgb),
                    prompt_message(1.0, Prompt(cls=0, move_start=0.0)),
                    trial_result_message(1.0, record)):
            assert "sim_time" in msg


class TestServerLoopback:
    def test_state_stream_and_intent_echo(self, server):
        client = LineClient(server.port)
        state = client.next_message("state")
        assert state["fsm_state"] == 1
        assert state["desired_object"] is not None
        # drive left; the echoed intent and base yaw respond
        for _ in range(10):
            client.send({"type": "intent", "class": 0, "certainty": 0.7})
            time.sleep(0.01)
        deadline = time.time() + 5.0
        turned = False
        while time.time() < deadline:
            state = client.next_message("state")
            if state["intent"]["class"] == 0 and state["joints"][0] > 0.005:
                turned = True
                break
        assert turned
        client.close()

    def test_frames_arrive_with_overlay_dimensions(self, server):
        client = LineClient(server.port)
        frame = client.next_message("frame")
        rgb = decode_frame_message(frame)
        assert rgb.shape == (128, 128, 3)
        client.close()

    def test_two_clients_see_identical_stream(self, server):
        a = LineClient(server.port)
        b = LineClient(server.port)
        time.sleep(0.3)
        seq_a = [a.next_message("state")["sim_time"] for _ in range(5)]
        # b joined at the same time; find overlap
        seq_b = []
        deadline = time.time() + 5.0
        while len(seq_b) < 40 and time.time() < deadline:
            seq_b.append(b.next_message("state")["sim_time"])
        overlap = [t for t in seq_a if t in set(seq_b)]
        assert len(overlap) >= 3
        a.close()
        b.close()

    def test_malformed_message_gets_error_reply_and_connection_survives(self, server):
        client = LineClient(server.port)
        client.sock.sendall(b"this is not json\n")
        msg = client.next_message("error")
        assert "bad json" in msg["message"]
        # still receiving telemetry afterwards
        assert client.next_message("state")
        client.close()

    def test_pause_and_reset_controls(self, server):
        client = LineClient(server.port)
        client.send({"type": "control", "action": "pause"})
        time.sleep(0.2)
        paused_state = None
        for _ in range(50):
            paused_state = client.next_message("state")
            if paused_state["paused"]:
                break
        assert paused_state["paused"]
        t1 = paused_state["sim_time"]
        time.sleep(0.2)
        t2 = client.next_message("state")["sim_time"]
        assert t2 == t1  # no stepping while paused
        client.send({"type": "control", "action": "start"})
        deadline = time.time() + 5.0
        while time.time() < deadline:
            if client.next_message("state")["sim_time"] > t1:
                break
        else:
            raise AssertionError("did not resume")
        client.close()

    def test_staleness_after_disconnect(self, server):
        driver = LineClient(server.port)
        watcher = LineClient(server.port)
        for _ in range(5):
            driver.send({"type": "intent", "class": 0, "certainty": 1.0})
            time.sleep(0.01)
        driver.close()
        # within half a simulated second the echoed intent reverts to none
        deadline = time.time() + 5.0
        reverted = False
        while time.time() < deadline:
            state = watcher.next_message("state")
            if state["intent"]["class"] is None:
                reverted = True
                break
        assert reverted
        watcher.close()


def ws_handshake(sock):
    key = base64.b64encode(b"0123456789abcdef").decode()
    sock.sendall((
        "GET / HTTP/1.1\r\nHost: x\r\nUpgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
    ).encode())
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        assert chunk
        data += chunk
    assert b"101" in data.split(b"\r\n")[0]
    return data.split(b"\r\n\r\n", 1)[1]


def ws_send_text(sock, text):
    payload = text.encode()
    mask = b"\x11\x22\x33\x44"
    masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    header = bytearray([0x81])
    assert len(payload) < 126
    header.append(0x80 | len(payload))
    sock.sendall(bytes(header) + mask + masked)


def ws_read_text(sock, leftover=b""):
    buf = leftover

    def need(n):
        nonlocal buf
        while len(buf) < n:
            chunk = sock.recv(65536)
            assert chunk
            buf += chunk
        out, buf = buf[:n], buf[n:]
        return out

    head = need(2)
    opcode = head[0] & 0x0F
    length = head[1] & 0x7F
    if length == 126:
        length = struct.unpack(">H", need(2))[0]
    elif length == 127:
        length = struct.unpack(">Q", need(8))[0]
    payload = need(length)
    return opcode, payload.decode(), buf


class TestWebSocketTransport:
    def test_ws_client_receives_and_sends(self, server):
        sock = socket.create_connection(("127.0.0.1", server.ws_port), timeout=10.0)
        leftover = ws_handshake(sock)
        # read a state message over ws
        deadline = time.time() + 5.0
        saw_state = False
        while time.time() < deadline and not saw_state:
            opcode, text, leftover = ws_read_text(sock, leftover)
            if opcode == 0x1 and json.loads(text)["type"] == "state":
                saw_state = True
        assert saw_state
        # send an intent over ws, watch the echo on a tcp client
        tcp = LineClient(server.port)
        for _ in range(8):
            ws_send_text(sock, json.dumps({"type": "intent", "class": 1,
                                           "certainty": 0.8}))
            time.sleep(0.01)
        deadline = time.time() + 5.0
        echoed = False
        while time.time() < deadline:
            state = tcp.next_message("state")
            if state["intent"]["class"] == 1:
                echoed = True
                break
        assert echoed
        tcp.close()
        sock.close()
