"""Live-play session server.

One controller client (the browser UI or a scripted client) connects and
drives the expert avatar with key actions while an agent policy runs inside
the session. The protocol is newline-delimited JSON messages with types
hello, state, action, score, end, error; unknown message types are rejected
with an error message, never ignored.

Transport: plain TCP (newline-delimited) or a WebSocket text stream (each
frame one JSON document) — the server sniffs an HTTP Upgrade request and
speaks RFC 6455 when it sees one, so browsers and netcat-grade scripts share
one port. The server owns the simulation tick (default 15/s); client actions
are queued and coalesced to at most one per tick; a missing action means
noop. The session is recorded and written as a trajectory file on close;
a disconnect mid-episode flushes a partial file marked incomplete.
"""

from __future__ import annotations

import base64
import hashlib
import json
import socket
import struct
import time

import numpy as np

from ..env import Action
from ..episodes import Episode
from ..tasks import TaskSpec
from .trajectory import write_trajectory

PROTOCOL_VERSION = 1
DEFAULT_TICK_RATE = 15.0
_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

MESSAGE_TYPES = ("hello", "state", "action", "score", "end", "error")
ACTION_NAMES = {a.name.lower(): a for a in Action}


class ProtocolError(Exception):
    pass


class _Stream:
    """Line/frame codec over a connected socket: raw TCP or WebSocket."""

    def __init__(self, conn: socket.socket):
        self.conn = conn
        self.buffer = b""
        self.websocket = False
        self._sniff()

    def _sniff(self):
        first = self.conn.recv(4096)
        if first.startswith(b"GET "):
            self._handshake(first)
            self.websocket = True
        else:
            self.buffer = first

    def _handshake(self, request: bytes):
        while b"\r\n\r\n" not in request:
            request += self.conn.recv(4096)
        headers = {}
        for line in request.split(b"\r\n")[1:]:
            if b":" in line:
                k, _, v = line.partition(b":")
                headers[k.strip().lower()] = v.strip()
        key = headers.get(b"sec-websocket-key")
        if key is None:
            raise ProtocolError("not a websocket upgrade request")
        accept = base64.b64encode(
            hashlib.sha1(key + _WS_GUID.encode()).digest()
        ).decode()
        self.conn.sendall(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode()
        )

    def send_json(self, obj: dict):
        data = (json.dumps(obj, separators=(",", ":")) + "\n").encode()
        if self.websocket:
            header = b"\x81"  # FIN + text frame
            n = len(data)
            if n < 126:
                header += bytes([n])
            elif n < 65536:
                header += bytes([126]) + struct.pack(">H", n)
            else:
                header += bytes([127]) + struct.pack(">Q", n)
            self.conn.sendall(header + data)
        else:
            self.conn.sendall(data)

    def recv_json(self, timeout: float):
        """Next JSON message, or None on timeout. Raises on disconnect."""
        deadline = time.monotonic() + timeout
        while True:
            msg = self._pop_message()
            if msg is not None:
                return json.loads(msg)
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            self.conn.settimeout(remaining)
            try:
                chunk = self.conn.recv(4096)
            except socket.timeout:
                return None
            if not chunk:
                raise ConnectionError("client disconnected")
            self.buffer += chunk

    def _pop_message(self):
        if not self.websocket:
            if b"\n" in self.buffer:
                line, _, self.buffer = self.buffer.partition(b"\n")
                return line.decode().strip() or None
            return None
        # websocket framing: masked client frames
        if len(self.buffer) < 2:
            return None
        b0, b1 = self.buffer[0], self.buffer[1]
        opcode = b0 & 0x0F
        masked = b1 & 0x80
        length = b1 & 0x7F
        offset = 2
        if length == 126:
            if len(self.buffer) < 4:
                return None
            length = struct.unpack(">H", self.buffer[2:4])[0]
            offset = 4
        elif length == 127:
            if len(self.buffer) < 10:
                return None
            length = struct.unpack(">Q", self.buffer[2:10])[0]
            offset = 10
        mask_len = 4 if masked else 0
        if len(self.buffer) < offset + mask_len + length:
            return None
        mask = self.buffer[offset:offset + mask_len]
        payload = bytearray(self.buffer[offset + mask_len:offset + mask_len + length])
        self.buffer = self.buffer[offset + mask_len + length:]
        if masked:
            for i in range(len(payload)):
                payload[i] ^= mask[i % 4]
        if opcode == 0x8:  # close
            raise ConnectionError("client sent close frame")
        if opcode not in (0x1, 0x2):
            return self._pop_message()  # ignore pings etc.
        text = payload.decode().strip()
        return text or None

    def close(self):
        try:
            self.conn.close()
        except OSError:
            pass


def world_geometry(built) -> dict:
    w = built.world
    return {
        "size": w.size,
        "goals": [
            {"x": float(g.centre[0]), "y": float(g.centre[1]),
             "r": g.radius, "colour": g.colour}
            for g in w.goals
        ],
        "v_obstacles": [
            {"x": float(c[0]), "y": float(c[1]), "r": float(r)}
            for c, r in zip(w.v_centres, w.v_radii)
        ],
        "h_obstacles": [
            {"ax": float(a[0]), "ay": float(a[1]),
             "bx": float(b[0]), "by": float(b[1])}
            for a, b in zip(w.h_seg_a, w.h_seg_b)
        ],
    }


class _HumanExpert:
    """Expert driven by client action messages, one per tick, noop default."""

    def __init__(self):
        self.pending: Action = Action.NOOP

    def take(self) -> Action:
        a, self.pending = self.pending, Action.NOOP
        return a


def serve_live(
    task: TaskSpec,
    port: int,
    agent_policy=None,
    out_path: str | None = None,
    tick_rate: float = DEFAULT_TICK_RATE,
    host: str = "127.0.0.1",
    paced: bool = True,
    client_timeout: float = 30.0,
) -> dict:
    """Run one live session; returns a summary dict.

    The human plays the expert. Exactly one client is accepted; the
    simulation advances at tick_rate (or as fast as the client responds when
    paced=False, for lockstep scripted clients). Each tick consumes at most
    one queued action message.
    """
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen(1)
    try:
        conn, _addr = listener.accept()
    finally:
        listener.close()
    stream = _Stream(conn)

    human = _HumanExpert()
    episode = Episode(task, agent_policy=agent_policy, record=True)
    if "expert" not in episode.players:
        stream.send_json({"type": "error", "reason": "task has no expert slot"})
        stream.close()
        raise ValueError("live play needs a task with an expert")

    stream.send_json(
        {
            "type": "hello",
            "version": PROTOCOL_VERSION,
            "tick_rate": tick_rate,
            "episode_length": task.episode_length,
            "players": sorted(episode.players),
            "world": world_geometry(episode.built),
        }
    )

    complete = True
    tick = 1.0 / tick_rate
    t_next = time.monotonic()

    def handle(msg) -> str:
        """-> 'action' | 'control' | 'fatal'. Unknown types are rejected."""
        mtype = msg.get("type")
        if mtype == "action":
            name = str(msg.get("action", "noop")).lower()
            if name not in ACTION_NAMES:
                stream.send_json(
                    {"type": "error", "reason": f"unknown action {name!r}"}
                )
                return "control"
            human.pending = ACTION_NAMES[name]
            return "action"
        if mtype in ("hello", "end"):
            return "control"   # tolerated echoes; never consume a tick
        stream.send_json(
            {"type": "error", "reason": f"unknown message type {mtype!r}"}
        )
        return "fatal"

    try:
        while not episode.terminated:
            try:
                if paced:
                    # consume whatever arrives until the tick deadline;
                    # later action messages within a tick win (coalescing)
                    fatal = False
                    while True:
                        remaining = t_next - time.monotonic()
                        if remaining <= 0:
                            break
                        msg = stream.recv_json(remaining)
                        if msg is None:
                            break
                        if handle(msg) == "fatal":
                            fatal = True
                            break
                    t_next += tick
                else:
                    # lockstep: block until the client's action for this tick;
                    # a silent client means the session is over
                    fatal = False
                    while True:
                        msg = stream.recv_json(client_timeout)
                        if msg is None:
                            raise ConnectionError("client went silent")
                        kind = handle(msg)
                        if kind == "action":
                            break
                        if kind == "fatal":
                            fatal = True
                            break
            except ConnectionError:
                complete = False
                break
            if fatal:
                complete = False
                break

            rewards = episode.step(expert_action=human.take())
            state_msg = {
                "type": "state",
                "t": episode.t,
                "e": episode.e,
                "players": {
                    p: {"x": float(s.position[0]), "y": float(s.position[1]),
                        "heading": float(s.heading), "score": s.score}
                    for p, s in episode.players.items()
                },
                "recording": out_path is not None,
            }
            stream.send_json(state_msg)
            if any(rewards.values()):
                stream.send_json(
                    {"type": "score", "t": episode.t,
                     "rewards": rewards, "scores": episode.scores}
                )
    finally:
        summary = {
            "final_scores": episode.scores,
            "steps": episode.t,
            "complete": complete and episode.terminated,
        }
        if out_path is not None:
            from ..episodes import EpisodeResult

            result = EpisodeResult(
                scores=episode.scores,
                steps=episode.steps,
                built=episode.built,
                expert_direction=episode.expert_direction,
            )
            write_trajectory(out_path, task, result,
                             complete=summary["complete"])
            summary["trajectory"] = str(out_path)
        try:
            stream.send_json({"type": "end", **summary})
        except OSError:
            pass
        stream.close()
    return summary
