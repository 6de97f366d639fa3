"""Frame/input wire protocol and the session server.

Messages are UTF-8 JSON. Over a plain TCP socket each message is prefixed
with a 4-byte big-endian length; a connection may instead open with an
HTTP upgrade, in which case the server speaks RFC 6455 WebSocket framing
with one JSON message per text frame (that is what browsers use). Both
framings carry exactly the same messages:

  client -> server   hello{protocol: 1}
                     input{tick, keys: [..], mouse_dx, mouse_dy, actions: [..]}
  server -> client   config{scene_name, tick_rate, energy_max, w_range}
                     frame{tick, time, energy, camera, radar, events, meshes}
                     error{message}

Mesh payloads ride inside frame.meshes; a mesh entry with changed=false
omits its geometry once it has been transmitted on this connection. All
floats are serialized as 64-bit decimal text (shortest round-trip repr).
"""

from __future__ import annotations

import base64
import hashlib
import json
import select
import socket
import struct
import time

from .meshes import TriMesh3
from .physics import FIXED_DT
from .session import Frame, Inputs, Session

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
PROTOCOL_VERSION = 1
MAX_MESSAGE = 64 * 1024 * 1024


def encode_message(obj: dict) -> bytes:
    payload = json.dumps(obj, separators=(",", ":"), allow_nan=False).encode("utf-8")
    return struct.pack(">I", len(payload)) + payload


class ProtocolError(Exception):
    pass


class LengthPrefixedTransport:
    """4-byte big-endian length + JSON payload over a stream socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.buffer = b""
        self.closed = False

    def fileno(self):
        return self.sock.fileno()

    def send(self, obj: dict):
        if not self.closed:
            try:
                self.sock.sendall(encode_message(obj))
            except OSError:
                self.closed = True

    def pump(self, timeout: float = 0.0) -> list[dict]:
        """Read whatever is available and return complete messages."""
        if self.closed:
            return []
        readable, _, _ = select.select([self.sock], [], [], timeout)
        if readable:
            try:
                chunk = self.sock.recv(1 << 20)
            except OSError:
                chunk = b""
            if not chunk:
                self.closed = True
            self.buffer += chunk
        return self._drain()

    def _drain(self) -> list[dict]:
        out = []
        while len(self.buffer) >= 4:
            (length,) = struct.unpack(">I", self.buffer[:4])
            if length > MAX_MESSAGE:
                self.closed = True
                raise ProtocolError(f"message length {length} exceeds limit")
            if len(self.buffer) < 4 + length:
                break
            payload = self.buffer[4:4 + length]
            self.buffer = self.buffer[4 + length:]
            try:
                out.append(json.loads(payload.decode("utf-8")))
            except (UnicodeDecodeError, json.JSONDecodeError) as e:
                out.append({"_malformed": str(e)})
        return out

    def close(self):
        self.closed = True
        try:
            self.sock.close()
        except OSError:
            pass


class WebSocketTransport:
    """Server side of RFC 6455 with JSON text frames."""

    def __init__(self, sock: socket.socket, first_bytes: bytes = b""):
        self.sock = sock
        self.buffer = b""
        self.closed = False
        self._handshake(first_bytes)

    def fileno(self):
        return self.sock.fileno()

    def _handshake(self, first_bytes: bytes):
        data = first_bytes
        self.sock.settimeout(10.0)
        while b"\r\n\r\n" not in data:
            chunk = self.sock.recv(65536)
            if not chunk:
                raise ProtocolError("connection closed during websocket handshake")
            data = data + chunk
            if len(data) > 65536:
                raise ProtocolError("oversized websocket handshake")
        head, rest = data.split(b"\r\n\r\n", 1)
        self.buffer = rest
        key = None
        for line in head.split(b"\r\n")[1:]:
            if b":" in line:
                name, value = line.split(b":", 1)
                if name.strip().lower() == b"sec-websocket-key":
                    key = value.strip().decode("ascii")
        if key is None:
            raise ProtocolError("websocket handshake missing Sec-WebSocket-Key")
        accept = base64.b64encode(
            hashlib.sha1((key + WS_GUID).encode("ascii")).digest()).decode("ascii")
        self.sock.sendall(
            b"HTTP/1.1 101 Switching Protocols\r\n"
            b"Upgrade: websocket\r\n"
            b"Connection: Upgrade\r\n"
            b"Sec-WebSocket-Accept: " + accept.encode("ascii") + b"\r\n\r\n")
        self.sock.settimeout(None)
        self.sock.setblocking(False)

    def send(self, obj: dict):
        if self.closed:
            return
        payload = json.dumps(obj, separators=(",", ":"), allow_nan=False).encode("utf-8")
        header = bytearray([0x81])  # FIN + text
        n = len(payload)
        if n < 126:
            header.append(n)
        elif n < (1 << 16):
            header.append(126)
            header += struct.pack(">H", n)
        else:
            header.append(127)
            header += struct.pack(">Q", n)
        try:
            self.sock.setblocking(True)
            self.sock.sendall(bytes(header) + payload)
            self.sock.setblocking(False)
        except OSError:
            self.closed = True

    def pump(self, timeout: float = 0.0) -> list[dict]:
        if self.closed:
            return []
        readable, _, _ = select.select([self.sock], [], [], timeout)
        if readable:
            try:
                chunk = self.sock.recv(1 << 20)
            except (BlockingIOError, InterruptedError):
                chunk = None
            except OSError:
                chunk = b""
            if chunk == b"":
                self.closed = True
            elif chunk:
                self.buffer += chunk
        return self._drain()

    def _drain(self) -> list[dict]:
        out = []
        while True:
            frame = self._parse_frame()
            if frame is None:
                break
            opcode, payload = frame
            if opcode == 0x8:  # close
                self.closed = True
                break
            if opcode == 0x9:  # ping -> pong
                try:
                    self.sock.sendall(bytes([0x8A, len(payload)]) + payload)
                except OSError:
                    self.closed = True
                continue
            if opcode in (0x1, 0x2):
                try:
                    out.append(json.loads(payload.decode("utf-8")))
                except (UnicodeDecodeError, json.JSONDecodeError) as e:
                    out.append({"_malformed": str(e)})
        return out

    def _parse_frame(self):
        buf = self.buffer
        if len(buf) < 2:
            return None
        opcode = buf[0] & 0x0F
        masked = bool(buf[1] & 0x80)
        length = buf[1] & 0x7F
        offset = 2
        if length == 126:
            if len(buf) < 4:
                return None
            (length,) = struct.unpack(">H", buf[2:4])
            offset = 4
        elif length == 127:
            if len(buf) < 10:
                return None
            (length,) = struct.unpack(">Q", buf[2:10])
            offset = 10
        if length > MAX_MESSAGE:
            self.closed = True
            raise ProtocolError("oversized websocket frame")
        mask = b""
        if masked:
            if len(buf) < offset + 4:
                return None
            mask = buf[offset:offset + 4]
            offset += 4
        if len(buf) < offset + length:
            return None
        payload = buf[offset:offset + length]
        if masked:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        self.buffer = buf[offset + length:]
        return opcode, payload

    def close(self):
        self.closed = True
        try:
            self.sock.close()
        except OSError:
            pass


def open_server_transport(conn: socket.socket):
    """Sniff the first bytes: HTTP upgrade -> WebSocket, else length-prefixed."""
    conn.settimeout(10.0)
    first = conn.recv(4, socket.MSG_PEEK)
    if first.startswith(b"GET"):
        return WebSocketTransport(conn)
    conn.setblocking(False)
    return LengthPrefixedTransport(conn)


# --- frame serialization -------------------------------------------------------


def mesh_payload(mesh: TriMesh3) -> dict:
    payload = {
        "vertices": [float(x) for x in mesh.vertices.reshape(-1)],
        "triangles": [int(i) for i in mesh.triangles.reshape(-1)],
    }
    if mesh.vertex_colors is not None:
        payload["colors"] = [float(x) for x in mesh.vertex_colors.reshape(-1)]
    return payload


def frame_message(frame: Frame, sent_meshes: set[int]) -> dict:
    """Wire form of a frame; mutates sent_meshes with newly transmitted ids."""
    meshes = []
    for fm in frame.meshes:
        entry = {
            "node_id": fm.node_id,
            "changed": bool(fm.changed),
            "material": list(fm.material),
            "wireframe": bool(fm.wireframe),
        }
        if fm.changed or fm.node_id not in sent_meshes:
            entry.update(mesh_payload(fm.mesh))
            sent_meshes.add(fm.node_id)
        meshes.append(entry)
    return {
        "type": "frame",
        "tick": frame.tick,
        "time": frame.time,
        "energy": frame.energy,
        "camera": frame.camera,
        "radar": [{"node_id": pin.node_id, "x": pin.planar[0], "z": pin.planar[1],
                   "altitude": pin.altitude} for pin in frame.radar],
        "events": frame.events,
        "meshes": meshes,
    }


# --- the serve loop --------------------------------------------------------------


class SessionServer:
    """Accepts one viewer at a time and streams frames at the tick rate."""

    def __init__(self, scene, port: int, host: str = "127.0.0.1",
                 tick_rate: float = 1.0 / FIXED_DT, seed: int = 0):
        self.scene = scene
        self.host = host
        self.port = port
        self.tick_rate = float(tick_rate)
        self.seed = seed
        self.listener: socket.socket | None = None
        self.stopping = False

    def bind(self):
        self.listener = socket.create_server((self.host, self.port))
        self.listener.settimeout(0.25)
        if self.port == 0:
            self.port = self.listener.getsockname()[1]

    def stop(self):
        self.stopping = True

    def serve_forever(self, max_connections: int | None = None):
        if self.listener is None:
            self.bind()
        served = 0
        try:
            while not self.stopping:
                try:
                    conn, _ = self.listener.accept()
                except socket.timeout:
                    continue
                try:
                    transport = open_server_transport(conn)
                    self.run_connection(transport)
                except (ProtocolError, OSError):
                    pass
                finally:
                    try:
                        conn.close()
                    except OSError:
                        pass
                served += 1
                if max_connections is not None and served >= max_connections:
                    break
        finally:
            self.listener.close()

    def run_connection(self, transport):
        """Drive one session over an open transport until disconnect."""
        # handshake: wait for a valid hello
        deadline = time.monotonic() + 10.0
        hello = None
        while hello is None:
            if time.monotonic() > deadline or transport.closed or self.stopping:
                return
            for msg in transport.pump(timeout=0.05):
                if msg.get("type") == "hello" and msg.get("protocol") == PROTOCOL_VERSION:
                    hello = msg
                    break
                transport.send({"type": "error",
                                "message": "expected hello{protocol: 1}"})
        transport.send({
            "type": "config",
            "protocol": PROTOCOL_VERSION,
            "scene_name": self.scene.name,
            "tick_rate": self.tick_rate,
            "energy_max": self.scene.energy["max"],
            "w_range": list(self.scene.w_range),
        })
        session = Session(self.scene, seed=self.seed)
        sent_meshes: set[int] = set()
        dt = 1.0 / self.tick_rate
        pending = Inputs()
        pending_actions: list[dict] = []
        next_tick = time.monotonic()
        while not transport.closed and not self.stopping:
            now = time.monotonic()
            if now < next_tick:
                for msg in transport.pump(timeout=min(0.01, next_tick - now)):
                    pending, pending_actions = self._absorb(
                        transport, msg, pending, pending_actions)
                continue
            next_tick += dt
            if now - next_tick > 1.0:
                next_tick = now + dt  # fell far behind; drop the backlog
            inputs = Inputs(pending.keys, pending.mouse_dx, pending.mouse_dy,
                            tuple(pending_actions))
            pending = Inputs(pending.keys)  # keys persist, deltas/actions consume
            pending_actions = []
            frame = session.tick(inputs, dt)
            transport.send(frame_message(frame, sent_meshes))

    def _absorb(self, transport, msg, pending, pending_actions):
        if "_malformed" in msg:
            transport.send({"type": "error",
                            "message": f"malformed message: {msg['_malformed']}"})
            return pending, pending_actions
        kind = msg.get("type")
        if kind == "input":
            try:
                parsed = Inputs.from_dict(msg)
            except (TypeError, ValueError) as e:
                transport.send({"type": "error", "message": f"bad input: {e}"})
                return pending, pending_actions
            pending = Inputs(parsed.keys, pending.mouse_dx + parsed.mouse_dx,
                             pending.mouse_dy + parsed.mouse_dy)
            pending_actions = pending_actions + list(parsed.actions)
        elif kind == "hello":
            pass  # harmless repeat
        else:
            transport.send({"type": "error", "message": f"unknown message type {kind!r}"})
        return pending, pending_actions


class WireClient:
    """Blocking length-prefixed client, used by tests and tooling."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.buffer = b""
        self.timeout = timeout

    def send(self, obj: dict):
        self.sock.sendall(encode_message(obj))

    def recv(self, timeout: float | None = None) -> dict:
        deadline = time.monotonic() + (timeout if timeout is not None else self.timeout)
        while True:
            while len(self.buffer) >= 4:
                (length,) = struct.unpack(">I", self.buffer[:4])
                if len(self.buffer) >= 4 + length:
                    payload = self.buffer[4:4 + length]
                    self.buffer = self.buffer[4 + length:]
                    return json.loads(payload.decode("utf-8"))
                break
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError("no message within timeout")
            self.sock.settimeout(remaining)
            chunk = self.sock.recv(1 << 20)
            if not chunk:
                raise ConnectionError("server closed the connection")
            self.buffer += chunk

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass
