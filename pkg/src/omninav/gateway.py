"""Network boundary: a scorer broker over TCP frames and a live session endpoint.

Scorers speak length-prefixed JSON (4-byte big-endian length, UTF-8 body) over
TCP; the session side speaks the same JSON messages over WebSocket so a
browser can connect directly. The control loop stays the single owner of
simulation state: commands queue up and drain once per tick boundary, and
snapshots fan out through per-observer queues that drop rather than block.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import queue
import socket
import struct
import threading
import time

import numpy as np

from omninav.episode import Simulation
from omninav.oracles import VisibilitySummary
from omninav.panorama import SliceSet
from omninav.scoring import Scorer, ScorerError, ScorerOutput
from omninav.world import world_to_dict

PROTOCOL_VERSION = 1
SCORER_PORT = 7471
SESSION_PORT = 7472
SCORE_TIMEOUT_S = 0.1

_MAX_FRAME = 16 * 1024 * 1024
_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class ProtocolError(RuntimeError):
    """Malformed or out-of-contract traffic on either endpoint."""


def scorer_port() -> int:
    return int(os.environ.get("OMNINAV_SCORER_PORT", SCORER_PORT))


def session_port() -> int:
    return int(os.environ.get("OMNINAV_SESSION_PORT", SESSION_PORT))


# ---------------------------------------------------------------------------
# length-prefixed JSON frames (scorer wire)


def dump_message(msg: dict) -> str:
    """Canonical JSON encoding: compact separators, sorted keys."""
    return json.dumps(msg, separators=(",", ":"), sort_keys=True)


def encode_frame(msg: dict) -> bytes:
    body = dump_message(msg).encode("utf-8")
    return struct.pack(">I", len(body)) + body


def decode_body(data: bytes) -> dict:
    try:
        msg = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"bad frame body: {exc}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("frame body must be a JSON object")
    return msg


def _recv_exact(sock: socket.socket, n: int, deadline: float | None) -> bytes | None:
    """Read exactly n bytes; None on clean EOF at a frame boundary."""
    chunks = []
    got = 0
    while got < n:
        if deadline is not None:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError("frame read deadline passed")
            sock.settimeout(remaining)
        try:
            chunk = sock.recv(n - got)
        except socket.timeout as exc:
            raise TimeoutError("frame read deadline passed") from exc
        if not chunk:
            if got == 0:
                return None
            raise ProtocolError("truncated frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket, deadline: float | None = None) -> dict | None:
    """Read one frame; None on clean EOF before a new frame starts."""
    header = _recv_exact(sock, 4, deadline)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > _MAX_FRAME:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    body = _recv_exact(sock, length, deadline)
    if body is None:
        raise ProtocolError("truncated frame")
    return decode_body(body)


def send_frame(sock: socket.socket, msg: dict) -> None:
    sock.sendall(encode_frame(msg))


def _send_error(sock: socket.socket, message: str) -> None:
    try:
        send_frame(sock, {"v": PROTOCOL_VERSION, "type": "error", "message": message})
    except OSError:
        pass


# ---------------------------------------------------------------------------
# score request payloads


def _png_b64(img: np.ndarray) -> str:
    from PIL import Image

    arr = np.clip(np.asarray(img, dtype=np.float32) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def payload_from_context(context, slices: SliceSet) -> dict:
    """Wire payload for whatever the deployment observes.

    A VisibilitySummary becomes kind "visibility"; an image band becomes kind
    "pixels" with one PNG per slice plus the full band and the slice column
    spans, so detector-style scorers can detect once over the whole image.
    """
    if isinstance(context, VisibilitySummary):
        return {"kind": "visibility", "slices": context.to_dict()["slices"]}
    if isinstance(context, np.ndarray):
        crops = []
        for sl in slices.slices:
            parts = [context[:, s:e] for s, e in sl.spans]
            crops.append(_png_b64(np.concatenate(parts, axis=1)))
        return {
            "kind": "pixels",
            "slices": crops,
            "expanded": _png_b64(context),
            "spans": [[list(span) for span in sl.spans] for sl in slices.slices],
        }
    raise ScorerError(f"no wire payload for context type {type(context).__name__}")


# ---------------------------------------------------------------------------
# scorer broker


class _ScorerConn:
    def __init__(self, sock: socket.socket, scorer_id: str) -> None:
        self.sock = sock
        self.scorer_id = scorer_id
        self.lock = threading.Lock()
        self._next_id = 0

    def take_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def request(self, req_id: int, req: dict, deadline: float) -> dict:
        """Send one request and wait for its matching response.

        Replies to earlier, timed-out requests may still sit in the buffer;
        they are drained and discarded by the id match.
        """
        with self.lock:
            send_frame(self.sock, req)
            while True:
                msg = read_frame(self.sock, deadline)
                if msg is None:
                    raise ProtocolError("scorer closed connection")
                kind = msg.get("type")
                if kind == "error":
                    raise ProtocolError(str(msg.get("message", "scorer error")))
                if kind != "score_resp" or msg.get("id") != req_id:
                    continue
                return msg

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class ScorerBroker:
    """Accepts scorer connections and routes score requests by scorer id.

    Per-request timeout defaults to 100 ms; callers wrap scorers via
    ``scorer()`` so a timeout or dead peer falls back to a local oracle with
    the profile flagged stale.
    """

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int | None = None,
        timeout_s: float = SCORE_TIMEOUT_S,
    ) -> None:
        self.host = host
        self.timeout_s = timeout_s
        self._server = socket.create_server((host, scorer_port() if port is None else port))
        self.port = self._server.getsockname()[1]
        self._server.settimeout(0.2)
        self._conns: dict[str, _ScorerConn] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    @property
    def connected_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._conns)

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            threading.Thread(target=self._handshake, args=(sock,), daemon=True).start()

    def _handshake(self, sock: socket.socket) -> None:
        try:
            hello = read_frame(sock, deadline=time.monotonic() + 2.0)
        except (ProtocolError, TimeoutError, OSError) as exc:
            _send_error(sock, f"bad hello: {exc}")
            sock.close()
            return
        if hello is None:
            sock.close()
            return
        if hello.get("type") != "hello" or hello.get("role") != "scorer":
            _send_error(sock, "expected a scorer hello")
            sock.close()
            return
        if hello.get("v") != PROTOCOL_VERSION:
            _send_error(sock, f"unsupported protocol version {hello.get('v')!r}")
            sock.close()
            return
        scorer_id = hello.get("scorer_id")
        if not isinstance(scorer_id, str) or not scorer_id:
            _send_error(sock, "hello missing scorer_id")
            sock.close()
            return
        try:
            send_frame(sock, {"v": PROTOCOL_VERSION, "type": "hello", "role": "gateway"})
        except OSError:
            sock.close()
            return
        sock.settimeout(None)
        conn = _ScorerConn(sock, scorer_id)
        with self._lock:
            old = self._conns.get(scorer_id)
            self._conns[scorer_id] = conn  # reconnect replaces the old peer
        if old is not None:
            old.close()

    def _drop(self, conn: _ScorerConn, reason: str) -> None:
        with self._lock:
            if self._conns.get(conn.scorer_id) is conn:
                del self._conns[conn.scorer_id]
        _send_error(conn.sock, reason)
        conn.close()

    def request_scores(self, scorer_id: str, instruction: str, slices: SliceSet, context) -> list[float]:
        with self._lock:
            conn = self._conns.get(scorer_id)
        if conn is None:
            raise ScorerError(f"no scorer {scorer_id!r} connected")
        req_id = conn.take_id()
        req = {
            "v": PROTOCOL_VERSION,
            "type": "score_req",
            "id": req_id,
            "instruction": instruction,
            "n_split": slices.n_split,
            "payload": payload_from_context(context, slices),
        }
        try:
            resp = conn.request(req_id, req, deadline=time.monotonic() + self.timeout_s)
        except TimeoutError as exc:
            raise ScorerError(f"scorer {scorer_id!r} timed out") from exc
        except (ProtocolError, OSError) as exc:
            self._drop(conn, str(exc))
            raise ScorerError(f"scorer {scorer_id!r} failed: {exc}") from exc
        scores = resp.get("scores")
        if not isinstance(scores, list) or len(scores) != slices.n_split:
            self._drop(conn, f"expected {slices.n_split} scores")
            raise ScorerError(f"scorer {scorer_id!r} returned a bad score vector")
        try:
            return [float(s) for s in scores]
        except (TypeError, ValueError) as exc:
            self._drop(conn, "non-numeric score")
            raise ScorerError(f"scorer {scorer_id!r} returned non-numeric scores") from exc

    def scorer(self, scorer_id: str, fallback: Scorer | None = None) -> "RemoteScorer":
        return RemoteScorer(scorer_id, self, fallback)

    def close(self) -> None:
        self._stop.set()
        try:
            self._server.close()
        except OSError:
            pass
        with self._lock:
            conns = list(self._conns.values())
            self._conns.clear()
        for conn in conns:
            conn.close()
        self._thread.join(timeout=1.0)


class RemoteScorer:
    """Scorer facade over the broker with a local oracle as safety net.

    A timeout or dead peer never stalls the control tick: the fallback
    answers and the result is flagged stale so observers can see the
    degradation. With no fallback the failure propagates as ScorerError.
    """

    def __init__(self, scorer_id: str, broker: ScorerBroker, fallback: Scorer | None = None) -> None:
        self.scorer_id = scorer_id
        self.broker = broker
        self.fallback = fallback

    def raw_scores(self, instruction: str, slices: SliceSet, context):
        try:
            return self.broker.request_scores(self.scorer_id, instruction, slices, context)
        except ScorerError:
            if self.fallback is None:
                raise
            out = self.fallback.raw_scores(instruction, slices, context)
            scores = out.scores if isinstance(out, ScorerOutput) else out
            return ScorerOutput(scores, stale=True)


# ---------------------------------------------------------------------------
# WebSocket plumbing (RFC 6455, server side, text frames only)


def _ws_accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def _ws_handshake(sock: socket.socket) -> bool:
    sock.settimeout(2.0)
    data = b""
    try:
        while b"\r\n\r\n" not in data:
            chunk = sock.recv(4096)
            if not chunk or len(data) > 16384:
                return False
            data += chunk
    except (socket.timeout, OSError):
        return False
    key = None
    for line in data.split(b"\r\n")[1:]:
        if b":" not in line:
            continue
        name, _, value = line.partition(b":")
        if name.strip().lower() == b"sec-websocket-key":
            key = value.strip().decode("ascii")
    if key is None:
        try:
            sock.sendall(b"HTTP/1.1 400 Bad Request\r\nConnection: close\r\n\r\n")
        except OSError:
            pass
        return False
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {_ws_accept_key(key)}\r\n\r\n"
    )
    try:
        sock.sendall(response.encode("ascii"))
    except OSError:
        return False
    sock.settimeout(None)
    return True


def ws_send_text(sock: socket.socket, text: str) -> None:
    payload = text.encode("utf-8")
    n = len(payload)
    if n < 126:
        header = struct.pack(">BB", 0x81, n)
    elif n < 1 << 16:
        header = struct.pack(">BBH", 0x81, 126, n)
    else:
        header = struct.pack(">BBQ", 0x81, 127, n)
    sock.sendall(header + payload)


def _ws_read_frame(sock: socket.socket, deadline: float | None) -> tuple[int, bytes] | None:
    head = _recv_exact(sock, 2, deadline)
    if head is None:
        return None
    b0, b1 = head
    if not b0 & 0x80:
        raise ProtocolError("fragmented websocket frames not supported")
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    length = b1 & 0x7F
    if length == 126:
        (length,) = struct.unpack(">H", _recv_exact(sock, 2, deadline))
    elif length == 127:
        (length,) = struct.unpack(">Q", _recv_exact(sock, 8, deadline))
    if length > _MAX_FRAME:
        raise ProtocolError(f"websocket frame of {length} bytes exceeds limit")
    mask = _recv_exact(sock, 4, deadline) if masked else b"\x00" * 4
    payload = _recv_exact(sock, length, deadline) if length else b""
    if payload is None or (masked and mask is None):
        raise ProtocolError("truncated websocket frame")
    if masked:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, payload


def ws_recv_text(sock: socket.socket, deadline: float | None = None) -> str | None:
    """Next text message; None once the peer closes. Ping is answered inline."""
    while True:
        frame = _ws_read_frame(sock, deadline)
        if frame is None:
            return None
        opcode, payload = frame
        if opcode == 0x1:
            return payload.decode("utf-8")
        if opcode == 0x8:  # close
            try:
                sock.sendall(struct.pack(">BB", 0x88, 0))
            except OSError:
                pass
            return None
        if opcode == 0x9:  # ping -> pong
            sock.sendall(struct.pack(">BB", 0x8A, len(payload)) + payload)
            continue
        # pong / binary: nothing to do


# ---------------------------------------------------------------------------
# session service


class _Observer:
    """One connected console: a bounded outbox and a sender thread.

    A slow reader fills its own queue and loses frames; the control loop
    never waits on a socket.
    """

    def __init__(self, sock: socket.socket) -> None:
        self.sock = sock
        self.outbox: queue.Queue[str | None] = queue.Queue(maxsize=16)
        self.alive = True
        self.dropped = 0
        self._sender = threading.Thread(target=self._send_loop, daemon=True)
        self._sender.start()

    def _send_loop(self) -> None:
        while True:
            text = self.outbox.get()
            if text is None:
                break
            try:
                ws_send_text(self.sock, text)
            except OSError:
                break
        self.alive = False
        try:
            self.sock.close()
        except OSError:
            pass

    def offer(self, text: str) -> None:
        try:
            self.outbox.put_nowait(text)
        except queue.Full:
            self.dropped += 1

    def close(self) -> None:
        self.alive = False
        try:
            self.outbox.put_nowait(None)
        except queue.Full:
            try:
                self.sock.close()
            except OSError:
                pass


class SessionService:
    """Live observation and control of one Simulation over WebSocket.

    The caller owns the loop: ``tick_once`` drains queued commands, advances
    the simulation one period, and broadcasts the snapshot. ``serve`` wraps
    that in wall-clock pacing at the configured tick.
    """

    def __init__(self, sim: Simulation, host: str = "127.0.0.1", port: int | None = None) -> None:
        self.sim = sim
        self.host = host
        self._server = socket.create_server((host, session_port() if port is None else port))
        self.port = self._server.getsockname()[1]
        self._server.settimeout(0.2)
        self._observers: list[_Observer] = []
        self._lock = threading.Lock()
        self._commands: queue.Queue[tuple[_Observer, dict]] = queue.Queue()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    # -- connection plumbing ------------------------------------------------

    @property
    def observer_count(self) -> int:
        with self._lock:
            return sum(1 for o in self._observers if o.alive)

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            threading.Thread(target=self._attach, args=(sock,), daemon=True).start()

    def _attach(self, sock: socket.socket) -> None:
        if not _ws_handshake(sock):
            sock.close()
            return
        observer = _Observer(sock)
        hello = {
            "v": PROTOCOL_VERSION,
            "type": "hello",
            "role": "session",
            "world": world_to_dict(self.sim.world),
            "origin": [round(v, 6) for v in self.sim.origin],
            "n_split": self.sim.config.n_split,
            "tick_s": self.sim.config.tick_s,
            "strategy": self.sim.strategy,
        }
        observer.offer(dump_message(hello))
        with self._lock:
            self._observers.append(observer)
        self._read_loop(observer)

    def _read_loop(self, observer: _Observer) -> None:
        sock = observer.sock
        while observer.alive and not self._stop.is_set():
            try:
                text = ws_recv_text(sock)
            except (ProtocolError, OSError):
                break
            if text is None:
                break
            try:
                msg = json.loads(text)
                if not isinstance(msg, dict):
                    raise ValueError("not an object")
            except ValueError as exc:
                observer.offer(
                    dump_message(
                        {"v": PROTOCOL_VERSION, "type": "error", "message": f"bad message: {exc}"}
                    )
                )
                break
            if msg.get("type") != "command":
                observer.offer(
                    dump_message(
                        {
                            "v": PROTOCOL_VERSION,
                            "type": "error",
                            "message": f"unexpected message type {msg.get('type')!r}",
                        }
                    )
                )
                continue
            self._commands.put((observer, msg))
        observer.close()
        with self._lock:
            if observer in self._observers:
                self._observers.remove(observer)

    # -- tick boundary ------------------------------------------------------

    def drain_commands(self) -> int:
        """Apply queued commands in arrival order; last writer wins. Each
        command is acknowledged exactly once to its sender."""
        applied = 0
        while True:
            try:
                observer, msg = self._commands.get_nowait()
            except queue.Empty:
                return applied
            ack = {"v": PROTOCOL_VERSION, "type": "ack", "id": msg.get("id"), "ok": True}
            try:
                self._apply(msg)
            except (ValueError, KeyError) as exc:
                ack["ok"] = False
                ack["message"] = str(exc)
            observer.offer(dump_message(ack))
            applied += 1

    def _apply(self, msg: dict) -> None:
        kind = msg.get("kind")
        if kind == "set_instruction":
            text = msg.get("text")
            if not isinstance(text, str) or not text.strip():
                raise ValueError("set_instruction needs non-empty text")
            self.sim.set_instruction(text)
        elif kind == "pause":
            self.sim.paused = True
        elif kind == "resume":
            self.sim.paused = False
        elif kind == "reset":
            self.sim.reset()
        elif kind == "set_strategy":
            self.sim.set_strategy(str(msg.get("strategy")))
        else:
            raise ValueError(f"unknown command kind {kind!r}")

    def broadcast(self) -> None:
        text = dump_message(self.sim.snapshot())
        with self._lock:
            observers = list(self._observers)
        for observer in observers:
            observer.offer(text)

    def tick_once(self) -> None:
        self.drain_commands()
        self.sim.tick()
        self.broadcast()

    def serve(self, stop: threading.Event | None = None) -> None:
        """Realtime loop: one tick + broadcast per control period."""
        period = self.sim.config.tick_s
        next_at = time.monotonic()
        while not self._stop.is_set() and not (stop is not None and stop.is_set()):
            self.tick_once()
            next_at += period
            delay = next_at - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            else:
                next_at = time.monotonic()  # fell behind; do not burst

    def close(self) -> None:
        self._stop.set()
        try:
            self._server.close()
        except OSError:
            pass
        with self._lock:
            observers = list(self._observers)
            self._observers.clear()
        for observer in observers:
            observer.close()
        self._thread.join(timeout=1.0)


def serve_world(
    world,
    origin: tuple[float, float, float] | None = None,
    session_port_no: int | None = None,
    scorer_port_no: int | None = None,
    config=None,
    max_time: float = float("inf"),
) -> tuple[ScorerBroker, SessionService]:
    """Wire a simulation to both endpoints; external scorers may attach anytime."""
    from omninav.oracles import default_scorers

    broker = ScorerBroker(port=scorer_port_no)
    oracles = default_scorers(world)
    scorers = {role: broker.scorer(role, fallback=oracle) for role, oracle in oracles.items()}
    if origin is None:
        cx, cy = world.center()
        origin = (cx, cy, 0.0)
    sim = Simulation(world, config, origin=origin, scorers=scorers, max_time=max_time)
    service = SessionService(sim, port=session_port_no)
    return broker, service
