"""Length-prefixed JSON frames, as spoken on the gateway's scorer endpoint.

Each frame is a 4-byte big-endian unsigned length followed by that many
bytes of a JSON object, at most 16 MiB. Outgoing frames use canonical JSON
(UTF-8, compact separators, sorted keys) so they are byte-identical to the
published wire examples. This module is self-contained on purpose: the
bridge must interoperate with the gateway purely through the wire, not by
sharing code with it.
"""

from __future__ import annotations

import json
import socket
import struct

PROTOCOL_VERSION = 1
MAX_FRAME = 16 * 1024 * 1024
_RECV_CHUNK = 65536


class FrameError(RuntimeError):
    """A frame that violates the wire contract (size, encoding, shape)."""


class ConnectionClosed(RuntimeError):
    """Peer went away; ``clean`` tells a frame boundary from a mid-frame cut."""

    def __init__(self, message: str, clean: bool) -> None:
        super().__init__(message)
        self.clean = clean


def dump_canonical(msg: dict) -> bytes:
    """Canonical JSON body: compact separators, lexicographically sorted keys."""
    return json.dumps(msg, separators=(",", ":"), sort_keys=True).encode("utf-8")


def encode_frame(msg: dict) -> bytes:
    body = dump_canonical(msg)
    if len(body) > MAX_FRAME:
        raise FrameError(f"frame body of {len(body)} bytes exceeds the {MAX_FRAME} limit")
    return struct.pack(">I", len(body)) + body


def decode_body(data: bytes) -> dict:
    try:
        msg = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FrameError(f"bad frame body: {exc}") from exc
    if not isinstance(msg, dict):
        raise FrameError("frame body must be a JSON object")
    return msg


def send_frame(sock: socket.socket, msg: dict) -> None:
    sock.sendall(encode_frame(msg))


class FrameReader:
    """Incremental frame parser over a socket.

    Bytes accumulate in an internal buffer, so a poll that times out between
    chunks never loses a partially received frame. ``poll`` returns one
    decoded message, or None when the timeout passes with no complete frame.
    """

    def __init__(self, sock: socket.socket) -> None:
        self._sock = sock
        self._buf = bytearray()

    def _parse_buffered(self) -> dict | None:
        if len(self._buf) < 4:
            return None
        (length,) = struct.unpack(">I", self._buf[:4])
        if length > MAX_FRAME:
            raise FrameError(f"frame of {length} bytes exceeds the {MAX_FRAME} limit")
        if len(self._buf) < 4 + length:
            return None
        body = bytes(self._buf[4 : 4 + length])
        del self._buf[: 4 + length]
        return decode_body(body)

    def poll(self, timeout: float | None) -> dict | None:
        while True:
            msg = self._parse_buffered()
            if msg is not None:
                return msg
            self._sock.settimeout(timeout)
            try:
                chunk = self._sock.recv(_RECV_CHUNK)
            except socket.timeout:
                return None
            except OSError as exc:
                raise ConnectionClosed(f"socket error: {exc}", clean=not self._buf) from exc
            if not chunk:
                raise ConnectionClosed(
                    "peer closed" if not self._buf else "peer closed mid-frame",
                    clean=not self._buf,
                )
            self._buf += chunk


def read_frame(sock: socket.socket, timeout: float | None = None) -> dict:
    """One-shot read for tests; raises on timeout or close.

    This discards anything buffered past the first frame, so long-lived
    connections must read through a single FrameReader instead.
    """
    msg = FrameReader(sock).poll(timeout)
    if msg is None:
        raise TimeoutError("no frame within the timeout")
    return msg
