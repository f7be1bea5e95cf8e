"""Test rig: a minimal gateway-side stub speaking the scorer wire.

The stub encodes and decodes frames with its own few lines of struct+json,
independent of the package under test, so a codec bug cannot cancel itself
out across both ends of the socket.
"""

from __future__ import annotations

import json
import socket
import struct
import threading

import pytest


def stub_encode(msg: dict) -> bytes:
    body = json.dumps(msg, separators=(",", ":"), sort_keys=True).encode("utf-8")
    return struct.pack(">I", len(body)) + body


def stub_recv_exact(sock: socket.socket, n: int, timeout: float) -> bytes:
    sock.settimeout(timeout)
    chunks = b""
    while len(chunks) < n:
        chunk = sock.recv(n - len(chunks))
        if not chunk:
            raise ConnectionError("peer closed")
        chunks += chunk
    return chunks


def stub_read(sock: socket.socket, timeout: float = 5.0) -> dict:
    (length,) = struct.unpack(">I", stub_recv_exact(sock, 4, timeout))
    return json.loads(stub_recv_exact(sock, length, timeout).decode("utf-8"))


class GatewayStub:
    """Accepts one scorer connection and hands the test raw frame control."""

    def __init__(self, hello_reply: dict | None = None) -> None:
        self.hello_reply = (
            {"v": 1, "type": "hello", "role": "gateway"} if hello_reply is None else hello_reply
        )
        self._server = socket.create_server(("127.0.0.1", 0))
        self._server.settimeout(5.0)
        self.port = self._server.getsockname()[1]
        self.peer: socket.socket | None = None
        self.peer_hello: dict | None = None
        self._ready = threading.Event()
        self._thread = threading.Thread(target=self._accept_one, daemon=True)
        self._thread.start()

    def _accept_one(self) -> None:
        try:
            sock, _ = self._server.accept()
        except OSError:
            return
        self.peer = sock
        try:
            self.peer_hello = stub_read(sock)
            sock.sendall(stub_encode(self.hello_reply))
        except (ConnectionError, OSError, json.JSONDecodeError):
            pass
        self._ready.set()

    def wait_peer(self, timeout: float = 5.0) -> dict:
        assert self._ready.wait(timeout), "no scorer dialed in"
        assert self.peer_hello is not None, "peer sent no hello"
        return self.peer_hello

    def send(self, msg: dict) -> None:
        assert self.peer is not None
        self.peer.sendall(stub_encode(msg))

    def send_raw(self, data: bytes) -> None:
        assert self.peer is not None
        self.peer.sendall(data)

    def read(self, timeout: float = 5.0) -> dict:
        assert self.peer is not None
        return stub_read(self.peer, timeout)

    def close_peer(self) -> None:
        if self.peer is not None:
            try:
                self.peer.close()
            except OSError:
                pass

    def close(self) -> None:
        self.close_peer()
        try:
            self._server.close()
        except OSError:
            pass


@pytest.fixture
def gateway_stub():
    stub = GatewayStub()
    yield stub
    stub.close()
