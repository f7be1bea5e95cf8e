"""Dialing the gateway and answering its score requests.

The gateway is the TCP server and the requester; this side connects,
introduces itself with a hello naming its scorer role, then serves one
request at a time on that connection (the wire never pipelines). Requests
that cannot be answered — an undecodable slice, a malformed payload — draw
an error frame but keep the connection alive; the gateway's own timeout
and fallback absorb the gap.
"""

from __future__ import annotations

import logging
import socket
import threading
import time

from vlmbridge.pipeline import ScoreError
from vlmbridge.wire import (
    PROTOCOL_VERSION,
    ConnectionClosed,
    FrameError,
    FrameReader,
    send_frame,
)

log = logging.getLogger("vlmbridge")

_POLL_S = 0.25
_HELLO_TIMEOUT_S = 5.0


class HandshakeError(RuntimeError):
    """The gateway rejected or garbled the hello exchange."""


class BridgeConnection:
    """One scorer role on one TCP connection."""

    def __init__(self, host: str, port: int, scorer_id: str, scorer) -> None:
        self.host = host
        self.port = port
        self.scorer_id = scorer_id
        self.scorer = scorer
        self._sock: socket.socket | None = None
        self._reader: FrameReader | None = None
        self.requests_served = 0

    def connect(self, timeout: float = _HELLO_TIMEOUT_S) -> None:
        """Dial in and complete the hello exchange, or raise HandshakeError."""
        sock = socket.create_connection((self.host, self.port), timeout=timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        reader = FrameReader(sock)
        try:
            send_frame(
                sock,
                {
                    "v": PROTOCOL_VERSION,
                    "type": "hello",
                    "role": "scorer",
                    "scorer_id": self.scorer_id,
                },
            )
            reply = reader.poll(timeout)
        except (ConnectionClosed, FrameError, OSError) as exc:
            sock.close()
            raise HandshakeError(f"hello exchange failed: {exc}") from exc
        if reply is None:
            sock.close()
            raise HandshakeError("gateway sent no hello reply in time")
        if reply.get("type") == "error":
            sock.close()
            raise HandshakeError(f"gateway rejected hello: {reply.get('message')}")
        if reply.get("type") != "hello" or reply.get("role") != "gateway":
            sock.close()
            raise HandshakeError(f"unexpected hello reply: {reply!r}")
        if reply.get("v") != PROTOCOL_VERSION:
            sock.close()
            raise HandshakeError(f"unsupported gateway protocol version {reply.get('v')!r}")
        self._sock = sock
        self._reader = reader
        log.info("%s: connected to %s:%d", self.scorer_id, self.host, self.port)

    def serve(self, stop: threading.Event | None = None) -> None:
        """Answer requests until the gateway hangs up or ``stop`` is set."""
        assert self._sock is not None and self._reader is not None, "connect() first"
        try:
            while stop is None or not stop.is_set():
                try:
                    msg = self._reader.poll(_POLL_S)
                except ConnectionClosed as exc:
                    log.info("%s: connection closed (%s)", self.scorer_id, exc)
                    return
                if msg is None:
                    continue
                kind = msg.get("type")
                if kind == "score_req":
                    self._answer(msg)
                elif kind == "error":
                    log.warning("%s: gateway error: %s", self.scorer_id, msg.get("message"))
                else:
                    log.debug("%s: skipping frame type %r", self.scorer_id, kind)
        finally:
            self.close()

    def _answer(self, req: dict) -> None:
        assert self._sock is not None
        started = time.perf_counter()
        try:
            scores = [float(s) for s in self.scorer.score(req)]
        except ScoreError as exc:
            log.warning("%s: request %r failed: %s", self.scorer_id, req.get("id"), exc)
            send_frame(
                self._sock,
                {"v": PROTOCOL_VERSION, "type": "error", "message": str(exc)},
            )
            return
        send_frame(
            self._sock,
            {
                "v": PROTOCOL_VERSION,
                "type": "score_resp",
                "id": req.get("id"),
                "scorer_id": self.scorer_id,
                "scores": scores,
                "latency_ms": int(round((time.perf_counter() - started) * 1000.0)),
            },
        )
        self.requests_served += 1

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None
            self._reader = None


def serve_role(
    host: str,
    port: int,
    scorer_id: str,
    scorer,
    stop: threading.Event,
    retry_s: float = 1.0,
    once: bool = False,
) -> None:
    """Keep one role attached: connect, serve, and redial after drops."""
    while not stop.is_set():
        conn = BridgeConnection(host, port, scorer_id, scorer)
        try:
            conn.connect()
        except (HandshakeError, OSError) as exc:
            log.warning("%s: connect failed: %s", scorer_id, exc)
            if once:
                return
            if stop.wait(retry_s):
                return
            continue
        conn.serve(stop)
        if once:
            return
        if stop.wait(retry_s):
            return
