"""End-to-end conformance against a real gateway process.

Starts the navigation service as a subprocess, attaches both bridge roles
over the scorer wire, and watches the session endpoint: once the bridge is
connected, per-role staleness must clear — the profiles now come from this
process, not the gateway's local fallbacks — and the score arrays must
keep their contracted shape.
"""

from __future__ import annotations

import re
import subprocess
import sys
import threading
import time
from pathlib import Path

import pytest

from wsrig import WsObserver

from vlmbridge.backends import HashBackend
from vlmbridge.pipeline import make_scorer
from vlmbridge.service import serve_role

REPO = Path(__file__).resolve().parents[2]
WORLD = REPO / "src" / "omninav" / "worlds" / "basic.world"


@pytest.fixture(scope="module")
def live_gateway():
    proc = subprocess.Popen(
        [sys.executable, "-m", "omninav", "serve", "--world", str(WORLD),
         "--port", "0", "--scorer-port", "0"],
        cwd=REPO,
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    ports = {}
    deadline = time.monotonic() + 10.0
    try:
        while len(ports) < 2 and time.monotonic() < deadline:
            line = proc.stdout.readline()
            if not line:
                break
            m = re.search(r"session endpoint ws://[\d.]+:(\d+)", line)
            if m:
                ports["session"] = int(m.group(1))
            m = re.search(r"scorer endpoint tcp://[\d.]+:(\d+)", line)
            if m:
                ports["scorer"] = int(m.group(1))
        assert len(ports) == 2, f"gateway did not announce endpoints (exit {proc.poll()})"
        yield ports
    finally:
        proc.terminate()
        try:
            proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait(timeout=5.0)


@pytest.fixture(scope="module")
def attached_bridge(live_gateway):
    stop = threading.Event()
    threads = []
    for role in ("clip", "detic"):
        scorer = make_scorer(role, HashBackend())
        thread = threading.Thread(
            target=serve_role,
            args=("127.0.0.1", live_gateway["scorer"], role, scorer, stop),
            daemon=True,
        )
        thread.start()
        threads.append(thread)
    yield live_gateway
    stop.set()
    for thread in threads:
        thread.join(timeout=3.0)


def _snapshots_until(observer, predicate, limit=80, timeout=15.0):
    deadline = time.monotonic() + timeout
    for _ in range(limit):
        msg = observer.recv_json(timeout=max(0.1, deadline - time.monotonic()))
        if msg.get("type") != "snapshot":
            continue
        if predicate(msg):
            return msg
    raise AssertionError("no snapshot matched the predicate")


def test_remote_scorers_clear_staleness_and_keep_shape(attached_bridge):
    observer = WsObserver("127.0.0.1", attached_bridge["session"])
    try:
        hello = observer.recv_json()
        assert hello["type"] == "hello"
        n_split = hello["n_split"]

        observer.send_json(
            {"v": 1, "type": "command", "id": 1, "kind": "set_instruction",
             "text": "go to the kitchen"}
        )
        snap = _snapshots_until(
            observer, lambda s: s.get("instruction") == "go to the kitchen"
        )
        assert set(snap["a"].keys()) == {"clip", "detic"}

        fresh = _snapshots_until(
            observer,
            lambda s: s.get("stale") == {"clip": False, "detic": False},
        )
        for role in ("clip", "detic"):
            profile = fresh["a"][role]
            assert len(profile) == n_split
            assert all(0.1 <= v <= 1.0 for v in profile)
        assert len(fresh["e"]) == n_split
        assert fresh["instruction"] == "go to the kitchen"
    finally:
        observer.close()


def test_staleness_stays_clear_across_consecutive_ticks(attached_bridge):
    observer = WsObserver("127.0.0.1", attached_bridge["session"])
    try:
        hello = observer.recv_json()
        assert hello["type"] == "hello"
        observer.send_json(
            {"v": 1, "type": "command", "id": 5, "kind": "set_instruction",
             "text": "go to the bookshelf"}
        )
        _snapshots_until(observer, lambda s: s.get("stale") == {"clip": False, "detic": False})
        fresh_run = 0
        for _ in range(10):
            snap = observer.recv_json()
            if snap.get("type") != "snapshot":
                continue
            if snap["stale"] == {"clip": False, "detic": False}:
                fresh_run += 1
        assert fresh_run >= 8, f"staleness flapped: only {fresh_run}/10 fresh"
    finally:
        observer.close()


def test_instruction_steers_toward_a_target_behind_the_robot(attached_bridge):
    # The default start pose faces away from the kitchen in this world, so a
    # kitchen instruction must swing the commanded heading far off zero.
    observer = WsObserver("127.0.0.1", attached_bridge["session"])
    try:
        hello = observer.recv_json()
        assert hello["type"] == "hello"
        observer.send_json({"v": 1, "type": "command", "id": 2, "kind": "reset"})
        settled = _snapshots_until(
            observer, lambda s: s.get("instruction") is None and s["t"] <= 0.3
        )
        assert settled["theta"] == 0.0
        observer.send_json(
            {"v": 1, "type": "command", "id": 3, "kind": "set_instruction",
             "text": "go to the kitchen"}
        )
        _snapshots_until(observer, lambda s: s.get("instruction") == "go to the kitchen")
        steered = _snapshots_until(observer, lambda s: abs(s["theta"]) > 1.0, limit=40)
        assert abs(steered["theta"]) > 1.0
    finally:
        observer.close()
