"""Command line entry: attach scorer roles to a running gateway.

    vlmbridge --host 127.0.0.1 --port 7471 --roles clip,detic

Model selection (names, weight paths, detection confidence threshold) comes
from a JSON config file; --backend and --device override it. The default
deterministic hash backend needs no weights, so the bridge works against a
synthetic session out of the box.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import threading

from vlmbridge.backends import BackendLoadError, load_backend
from vlmbridge.pipeline import make_scorer
from vlmbridge.service import serve_role

DEFAULT_PORT = 7471


def _default_port() -> int:
    return int(os.environ.get("OMNINAV_SCORER_PORT", DEFAULT_PORT))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlmbridge",
        description="Serve vision-language scorers to a navigation gateway over TCP.",
    )
    parser.add_argument("--host", default="127.0.0.1", help="gateway host")
    parser.add_argument(
        "--port",
        type=int,
        default=None,
        help=f"gateway scorer port (default: $OMNINAV_SCORER_PORT or {DEFAULT_PORT})",
    )
    parser.add_argument(
        "--roles",
        default="clip,detic",
        help="comma-separated scorer roles to serve (default: clip,detic)",
    )
    parser.add_argument("--config", help="JSON config file: backend, model paths, threshold")
    parser.add_argument("--backend", help="backend name override (default from config, else 'hash')")
    parser.add_argument("--device", help="compute device for model backends, e.g. cpu or cuda:0")
    parser.add_argument(
        "--threshold",
        type=float,
        default=None,
        help="detection confidence threshold override (default from config, else 0.5)",
    )
    parser.add_argument(
        "--once",
        action="store_true",
        help="serve until the first disconnect instead of redialing forever",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    config: dict = {}
    if args.config:
        try:
            config = json.loads(open(args.config).read())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read config {args.config}: {exc}", file=sys.stderr, flush=True)
            return 2
        if not isinstance(config, dict):
            print(f"config {args.config} must hold a JSON object", file=sys.stderr, flush=True)
            return 2

    device = args.device or config.get("device")
    try:
        backend = load_backend(args.backend, config, device)
    except BackendLoadError as exc:
        print(f"refusing to dial in: {exc}", file=sys.stderr, flush=True)
        return 2

    threshold = args.threshold
    if threshold is None:
        threshold = float(config.get("confidence_threshold", 0.5))

    roles = [r.strip() for r in args.roles.split(",") if r.strip()]
    if not roles:
        print("no roles to serve", file=sys.stderr, flush=True)
        return 2
    try:
        scorers = {role: make_scorer(role, backend, threshold) for role in roles}
    except ValueError as exc:
        print(str(exc), file=sys.stderr, flush=True)
        return 2

    port = args.port if args.port is not None else _default_port()
    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())

    threads = [
        threading.Thread(
            target=serve_role,
            args=(args.host, port, role, scorer, stop),
            kwargs={"once": args.once},
            name=f"serve-{role}",
            daemon=True,
        )
        for role, scorer in scorers.items()
    ]
    for thread in threads:
        thread.start()
    try:
        while any(t.is_alive() for t in threads):
            for t in threads:
                t.join(timeout=0.2)
    except KeyboardInterrupt:
        stop.set()
    stop.set()
    for t in threads:
        t.join(timeout=2.0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
