"""Command line front end: batch runs, comparisons, stitching, live serving."""

from __future__ import annotations

import argparse
import json
import sys
import threading
from dataclasses import replace
from pathlib import Path

from omninav.harness import (
    STRATEGIES,
    Scenario,
    ScenarioError,
    export_artifacts,
    load_scenario_world,
    run_comparison,
    run_scenario,
    summarize,
)
from omninav.panorama import GeometryError
from omninav.world import WorldError, load_world

EXIT_OK = 0
EXIT_SCENARIO = 2
EXIT_IO = 3


def _fail(message: str, code: int) -> int:
    print(f"omninav: {message}", file=sys.stderr)
    return code


def _print_summary(rows) -> None:
    header = f"{'scenario':<20} {'strategy':<8} {'trials':>6} {'mean_err':>9} {'var_err':>9}"
    print(header)
    print("-" * len(header))
    for row in rows:
        print(
            f"{row.scenario:<20} {row.strategy:<8} {row.trials:>6d}"
            f" {row.mean_error:>9.3f} {row.var_error:>9.4f}"
        )


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = Scenario.from_file(args.scenario)
    except ScenarioError as exc:
        return _fail(str(exc), EXIT_SCENARIO)
    overrides = {}
    if args.strategy is not None:
        overrides["strategy"] = args.strategy
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        try:
            scenario = replace(scenario, **overrides)
        except ValueError as exc:
            return _fail(str(exc), EXIT_SCENARIO)
    try:
        results = run_scenario(scenario)
    except ScenarioError as exc:
        return _fail(str(exc), EXIT_SCENARIO)
    for r in results:
        print(
            f"trial {r.trial_index}: error {r.final_error:.3f} m,"
            f" {r.termination} at {r.duration:.1f} s"
        )
    _print_summary(summarize(results))
    if args.out:
        try:
            written = export_artifacts(results, args.out, [scenario])
        except OSError as exc:
            return _fail(f"cannot write artifacts: {exc}", EXIT_IO)
        print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


def _load_suite(path: str) -> list[Scenario]:
    suite_path = Path(path)
    try:
        data = json.loads(suite_path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read suite {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    entries = data.get("scenarios") if isinstance(data, dict) else None
    if not isinstance(entries, list) or not entries:
        raise ScenarioError(f"{path}: suite needs a non-empty 'scenarios' list")
    scenarios = []
    for entry in entries:
        p = Path(entry)
        if not p.is_absolute():
            p = suite_path.parent / p
        scenarios.append(Scenario.from_file(p))
    return scenarios


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        scenarios = _load_suite(args.suite)
        rows, results = run_comparison(scenarios)
    except ScenarioError as exc:
        return _fail(str(exc), EXIT_SCENARIO)
    _print_summary(rows)
    if args.out:
        try:
            written = export_artifacts(results, args.out, scenarios)
        except OSError as exc:
            return _fail(f"cannot write artifacts: {exc}", EXIT_IO)
        print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


def cmd_stitch(args: argparse.Namespace) -> int:
    from omninav.imgio import load_control_points, load_image, save_image
    from omninav.stitch import FisheyePair, LensModel, StitchError, stitch_panorama

    try:
        front = load_image(args.front)
        rear = load_image(args.rear)
        cps = load_control_points(args.cps) if args.cps else None
    except OSError as exc:
        return _fail(f"cannot read input: {exc}", EXIT_IO)
    except (GeometryError, ValueError) as exc:
        return _fail(str(exc), EXIT_SCENARIO)
    try:
        lens = LensModel.for_image(front.shape[0], fov_deg=args.fov)
        pair = FisheyePair(front=front, rear=rear, lens=lens, vignette=(args.c2, args.c4))
        pano, align = stitch_panorama(pair, cps, width=args.width, height=args.height)
    except (GeometryError, StitchError, ValueError) as exc:
        return _fail(str(exc), EXIT_SCENARIO)
    try:
        save_image(args.out, pano.pixels)
    except OSError as exc:
        return _fail(f"cannot write {args.out}: {exc}", EXIT_IO)
    if align is not None:
        print(
            f"aligned: yaw {align.yaw:+.4f} rad, residual {align.residual_rms:.5f} rad"
            + (" (degenerate fit)" if align.degenerate else "")
        )
    print(f"wrote {args.out} ({pano.width}x{pano.height})")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from omninav.gateway import serve_world

    try:
        world = load_world(args.world)
    except OSError as exc:
        return _fail(f"cannot read world: {exc}", EXIT_IO)
    except WorldError as exc:
        return _fail(str(exc), EXIT_SCENARIO)
    broker, service = serve_world(
        world, session_port_no=args.port, scorer_port_no=args.scorer_port
    )
    print(f"session endpoint ws://{service.host}:{service.port}", flush=True)
    print(f"scorer endpoint tcp://{broker.host}:{broker.port}", flush=True)
    stop = threading.Event()
    try:
        service.serve(stop)
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        service.close()
        broker.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omninav", description="Reflex navigation runs, comparisons, and tools."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario's trials")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--strategy", choices=STRATEGIES, help="override the scenario strategy")
    p.add_argument("--trials", type=int, help="override the trial count")
    p.add_argument("--seed", type=int, help="override the jitter seed")
    p.add_argument("--out", help="directory for trajectory CSVs and plots")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run a suite across all strategies")
    p.add_argument("--suite", required=True, help="suite JSON: {\"scenarios\": [paths]}")
    p.add_argument("--out", help="directory for trajectory CSVs and plots")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stitch", help="merge a fisheye pair into a panorama")
    p.add_argument("--front", required=True, help="front fisheye PNG")
    p.add_argument("--rear", required=True, help="rear fisheye PNG")
    p.add_argument("--cps", help="control points file (fx fy rx ry per line)")
    p.add_argument("--out", required=True, help="output panorama PNG")
    p.add_argument("--width", type=int, default=2000)
    p.add_argument("--height", type=int, default=1000)
    p.add_argument("--fov", type=float, default=200.0, help="lens field of view, degrees")
    p.add_argument("--c2", type=float, default=0.0, help="vignette r^2 coefficient")
    p.add_argument("--c4", type=float, default=0.0, help="vignette r^4 coefficient")
    p.set_defaults(func=cmd_stitch)

    p = sub.add_parser("serve", help="serve a live session on a world")
    p.add_argument("--world", required=True, help="world JSON file")
    p.add_argument("--port", type=int, help="session WebSocket port")
    p.add_argument("--scorer-port", type=int, help="scorer TCP port")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
