"""Batch experiment runner: scenario files, seeded trials, strategy comparison.

A Scenario pins everything one trial needs (world, origin, target, schedule,
strategy, seed); trial-to-trial variation comes only from seeded origin jitter,
so every artifact is reproducible byte-for-byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from omninav.config import ConfigError, NavConfig
from omninav.episode import Simulation, TickRecord, final_error, log_to_csv
from omninav.world import WorldError, WorldModel, load_world

STRATEGIES = ("all", "clip", "detic")

# origin jitter bounds per trial
JITTER_POS = 0.05  # m
JITTER_YAW = 0.05  # rad

_WORLDS_DIR = Path(__file__).resolve().parent / "worlds"


class ScenarioError(ValueError):
    """Bad scenario definition or an unloadable world."""


@dataclass(frozen=True)
class Scenario:
    """One repeatable experiment cell: a world, a target, and a schedule."""

    name: str
    world_path: str
    origin: tuple[float, float, float]
    target: tuple[float, float]
    target_label: str
    schedule: tuple[tuple[float, str], ...]
    strategy: str = "all"
    trials: int = 5
    seed: int = 0
    max_time: float = 30.0
    config: NavConfig = field(default_factory=NavConfig)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ScenarioError(f"trials must be >= 1, got {self.trials}")
        if self.strategy not in STRATEGIES:
            raise ScenarioError(f"unknown strategy {self.strategy!r}")
        if self.max_time <= 0:
            raise ScenarioError(f"max_time must be positive, got {self.max_time}")
        times = [t for t, _ in self.schedule]
        if times and times[0] != 0.0:
            raise ScenarioError("schedule must start at time 0")
        if any(b < a for a, b in zip(times, times[1:])):
            raise ScenarioError("schedule times must be nondecreasing")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "Scenario":
        try:
            target = data["target"]
            cfg = NavConfig()
            cfg.update({k: str(v) for k, v in data.get("config", {}).items()})
            return cls(
                name=data["name"],
                world_path=str(_resolve_world(data["world"], base_dir)),
                origin=tuple(float(v) for v in data["origin"]),
                target=tuple(float(v) for v in target["point"]),
                target_label=target["label"],
                schedule=tuple((float(t), str(s)) for t, s in data["schedule"]),
                strategy=data.get("strategy", "all"),
                trials=int(data.get("trials", 5)),
                seed=int(data.get("seed", 0)),
                max_time=float(data.get("max_time", 30.0)),
                config=cfg,
            )
        except (KeyError, TypeError, ValueError, ConfigError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"bad scenario: {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "Scenario":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ScenarioError(f"{path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}:{exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(data, base_dir=path.parent)


def _resolve_world(spec: str, base_dir: Path | None) -> Path:
    p = Path(spec)
    if p.is_absolute():
        if p.exists():
            return p
        raise ScenarioError(f"world not found: {spec}")
    roots = [base_dir] if base_dir is not None else []
    roots += [Path.cwd(), _WORLDS_DIR]
    for root in roots:
        cand = root / p
        if cand.exists():
            return cand
    raise ScenarioError(f"world not found: {spec}")


@dataclass(frozen=True)
class TrialResult:
    scenario: str
    strategy: str
    trial_index: int
    records: tuple[TickRecord, ...]
    final_error: float
    termination: str
    duration: float
    n_split: int

    def csv(self) -> str:
        return log_to_csv(list(self.records), self.n_split)


def load_scenario_world(scenario: Scenario) -> WorldModel:
    try:
        return load_world(scenario.world_path)
    except WorldError as exc:
        raise ScenarioError(str(exc)) from exc


def jittered_origin(scenario: Scenario, trial_index: int) -> tuple[float, float, float]:
    rng = np.random.default_rng(scenario.seed + trial_index)
    d = rng.uniform(-1.0, 1.0, size=3) * (JITTER_POS, JITTER_POS, JITTER_YAW)
    return (
        scenario.origin[0] + float(d[0]),
        scenario.origin[1] + float(d[1]),
        scenario.origin[2] + float(d[2]),
    )


def run_trial(scenario: Scenario, trial_index: int, world: WorldModel | None = None) -> TrialResult:
    """Run one seeded trial to termination and score it against the target."""
    if world is None:
        world = load_scenario_world(scenario)
    sim = Simulation(
        world,
        scenario.config,
        origin=jittered_origin(scenario, trial_index),
        schedule=scenario.schedule,
        strategy=scenario.strategy,
        max_time=scenario.max_time,
    )
    termination = sim.run()
    return TrialResult(
        scenario=scenario.name,
        strategy=scenario.strategy,
        trial_index=trial_index,
        records=tuple(sim.records),
        final_error=final_error(sim, scenario.target),
        termination=termination,
        duration=sim.t,
        n_split=sim.config.n_split,
    )


def run_scenario(scenario: Scenario, world: WorldModel | None = None) -> list[TrialResult]:
    if world is None:
        world = load_scenario_world(scenario)
    return [run_trial(scenario, k, world) for k in range(scenario.trials)]


@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    strategy: str
    trials: int
    mean_error: float
    var_error: float


def summarize(results: list[TrialResult]) -> list[SummaryRow]:
    """Mean and population variance of final error per (scenario, strategy)."""
    groups: dict[tuple[str, str], list[float]] = {}
    for r in results:
        groups.setdefault((r.scenario, r.strategy), []).append(r.final_error)
    rows = []
    for name, strategy in sorted(groups):
        errs = np.asarray(groups[(name, strategy)], dtype=float)
        rows.append(SummaryRow(name, strategy, len(errs), float(errs.mean()), float(errs.var())))
    return rows


def run_comparison(
    scenarios: list[Scenario], strategies: tuple[str, ...] = STRATEGIES
) -> tuple[list[SummaryRow], list[TrialResult]]:
    """Run every scenario under every strategy; aggregation is order-independent."""
    results: list[TrialResult] = []
    for scenario in scenarios:
        world = load_scenario_world(scenario)
        for strategy in strategies:
            variant = replace(scenario, strategy=strategy)
            results.extend(run_trial(variant, k, world) for k in range(variant.trials))
    return summarize(results), results


def summary_csv(rows: list[SummaryRow]) -> str:
    lines = ["scenario,strategy,trials,mean_error,var_error"]
    lines.extend(
        f"{r.scenario},{r.strategy},{r.trials},{r.mean_error:.6f},{r.var_error:.6f}"
        for r in rows
    )
    return "\n".join(lines) + "\n"


_STRATEGY_COLORS = {"all": "#d62728", "clip": "#1f77b4", "detic": "#2ca02c"}


def render_world_svg(
    world: WorldModel,
    results: list[TrialResult],
    origin: tuple[float, float] | None = None,
    target: tuple[float, float] | None = None,
    width: int = 640,
) -> str:
    """Standalone SVG: world outline, regions, entities, and trial paths."""
    x0, y0, x1, y1 = world.bounds
    margin = 24.0
    scale = (width - 2 * margin) / (x1 - x0)
    height = (y1 - y0) * scale + 2 * margin

    def sx(x: float) -> float:
        return margin + (x - x0) * scale

    def sy(y: float) -> float:
        # image y grows downward
        return margin + (y1 - y) * scale

    def pt(x: float, y: float) -> str:
        return f"{sx(x):.1f},{sy(y):.1f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height:.0f}" viewBox="0 0 {width} {height:.0f}">',
        f'<rect width="{width}" height="{height:.0f}" fill="#ffffff"/>',
        f'<rect class="bounds" x="{sx(x0):.1f}" y="{sy(y1):.1f}" '
        f'width="{(x1 - x0) * scale:.1f}" height="{(y1 - y0) * scale:.1f}" '
        'fill="none" stroke="#333333" stroke-width="2"/>',
    ]
    for region in world.regions:
        pts = " ".join(pt(*v) for v in region.polygon)
        parts.append(
            f'<polygon class="region" points="{pts}" fill="#888888" '
            'fill-opacity="0.12" stroke="#888888" stroke-dasharray="4 3"/>'
        )
        cx, cy = region.centroid()
        parts.append(
            f'<text x="{sx(cx):.1f}" y="{sy(cy):.1f}" font-size="11" '
            f'fill="#666666" text-anchor="middle">{region.name}</text>'
        )
    for ax, ay, bx, by in world.walls:
        parts.append(
            f'<line class="wall" x1="{sx(ax):.1f}" y1="{sy(ay):.1f}" '
            f'x2="{sx(bx):.1f}" y2="{sy(by):.1f}" stroke="#222222" stroke-width="3"/>'
        )
    for ent in world.entities:
        fill = "#b08968" if ent.height == "tall" else "#cbb8a0"
        if ent.kind == "disc":
            parts.append(
                f'<circle class="entity" cx="{sx(ent.center[0]):.1f}" '
                f'cy="{sy(ent.center[1]):.1f}" r="{ent.radius * scale:.1f}" fill="{fill}"/>'
            )
        else:
            pts = " ".join(pt(*v) for v in ent.vertices)
            parts.append(f'<polygon class="entity" points="{pts}" fill="{fill}"/>')
    for result in results:
        color = _STRATEGY_COLORS.get(result.strategy, "#555555")
        pts = " ".join(pt(rec.x, rec.y) for rec in result.records)
        parts.append(
            f'<polyline class="trail" points="{pts}" fill="none" '
            f'stroke="{color}" stroke-width="1.5" stroke-opacity="0.8"/>'
        )
    if origin is not None:
        parts.append(
            f'<circle class="origin" cx="{sx(origin[0]):.1f}" cy="{sy(origin[1]):.1f}" '
            'r="5" fill="none" stroke="#000000" stroke-width="2"/>'
        )
    if target is not None:
        tx, ty = sx(target[0]), sy(target[1])
        parts.append(
            f'<path class="target" d="M {tx - 6:.1f} {ty - 6:.1f} L {tx + 6:.1f} {ty + 6:.1f} '
            f'M {tx - 6:.1f} {ty + 6:.1f} L {tx + 6:.1f} {ty - 6:.1f}" '
            'stroke="#d62728" stroke-width="2"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def export_artifacts(
    results: list[TrialResult], out_dir: str | Path, scenarios: list[Scenario]
) -> list[Path]:
    """Write per-trial trajectory CSVs, summary.csv, and one SVG per scenario."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_name = {s.name: s for s in scenarios}
    written = []
    for r in sorted(results, key=lambda r: (r.scenario, r.strategy, r.trial_index)):
        path = out / f"{r.scenario}_{r.strategy}_trial{r.trial_index}.csv"
        path.write_text(r.csv())
        written.append(path)
    path = out / "summary.csv"
    path.write_text(summary_csv(summarize(results)))
    written.append(path)
    for name in sorted({r.scenario for r in results}):
        scenario = by_name.get(name)
        if scenario is None:
            continue
        world = load_scenario_world(scenario)
        group = [r for r in results if r.scenario == name]
        path = out / f"{name}.svg"
        path.write_text(
            render_world_svg(world, group, scenario.origin[:2], scenario.target)
        )
        written.append(path)
    return written
