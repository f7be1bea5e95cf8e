"""Reflex control: evaluation values to body motion at a fixed tick.

Selection takes the top N evaluation values, blends their slice directions
with rank weights (N+1-j), and the resulting heading drives either a
two-wheel velocity law or a holonomic translation. A range-scan gate zeroes
the forward command when an obstacle sits inside a cone around the heading.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from omninav.config import NavConfig
from omninav.panorama import SliceSet
from omninav.scoring import (
    FusedProfile,
    Instruction,
    ScoreProfile,
    Scorer,
    fuse,
    score_slices,
)

STRATEGIES = ("all", "clip", "detic")
_CANCEL_EPS = 1e-6


@dataclass(frozen=True)
class DirectionCommand:
    """Blended target direction in the robot frame."""

    b: tuple[float, float]
    theta: float  # radians in [-pi, pi]
    contributors: tuple[tuple[int, float], ...]  # (slice index, normalized weight), weight descending


@dataclass(frozen=True)
class VelocityCommand:
    linear: float  # m/s
    rotate: float  # rad/s
    gated: bool = False


@dataclass(frozen=True)
class RangeScan:
    """Planar range measurements in the robot frame."""

    bearings: np.ndarray  # radians, covering [-pi, pi)
    distances: np.ndarray  # meters, in (0, max_range]
    max_range: float

    def __len__(self) -> int:
        return len(self.bearings)


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def select_direction(
    e: FusedProfile | Sequence[float],
    slices: SliceSet,
    n_extract: int,
    prev_theta: float = 0.0,
) -> DirectionCommand:
    """Blend the directions of the n_extract best-evaluated slices.

    The j-th best slice gets weight (n_extract + 1 - j); ties in e go to the
    lower slice index so replays are deterministic. If the chosen directions
    cancel out, the previous heading is held instead of picking arbitrarily.
    """
    values = list(e.e if isinstance(e, FusedProfile) else e)
    n = len(values)
    if n != slices.n_split:
        raise ValueError(f"{n} evaluation values for {slices.n_split} slices")
    if not 1 <= n_extract <= n:
        raise ValueError(f"n_extract={n_extract} out of range [1, {n}]")

    order = sorted(range(n), key=lambda i: (-values[i], i))[:n_extract]
    weights = [float(n_extract - j) for j in range(n_extract)]  # n_extract, ..., 1
    total = sum(weights)
    bx = sum(w * slices.slices[i].b[0] for w, i in zip(weights, order)) / total
    by = sum(w * slices.slices[i].b[1] for w, i in zip(weights, order)) / total
    if math.hypot(bx, by) < _CANCEL_EPS:
        theta = prev_theta
    else:
        theta = math.atan2(by, bx)
    return DirectionCommand(
        b=(bx, by),
        theta=theta,
        contributors=tuple((i, w / total) for w, i in zip(weights, order)),
    )


def diff_drive_command(d: DirectionCommand, k: float, c_thre: float) -> VelocityCommand:
    """Two-wheel mapping: full speed ahead while the heading error is small.

    Rotation is proportional to the heading always; translation is 1.0 m/s
    inside the threshold and 0 outside (turn in place).
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if not 0.0 < c_thre <= math.pi:
        raise ValueError("c_thre must be in (0, pi]")
    linear = 1.0 if abs(d.theta) < c_thre else 0.0
    return VelocityCommand(linear=linear, rotate=k * d.theta)


def omni_command(d: DirectionCommand, speed: float) -> tuple[float, float]:
    """Holonomic mapping: translate at ``speed`` along the blended direction."""
    if speed <= 0:
        raise ValueError("speed must be positive")
    norm = math.hypot(*d.b)
    if norm < _CANCEL_EPS:
        return (0.0, 0.0)
    return (speed * d.b[0] / norm, speed * d.b[1] / norm)


def obstacle_gate(
    v: VelocityCommand,
    d: DirectionCommand,
    scan: RangeScan | None,
    stop_dist: float = 0.4,
    cone: float = 0.5,
) -> VelocityCommand:
    """Zero the forward command when an obstacle sits close along the heading.

    Turning in place stays allowed; a missing or empty scan gates
    conservatively.
    """
    if stop_dist <= 0:
        raise ValueError("stop_dist must be positive")
    if scan is None or len(scan) == 0:
        return replace(v, linear=0.0, gated=True)
    diff = np.abs(np.mod(scan.bearings - d.theta + np.pi, 2.0 * np.pi) - np.pi)
    in_cone = diff <= cone
    if in_cone.any() and float(scan.distances[in_cone].min()) < stop_dist:
        return replace(v, linear=0.0, gated=True)
    return v


@dataclass(frozen=True)
class StepResult:
    velocity: VelocityCommand
    direction: DirectionCommand
    fused: FusedProfile
    profiles: dict[str, ScoreProfile]
    elapsed_s: float


class ReflexController:
    """One full sensor-to-velocity tick, composed from the pieces above.

    Holds the little state a reflex needs: last profiles for the staleness
    fallback and the last heading for the cancellation case. ``scorers`` maps
    the scorer roles "clip" and "detic" to implementations (oracles or
    gateway clients); ``strategy`` picks which of them feed the evaluation.
    """

    def __init__(
        self,
        scorers: dict[str, Scorer],
        slices: SliceSet,
        config: NavConfig | None = None,
        strategy: str = "all",
    ) -> None:
        if strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
        needed = ("clip", "detic") if strategy == "all" else (strategy,)
        missing = [k for k in needed if k not in scorers]
        if missing:
            raise ValueError(f"strategy {strategy!r} needs scorers {missing}")
        self.scorers = scorers
        self.slices = slices
        self.config = config or NavConfig()
        self.strategy = strategy
        self._last_profiles: dict[str, ScoreProfile] = {}
        self._prev_theta = 0.0

    def reset(self) -> None:
        self._last_profiles.clear()
        self._prev_theta = 0.0

    def set_strategy(self, strategy: str) -> None:
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        needed = ("clip", "detic") if strategy == "all" else (strategy,)
        missing = [k for k in needed if k not in self.scorers]
        if missing:
            raise ValueError(f"strategy {strategy!r} needs scorers {missing}")
        self.strategy = strategy

    def step(
        self,
        instruction: Instruction | None,
        context,
        scan: RangeScan | None,
    ) -> StepResult:
        """Score, fuse, select, and gate for one control tick.

        With no instruction yet the robot holds still. Scorer failures fall
        back to the last profile (flagged stale) and never stall the tick.
        """
        t0 = time.perf_counter()
        n = self.slices.n_split
        if instruction is None:
            fused = FusedProfile(e=(1.0,) * n)
            direction = DirectionCommand(b=(0.0, 0.0), theta=self._prev_theta, contributors=())
            velocity = VelocityCommand(linear=0.0, rotate=0.0)
            return StepResult(velocity, direction, fused, {}, time.perf_counter() - t0)

        roles = ("clip", "detic") if self.strategy == "all" else (self.strategy,)
        profiles: dict[str, ScoreProfile] = {}
        for role in roles:
            profile = score_slices(
                self.scorers[role],
                instruction,
                self.slices,
                context,
                last=self._last_profiles.get(role),
            )
            profiles[role] = profile
            self._last_profiles[role] = profile

        if self.strategy == "all":
            fused = fuse(profiles["clip"].transformed, profiles["detic"].transformed)
        else:
            fused = FusedProfile.from_single(profiles[self.strategy])

        direction = select_direction(
            fused, self.slices, self.config.n_extract, prev_theta=self._prev_theta
        )
        self._prev_theta = direction.theta
        velocity = diff_drive_command(direction, k=self.config.k, c_thre=self.config.c_thre)
        velocity = obstacle_gate(
            velocity, direction, scan, stop_dist=self.config.stop_dist, cone=self.config.cone
        )
        return StepResult(velocity, direction, fused, profiles, time.perf_counter() - t0)
