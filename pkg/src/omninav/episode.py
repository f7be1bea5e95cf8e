"""Tick-driven episode engine shared by the batch harness and the live service.

Each tick: resolve the scheduled instruction, sense (visibility + range scan),
run the reflex controller, log, integrate kinematics. Termination is one of
collision, timeout, or operator stop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from omninav.config import NavConfig
from omninav.control import ReflexController, StepResult
from omninav.oracles import compute_visibility, default_scorers
from omninav.panorama import Panorama, make_slices
from omninav.scoring import Instruction
from omninav.world import RobotState, WorldModel, ray_scan, step_kinematics

TERMINATIONS = ("collision", "timeout", "operator")


@dataclass(frozen=True)
class TickRecord:
    t: float
    x: float
    y: float
    yaw: float
    linear: float
    rotate: float
    theta: float
    gated: bool
    e: tuple[float, ...]

    def csv_row(self) -> str:
        head = (
            f"{self.t:.6f},{self.x:.6f},{self.y:.6f},{self.yaw:.6f},"
            f"{self.linear:.6f},{self.rotate:.6f},{self.theta:.6f},{int(self.gated)}"
        )
        return head + "".join(f",{v:.6f}" for v in self.e)


def csv_header(n_split: int) -> str:
    return "t,x,y,yaw,linear,rotate,theta,gated," + ",".join(
        f"e_{i}" for i in range(1, n_split + 1)
    )


def log_to_csv(records: list[TickRecord], n_split: int) -> str:
    lines = [csv_header(n_split)]
    lines.extend(r.csv_row() for r in records)
    return "\n".join(lines) + "\n"


class Simulation:
    """One robot in one world under a scheduled instruction stream.

    The engine is synchronous and deterministic: the same world, origin,
    schedule, and configuration produce an identical log. Live use (the
    session service) drives tick() manually and may pause or inject
    instructions; batch use calls run().
    """

    def __init__(
        self,
        world: WorldModel,
        config: NavConfig | None = None,
        origin: tuple[float, float, float] = (0.0, 0.0, 0.0),
        schedule: tuple[tuple[float, str], ...] = (),
        strategy: str = "all",
        max_time: float = 30.0,
        scorers: dict | None = None,
    ) -> None:
        self.world = world
        self.config = config or NavConfig()
        self.origin = origin
        self.schedule = tuple(sorted(schedule, key=lambda it: it[0]))
        self.max_time = max_time
        band = Panorama.geometry(2000, self.config.crop_height)
        self.slices = make_slices(band, self.config.n_split, self.config.overlap_frac)
        self.controller = ReflexController(
            scorers if scorers is not None else default_scorers(world),
            self.slices,
            self.config,
            strategy,
        )
        self.state = RobotState(x=origin[0], y=origin[1], yaw=origin[2])
        self.tick_index = 0
        self.paused = False
        self.terminated: str | None = None
        self.records: list[TickRecord] = []
        self.last_result: StepResult | None = None
        self._manual_instruction: str | None = None

    @property
    def t(self) -> float:
        return self.tick_index * self.config.tick_s

    @property
    def strategy(self) -> str:
        return self.controller.strategy

    def current_instruction(self) -> str | None:
        if self._manual_instruction is not None:
            return self._manual_instruction
        text = None
        for when, instr in self.schedule:
            if when <= self.t + 1e-9:
                text = instr
        return text

    def set_instruction(self, text: str) -> None:
        self._manual_instruction = text

    def set_strategy(self, strategy: str) -> None:
        self.controller.set_strategy(strategy)

    def stop(self) -> None:
        self.terminated = "operator"

    def reset(self) -> None:
        self.state = RobotState(x=self.origin[0], y=self.origin[1], yaw=self.origin[2])
        self.tick_index = 0
        self.paused = False
        self.terminated = None
        self.records = []
        self.last_result = None
        self._manual_instruction = None
        self.controller.reset()

    def tick(self) -> StepResult | None:
        """Advance one control period; no-op when paused or terminated."""
        if self.paused or self.terminated is not None:
            return self.last_result
        text = self.current_instruction()
        instruction = Instruction(text=text, issued_at=self.t) if text else None
        vis = compute_visibility(
            self.world,
            self.state,
            self.slices,
            rays_per_slice=self.config.rays_per_slice,
            max_range=self.config.max_range,
        )
        scan = ray_scan(self.world, self.state, self.config.n_rays, self.config.max_range)
        result = self.controller.step(instruction, vis, scan)
        self.last_result = result
        self.records.append(
            TickRecord(
                t=self.t,
                x=self.state.x,
                y=self.state.y,
                yaw=self.state.yaw,
                linear=result.velocity.linear,
                rotate=result.velocity.rotate,
                theta=result.direction.theta,
                gated=result.velocity.gated,
                e=tuple(result.fused.e),
            )
        )
        self.state = step_kinematics(self.state, result.velocity, self.config.tick_s, self.world)
        self.tick_index += 1
        if self.state.collided:
            self.terminated = "collision"
        elif self.t >= self.max_time - 1e-9:
            self.terminated = "timeout"
        return result

    def run(self) -> str:
        """Tick until termination; returns the termination reason."""
        while self.terminated is None:
            self.tick()
        return self.terminated

    def csv(self) -> str:
        return log_to_csv(self.records, self.config.n_split)

    def snapshot(self) -> dict:
        """Wire-ready state summary for observers (one per tick)."""
        res = self.last_result
        n = self.config.n_split
        snap = {
            "v": 1,
            "type": "snapshot",
            "t": round(self.t, 6),
            "pose": [round(self.state.x, 6), round(self.state.y, 6), round(self.state.yaw, 6)],
            "instruction": self.current_instruction(),
            "strategy": self.strategy,
            "paused": self.paused,
            "terminated": self.terminated,
            "e": [round(v, 6) for v in (res.fused.e if res else (1.0,) * n)],
            "theta": round(res.direction.theta, 6) if res else 0.0,
            "linear": res.velocity.linear if res else 0.0,
            "rotate": round(res.velocity.rotate, 6) if res else 0.0,
            "gated": bool(res.velocity.gated) if res else False,
            "contributors": [[i, round(w, 6)] for i, w in (res.direction.contributors if res else ())],
            "a": {},
            "stale": {},
        }
        if res:
            for role, profile in res.profiles.items():
                snap["a"][role] = [round(v, 6) for v in profile.transformed]
                snap["stale"][role] = bool(profile.stale)
        return snap


def final_error(sim: Simulation, target: tuple[float, float]) -> float:
    return math.hypot(sim.state.x - target[0], sim.state.y - target[1])
