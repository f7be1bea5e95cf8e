"""2D semantic world: walls, labeled entities, context regions, kinematics.

Geometry is vectorized with numpy so ray sensing stays far under the control
tick budget. Angles follow the robot convention (x forward, y left, yaw CCW).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from omninav.control import RangeScan, VelocityCommand, wrap_angle

_EPS = 1e-9


class WorldError(ValueError):
    pass


@dataclass(frozen=True)
class Entity:
    """Semantic object with a disc or polygon footprint.

    "tall" entities occlude the camera; "low" ones are seen but can be seen
    past (a microwave on a counter hides nothing behind it). The range finder
    hits both kinds.
    """

    label: str
    kind: str  # "disc" | "polygon"
    center: tuple[float, float] | None = None
    radius: float | None = None
    vertices: tuple[tuple[float, float], ...] | None = None
    height: str = "low"

    def __post_init__(self) -> None:
        if self.kind == "disc":
            if self.center is None or self.radius is None or self.radius <= 0:
                raise WorldError(f"entity {self.label!r}: disc needs center and positive radius")
        elif self.kind == "polygon":
            if self.vertices is None or len(self.vertices) < 3:
                raise WorldError(f"entity {self.label!r}: polygon needs >= 3 vertices")
        else:
            raise WorldError(f"entity {self.label!r}: unknown shape kind {self.kind!r}")
        if self.height not in ("low", "tall"):
            raise WorldError(f"entity {self.label!r}: height must be 'low' or 'tall'")

    def position(self) -> tuple[float, float]:
        if self.kind == "disc":
            return self.center  # type: ignore[return-value]
        vs = np.asarray(self.vertices, dtype=float)
        return (float(vs[:, 0].mean()), float(vs[:, 1].mean()))


@dataclass(frozen=True)
class Region:
    """Named convex area with the context vocabulary seen when looking at it."""

    name: str
    polygon: tuple[tuple[float, float], ...]
    vocab: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.polygon) < 3:
            raise WorldError(f"region {self.name!r}: polygon needs >= 3 vertices")
        if not self.vocab:
            raise WorldError(f"region {self.name!r}: empty vocabulary")

    def centroid(self) -> tuple[float, float]:
        vs = np.asarray(self.polygon, dtype=float)
        return (float(vs[:, 0].mean()), float(vs[:, 1].mean()))


@dataclass(frozen=True)
class RobotState:
    """Pose plus footprint; ``collided`` reports a blocked step."""

    x: float
    y: float
    yaw: float
    footprint: float = 0.6  # square side, meters
    commanded: VelocityCommand | None = None
    collided: bool = False

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.yaw)


def _ccw_polygon(verts: np.ndarray) -> np.ndarray:
    """Return the polygon with counterclockwise winding (signed-area test)."""
    x, y = verts[:, 0], verts[:, 1]
    area2 = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    if abs(area2) < _EPS:
        raise WorldError("degenerate (zero-area) polygon")
    return verts if area2 > 0 else verts[::-1].copy()


def _check_convex(verts: np.ndarray, name: str) -> None:
    edges = np.roll(verts, -1, axis=0) - verts
    cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
    if (cross < -1e-9).any():
        raise WorldError(f"region {name!r}: polygon must be convex")


def _poly_segments(verts: np.ndarray) -> np.ndarray:
    nxt = np.roll(verts, -1, axis=0)
    return np.hstack([verts, nxt])


@dataclass
class WorldModel:
    """Static world description plus precomputed geometry caches."""

    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    walls: tuple[tuple[float, float, float, float], ...]
    entities: tuple[Entity, ...]
    regions: tuple[Region, ...]
    background_vocab: tuple[str, ...] = ("room", "wall", "floor")

    _wall_segs: np.ndarray = field(init=False, repr=False, compare=False)
    _terminal_segs: np.ndarray = field(init=False, repr=False, compare=False)
    _terminal_discs: np.ndarray = field(init=False, repr=False, compare=False)
    _solid_segs: np.ndarray = field(init=False, repr=False, compare=False)
    _solid_discs: np.ndarray = field(init=False, repr=False, compare=False)
    _entity_geo: list = field(init=False, repr=False, compare=False)
    _region_geo: list = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise WorldError(f"bad bounds {self.bounds}")
        for seg in self.walls:
            if math.hypot(seg[2] - seg[0], seg[3] - seg[1]) < _EPS:
                raise WorldError(f"zero-length wall {seg}")
        self._wall_segs = (
            np.asarray(self.walls, dtype=float).reshape(-1, 4)
            if self.walls
            else np.zeros((0, 4))
        )

        self._entity_geo = []
        term_segs = [self._wall_segs]
        term_discs: list[np.ndarray] = []
        solid_segs = [self._wall_segs]
        solid_discs: list[np.ndarray] = []
        for ent in self.entities:
            if ent.kind == "disc":
                cx, cy = ent.center  # type: ignore[misc]
                r = float(ent.radius)  # type: ignore[arg-type]
                self._require_inside(cx - r, cy - r, f"entity {ent.label!r}")
                self._require_inside(cx + r, cy + r, f"entity {ent.label!r}")
                disc = np.array([[cx, cy, r]])
                self._entity_geo.append(("disc", disc))
                solid_discs.append(disc)
                if ent.height == "tall":
                    term_discs.append(disc)
            else:
                verts = np.asarray(ent.vertices, dtype=float)
                for vx, vy in verts:
                    self._require_inside(vx, vy, f"entity {ent.label!r}")
                segs = _poly_segments(verts)
                self._entity_geo.append(("segs", segs))
                solid_segs.append(segs)
                if ent.height == "tall":
                    term_segs.append(segs)
        self._terminal_segs = np.vstack(term_segs)
        self._terminal_discs = np.vstack(term_discs) if term_discs else np.zeros((0, 3))
        self._solid_segs = np.vstack(solid_segs)
        self._solid_discs = np.vstack(solid_discs) if solid_discs else np.zeros((0, 3))

        self._region_geo = []
        for reg in self.regions:
            verts = _ccw_polygon(np.asarray(reg.polygon, dtype=float))
            _check_convex(verts, reg.name)
            for vx, vy in verts:
                self._require_inside(vx, vy, f"region {reg.name!r}")
            edges = np.roll(verts, -1, axis=0) - verts
            normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)  # outward for CCW
            self._region_geo.append((verts, normals))

    def _require_inside(self, x: float, y: float, what: str) -> None:
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmin - 1e-6 <= x <= xmax + 1e-6 and ymin - 1e-6 <= y <= ymax + 1e-6):
            raise WorldError(f"{what} outside bounds {self.bounds}: ({x}, {y})")

    def region_by_name(self, name: str) -> Region:
        for reg in self.regions:
            if reg.name == name:
                return reg
        raise KeyError(name)

    def entity_by_label(self, label: str) -> Entity:
        for ent in self.entities:
            if ent.label == label:
                return ent
        raise KeyError(label)

    def point_in_region(self, name: str, x: float, y: float) -> bool:
        idx = [r.name for r in self.regions].index(name)
        verts, normals = self._region_geo[idx]
        rel = np.array([x, y]) - verts
        return bool((np.sum(rel * normals, axis=1) <= 1e-9).all())

    def center(self) -> tuple[float, float]:
        xmin, ymin, xmax, ymax = self.bounds
        return ((xmin + xmax) / 2.0, (ymin + ymax) / 2.0)


def _seg_hit_dists(origin: np.ndarray, dirs: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Distance along each ray to the nearest of the given segments (inf if none)."""
    if segs.shape[0] == 0:
        return np.full(dirs.shape[0], np.inf)
    a = segs[:, 0:2]
    s = segs[:, 2:4] - a
    q = a - origin  # (M, 2)
    den = dirs[:, None, 0] * s[None, :, 1] - dirs[:, None, 1] * s[None, :, 0]  # (R, M)
    qxs = q[:, 0] * s[:, 1] - q[:, 1] * s[:, 0]  # (M,)
    qxd = q[None, :, 0] * dirs[:, None, 1] - q[None, :, 1] * dirs[:, None, 0]  # (R, M)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = qxs[None, :] / den
        u = qxd / den
    valid = (np.abs(den) > _EPS) & (u >= -_EPS) & (u <= 1.0 + _EPS) & (t > _EPS)
    t = np.where(valid, t, np.inf)
    return t.min(axis=1)


def _disc_hit_dists(origin: np.ndarray, dirs: np.ndarray, discs: np.ndarray) -> np.ndarray:
    """Distance along each ray to the nearest disc boundary (inf if none)."""
    if discs.shape[0] == 0:
        return np.full(dirs.shape[0], np.inf)
    oc = discs[None, :, 0:2] - origin  # (1, C, 2) broadcast against rays
    proj = dirs[:, None, 0] * oc[:, :, 0] + dirs[:, None, 1] * oc[:, :, 1]  # (R, C)
    d2 = (oc[:, :, 0] ** 2 + oc[:, :, 1] ** 2) - proj**2
    r2 = discs[None, :, 2] ** 2
    inside = r2 - d2
    hit = inside >= 0.0
    root = np.sqrt(np.where(hit, inside, 0.0))
    t_in = proj - root
    t_out = proj + root
    t = np.where(t_in > _EPS, t_in, np.where(t_out > _EPS, t_out, np.inf))
    t = np.where(hit, t, np.inf)
    return t.min(axis=1)


def _first_hits(
    origin: np.ndarray, dirs: np.ndarray, segs: np.ndarray, discs: np.ndarray
) -> np.ndarray:
    return np.minimum(_seg_hit_dists(origin, dirs, segs), _disc_hit_dists(origin, dirs, discs))


def ray_scan(
    world: WorldModel, state: RobotState, n_rays: int = 360, max_range: float = 5.0
) -> RangeScan:
    """Emulated planar range finder: first wall or entity hit per bearing."""
    if n_rays < 8:
        raise ValueError("n_rays must be >= 8")
    bearings = -np.pi + 2.0 * np.pi * np.arange(n_rays) / n_rays
    angles = state.yaw + bearings
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    origin = np.array([state.x, state.y])
    t = _first_hits(origin, dirs, world._solid_segs, world._solid_discs)
    distances = np.clip(t, 1e-6, max_range)
    return RangeScan(bearings=bearings, distances=distances, max_range=max_range)


def _point_seg_dists(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points (N, 2) to one segment a-b."""
    ab = b - a
    denom = float(ab @ ab)
    if denom < _EPS:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.linalg.norm(points - closest, axis=1)


def _segments_intersect(a: np.ndarray, b: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Proper-intersection test of segment a-b against each row of segs."""
    c = segs[:, 0:2]
    d = segs[:, 2:4]

    def ccw(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (
            r[..., 0] - p[..., 0]
        )

    d1 = ccw(c, d, a[None, :])
    d2 = ccw(c, d, b[None, :])
    d3 = ccw(a[None, :], b[None, :], c)
    d4 = ccw(a[None, :], b[None, :], d)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def swept_clearance(a: tuple[float, float], b: tuple[float, float], segs: np.ndarray) -> float:
    """Minimum distance between the sweep segment a->b and any of segs (0 on crossing)."""
    if segs.shape[0] == 0:
        return math.inf
    pa = np.asarray(a, dtype=float)
    pb = np.asarray(b, dtype=float)
    if bool(_segments_intersect(pa, pb, segs).any()):
        return 0.0
    ends = np.stack([pa, pb])
    best = math.inf
    for seg in segs:
        c, d = seg[0:2], seg[2:4]
        best = min(best, float(_point_seg_dists(ends, c, d).min()))
        best = min(best, float(_point_seg_dists(seg.reshape(2, 2), pa, pb).min()))
    return best


def step_kinematics(
    state: RobotState, cmd: VelocityCommand, dt: float, world: WorldModel | None = None
) -> RobotState:
    """Euler update of the differential-drive pose.

    Translation uses the pre-update heading. When the swept footprint would
    cross or graze a wall the position is held (rotation still applies) and
    the collision flag is raised.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    nx = state.x + cmd.linear * math.cos(state.yaw) * dt
    ny = state.y + cmd.linear * math.sin(state.yaw) * dt
    nyaw = wrap_angle(state.yaw + cmd.rotate * dt)
    collided = False
    if world is not None and (nx != state.x or ny != state.y):
        clearance = swept_clearance((state.x, state.y), (nx, ny), world._wall_segs)
        if clearance < state.footprint / 2.0:
            nx, ny = state.x, state.y
            collided = True
    return RobotState(
        x=nx,
        y=ny,
        yaw=nyaw,
        footprint=state.footprint,
        commanded=cmd,
        collided=collided,
    )


def load_world(path: str | Path) -> WorldModel:
    """Parse a JSON world file; malformed JSON reports the line number."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise WorldError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise WorldError(f"cannot read {path}: {exc}") from exc
    return world_from_dict(data)


def world_from_dict(data: dict) -> WorldModel:
    try:
        bounds = tuple(float(v) for v in data["bounds"])
        if len(bounds) != 4:
            raise WorldError("bounds must be [xmin, ymin, xmax, ymax]")
        walls = tuple(tuple(float(v) for v in seg) for seg in data.get("walls", []))
        entities = []
        for ed in data.get("entities", []):
            shape = ed["shape"]
            entities.append(
                Entity(
                    label=str(ed["label"]),
                    kind=str(shape["kind"]),
                    center=tuple(float(v) for v in shape["center"]) if "center" in shape else None,
                    radius=float(shape["radius"]) if "radius" in shape else None,
                    vertices=tuple(tuple(float(v) for v in p) for p in shape["vertices"])
                    if "vertices" in shape
                    else None,
                    height=str(ed.get("height", "low")),
                )
            )
        regions = []
        for rd in data.get("regions", []):
            regions.append(
                Region(
                    name=str(rd["name"]),
                    polygon=tuple(tuple(float(v) for v in p) for p in rd["polygon"]),
                    vocab=tuple(str(t) for t in rd["vocab"]),
                )
            )
        background = tuple(str(t) for t in data.get("background", ("room", "wall", "floor")))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, WorldError):
            raise
        raise WorldError(f"malformed world data: {exc!r}") from exc
    return WorldModel(
        bounds=bounds,  # type: ignore[arg-type]
        walls=walls,
        entities=tuple(entities),
        regions=tuple(regions),
        background_vocab=background,
    )


def world_to_dict(world: WorldModel) -> dict:
    entities = []
    for ent in world.entities:
        shape: dict = {"kind": ent.kind}
        if ent.kind == "disc":
            shape["center"] = list(ent.center)  # type: ignore[arg-type]
            shape["radius"] = ent.radius
        else:
            shape["vertices"] = [list(p) for p in ent.vertices]  # type: ignore[union-attr]
        entities.append({"label": ent.label, "shape": shape, "height": ent.height})
    return {
        "bounds": list(world.bounds),
        "walls": [list(seg) for seg in world.walls],
        "entities": entities,
        "regions": [
            {"name": r.name, "polygon": [list(p) for p in r.polygon], "vocab": list(r.vocab)}
            for r in world.regions
        ],
        "background": list(world.background_vocab),
    }


def save_world(world: WorldModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(world_to_dict(world), indent=2) + "\n")
