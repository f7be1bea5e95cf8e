"""Deterministic stand-ins for the two vision-language scorers.

Both operate on a :class:`VisibilitySummary` computed by casting rays in the
simulated world, so no real camera or model weights are involved. The region
scorer mimics scene-level matching (what area is this slice looking at); the
object scorer mimics detector output (a comma list of visible object labels,
biggest first) matched against the instruction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from omninav.panorama import SliceSet
from omninav.scoring import cosine, embed_text, embed_weighted, tokenize
from omninav.world import (
    RobotState,
    WorldModel,
    _disc_hit_dists,
    _first_hits,
    _seg_hit_dists,
)

_EPS = 1e-9


@dataclass(frozen=True)
class SliceView:
    """What one panorama slice can see.

    objects: (label, apparent_rad, distance) sorted by apparent size, largest
    first. regions: (name, coverage) where coverage is the depth-weighted
    share of the slice's view inside that region; fractions sum to <= 1.
    """

    objects: tuple[tuple[str, float, float], ...]
    regions: tuple[tuple[str, float], ...]

    def sentence(self) -> str:
        return ", ".join(label for label, _, _ in self.objects)


@dataclass(frozen=True)
class VisibilitySummary:
    views: tuple[SliceView, ...]

    def __len__(self) -> int:
        return len(self.views)

    def to_dict(self) -> dict:
        return {
            "slices": [
                {
                    "objects": [[label, round(a, 6), round(d, 6)] for label, a, d in v.objects],
                    "regions": [[name, round(c, 6)] for name, c in v.regions],
                }
                for v in self.views
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VisibilitySummary":
        views = []
        for sd in data["slices"]:
            views.append(
                SliceView(
                    objects=tuple(
                        (str(label), float(a), float(d)) for label, a, d in sd.get("objects", [])
                    ),
                    regions=tuple((str(n), float(c)) for n, c in sd.get("regions", [])),
                )
            )
        return cls(views=tuple(views))


def _region_chords(
    origin: np.ndarray, dirs: np.ndarray, t_term: np.ndarray, verts: np.ndarray, normals: np.ndarray
) -> np.ndarray:
    """Length of each ray's free segment inside one convex region (Cyrus-Beck)."""
    num = np.sum((verts - origin) * normals, axis=1)  # (K,)
    den = dirs @ normals.T  # (R, K)
    entering = den < -_EPS
    exiting = den > _EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = num[None, :] / den
    t_lo = np.where(entering, ratio, -np.inf).max(axis=1)
    t_hi = np.where(exiting, ratio, np.inf).min(axis=1)
    t_lo = np.maximum(t_lo, 0.0)
    t_hi = np.minimum(t_hi, t_term)
    outside = (~entering & ~exiting & (num[None, :] < -_EPS)).any(axis=1)
    chord = np.clip(t_hi - t_lo, 0.0, None)
    return np.where(outside, 0.0, chord)


def compute_visibility(
    world: WorldModel,
    state: RobotState,
    slices: SliceSet,
    rays_per_slice: int = 32,
    max_range: float = 5.0,
) -> VisibilitySummary:
    """Cast rays through every slice's field of view and summarize the hits.

    Rays stop at walls and tall entities; low entities register without
    blocking what lies beyond them. Each ray's region credit goes to the
    single region holding the longest chord of its free segment.
    """
    n = len(slices.slices)
    r = rays_per_slice
    half = slices.angular_width / 2.0
    offsets = -half + slices.angular_width * (np.arange(r) + 0.5) / r
    phis = np.asarray(slices.angles())[:, None] + offsets[None, :]  # (N, R)
    angles = (state.yaw + phis).reshape(-1)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    origin = np.array([state.x, state.y])

    t_term = _first_hits(origin, dirs, world._terminal_segs, world._terminal_discs)
    t_term = np.minimum(t_term, max_range)

    ent_t = []
    for kind, geo in world._entity_geo:
        if kind == "disc":
            t_e = _disc_hit_dists(origin, dirs, geo)
        else:
            t_e = _seg_hit_dists(origin, dirs, geo)
        ent_t.append(np.where(t_e <= t_term + 1e-6, t_e, np.inf))
    if ent_t:
        ent_arr = np.stack(ent_t)  # (E, N*R)
        winner = ent_arr.argmin(axis=0)
        winner_t = ent_arr.min(axis=0)
    else:
        winner = np.zeros(n * r, dtype=int)
        winner_t = np.full(n * r, np.inf)

    chords = []
    for verts, normals in world._region_geo:
        chords.append(_region_chords(origin, dirs, t_term, verts, normals))
    if chords:
        chord_arr = np.stack(chords)  # (G, N*R)
        dom = chord_arr.argmax(axis=0)
        dom_len = chord_arr.max(axis=0)
    else:
        dom = np.zeros(n * r, dtype=int)
        dom_len = np.zeros(n * r)
    # normalize by max_range, not by the free-path length: a short ray ending
    # on an obstacle just past a region boundary should not register as a
    # region-dominated view
    dom_frac = np.where(dom_len > _EPS, dom_len / max_range, 0.0)

    views = []
    per_ray_width = slices.angular_width / r
    for i in range(n):
        sel = slice(i * r, (i + 1) * r)
        objs = []
        if ent_t:
            w = winner[sel]
            wt = winner_t[sel]
            seen = np.isfinite(wt)
            for e_idx in np.unique(w[seen]):
                mask = seen & (w == e_idx)
                apparent = float(mask.sum()) * per_ray_width
                dist = float(wt[mask].min())
                objs.append((world.entities[e_idx].label, apparent, dist))
        objs.sort(key=lambda o: (-o[1], o[2], o[0]))
        regs = []
        if chords:
            d = dom[sel]
            f = dom_frac[sel]
            for g_idx in range(len(world.regions)):
                cov = float(f[d == g_idx].sum()) / r
                if cov > 1e-6:
                    regs.append((world.regions[g_idx].name, cov))
        views.append(SliceView(objects=tuple(objs), regions=tuple(regs)))
    return VisibilitySummary(views=tuple(views))


def _vocab_vector(terms: tuple[str, ...]) -> np.ndarray:
    counts: dict[str, float] = {}
    for term in terms:
        for tok in tokenize(term):
            counts[tok] = counts.get(tok, 0.0) + 1.0
    return embed_weighted(counts)


class RegionOracle:
    """Scene-level scorer: instruction vs the vocabularies of visible regions."""

    scorer_id = "clip"

    def __init__(self, world: WorldModel):
        self._region_vecs = {r.name: _vocab_vector(r.vocab) for r in world.regions}
        self._background = _vocab_vector(world.background_vocab)

    def raw_scores(self, instruction: str, slices: SliceSet, context: VisibilitySummary):
        query = embed_text(instruction)
        out = []
        for view in context.views:
            mix = np.zeros_like(self._background)
            total = 0.0
            for name, cov in view.regions:
                vec = self._region_vecs.get(name)
                if vec is None:
                    continue
                mix = mix + cov * vec
                total += cov
            mix = mix + max(0.0, 1.0 - total) * self._background
            norm = float(np.linalg.norm(mix))
            out.append(float(query @ mix / norm) if norm > 0 else 0.0)
        return out


class ObjectOracle:
    """Detector-level scorer: instruction vs a comma list of visible labels."""

    scorer_id = "detic"

    def raw_scores(self, instruction: str, slices: SliceSet, context: VisibilitySummary):
        query = embed_text(instruction)
        return [float(cosine(query, embed_text(v.sentence())) if v.objects else 0.0) for v in context.views]


def default_scorers(world: WorldModel) -> dict:
    return {"clip": RegionOracle(world), "detic": ObjectOracle()}
