"""Instruction scoring: normalization, sentence building, hashed embeddings, fusion.

The per-slice raw similarities s_i from any scorer are affinely rescaled so the
minimum maps to 0.1 and the maximum to 1.0, which puts heterogeneous scorers on
one scale; the 0.1 floor keeps the fused product away from zero. Fusion is the
elementwise product of the two transformed profiles.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import NamedTuple, Protocol, Sequence, runtime_checkable

import numpy as np

from omninav.panorama import SliceSet

EMBED_DIM = 512
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = (1 << 64) - 1
_EMBED_SEED = 0x5EED0001  # fixed seed folded into the hash offset
_TOKEN_RE = re.compile(r"[a-z0-9]+")


class ScorerError(RuntimeError):
    """Raised by a scorer that could not produce scores (timeout, dead peer...)."""


@dataclass(frozen=True)
class Instruction:
    """Free-form natural-language command, e.g. "Go to the kitchen"."""

    text: str
    issued_at: float = 0.0

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("instruction text is empty")


@dataclass(frozen=True)
class Detection:
    """One detected object in expanded-image pixel coordinates."""

    label: str
    bbox: tuple[float, float, float, float]  # x, y, w, h
    confidence: float = 1.0

    def __post_init__(self) -> None:
        _, _, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise ValueError(f"degenerate bbox for {self.label!r}: {self.bbox}")

    @property
    def area(self) -> float:
        return self.bbox[2] * self.bbox[3]

    @property
    def center_col(self) -> float:
        return self.bbox[0] + self.bbox[2] / 2.0


@dataclass(frozen=True)
class ScoreProfile:
    """Per-slice scores of one scorer: raw cosines and their [0.1, 1] transform."""

    scorer_id: str
    raw: tuple[float, ...]
    transformed: tuple[float, ...]
    stale: bool = False

    def __len__(self) -> int:
        return len(self.raw)


@dataclass(frozen=True)
class FusedProfile:
    """Final per-slice evaluation values driving direction selection."""

    e: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.e)

    @classmethod
    def from_single(cls, profile: ScoreProfile) -> "FusedProfile":
        """Single-model strategy: the evaluation is that scorer's transform."""
        return cls(e=profile.transformed)


class ScorerOutput(NamedTuple):
    scores: Sequence[float]
    stale: bool = False


@runtime_checkable
class Scorer(Protocol):
    """Scorer contract: one raw similarity per slice for an instruction.

    ``context`` carries whatever the deployment observes: slice pixels for
    image scorers, a VisibilitySummary for the simulator oracles. A scorer may
    return a plain sequence or a ScorerOutput to flag a stale/fallback result,
    and raises ScorerError when it cannot answer at all.
    """

    scorer_id: str

    def raw_scores(self, instruction: str, slices: SliceSet, context) -> Sequence[float]:
        ...


def transform_scores(raw: Sequence[float]) -> list[float]:
    """Affine rescale so min -> 0.1 and max -> 1.0; equal scores all map to 1.0.

    The degenerate all-equal case is neutral under multiplicative fusion, so a
    scorer with nothing to say leaves selection to the other one.
    """
    if len(raw) == 0:
        raise ValueError("empty score vector")
    smin = min(raw)
    smax = max(raw)
    span = smax - smin
    if span == 0.0:
        return [1.0] * len(raw)
    return [min(1.0, max(0.1, 0.1 + 0.9 * (s - smin) / span)) for s in raw]


def detections_to_sentence(dets: Sequence[Detection]) -> str:
    """Join labels into a sentence, largest bounding box first.

    Ties keep the original detection order; an empty list gives "".
    """
    ordered = sorted(dets, key=lambda d: -d.area)
    return ", ".join(d.label for d in ordered)


def _fnv1a(token: str) -> int:
    h = _FNV_OFFSET ^ _EMBED_SEED
    for byte in token.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _FNV_MASK
    return h


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def embed_weighted(weights: dict[str, float]) -> np.ndarray:
    """Hashed bag-of-words with explicit token weights, L2-normalized.

    An all-zero bag embeds to the zero vector (deliberately non-unit), so its
    cosine with anything is 0.
    """
    vec = np.zeros(EMBED_DIM, dtype=np.float64)
    for token, weight in weights.items():
        vec[_fnv1a(token) % EMBED_DIM] += weight
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def embed_text(text: str) -> np.ndarray:
    """Deterministic stand-in for a sentence embedding: hashed token counts."""
    weights: dict[str, float] = {}
    for token in tokenize(text):
        weights[token] = weights.get(token, 0.0) + 1.0
    return embed_weighted(weights)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Plain dot product; embeddings are pre-normalized (zero vector allowed)."""
    return float(np.dot(u, v))


def split_detections(dets: Sequence[Detection], slices: SliceSet) -> list[list[Detection]]:
    """Assign each detection to every slice containing its bbox center column.

    Detections in an overlap band land in both neighbors; centers outside the
    image width are wrapped.
    """
    per_slice: list[list[Detection]] = [[] for _ in range(slices.n_split)]
    for det in dets:
        col = det.center_col % slices.pano_width
        for sl in slices.slices:
            if sl.contains_column(col):
                per_slice[sl.index].append(det)
    return per_slice


def score_slices(
    scorer: Scorer,
    instruction: Instruction,
    slices: SliceSet,
    context,
    last: ScoreProfile | None = None,
) -> ScoreProfile:
    """Run one scorer over all slices and transform the result.

    A failing scorer never stalls the control loop: the previous profile is
    reused (flagged stale), or a neutral all-1.0 profile when there is none.
    """
    try:
        out = scorer.raw_scores(instruction.text, slices, context)
    except ScorerError:
        if last is not None:
            return replace(last, stale=True)
        n = slices.n_split
        return ScoreProfile(
            scorer_id=scorer.scorer_id,
            raw=(0.0,) * n,
            transformed=(1.0,) * n,
            stale=True,
        )
    if isinstance(out, ScorerOutput):
        scores, stale = list(out.scores), out.stale
    else:
        scores, stale = list(out), False
    if len(scores) != slices.n_split:
        raise ValueError(
            f"scorer {scorer.scorer_id!r} returned {len(scores)} scores for {slices.n_split} slices"
        )
    return ScoreProfile(
        scorer_id=scorer.scorer_id,
        raw=tuple(float(s) for s in scores),
        transformed=tuple(transform_scores(scores)),
        stale=stale,
    )


def fuse(a_first: Sequence[float], a_second: Sequence[float]) -> FusedProfile:
    """Elementwise product of two transformed profiles."""
    if len(a_first) != len(a_second):
        raise ValueError(f"profile length mismatch: {len(a_first)} vs {len(a_second)}")
    return FusedProfile(e=tuple(x * y for x, y in zip(a_first, a_second)))
