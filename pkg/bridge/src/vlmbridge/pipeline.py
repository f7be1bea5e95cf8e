"""Turning score requests into per-slice scores.

Two scorer styles share this module. The image-similarity scorer embeds
each slice crop and compares it to the embedded instruction. The
detector-style scorer runs detection once over the expanded panorama band,
bins each detection into every slice whose column ranges contain its
bounding-box center, renders each slice's detections as a comma-joined
sentence (largest box first, ties keeping detector order), and compares
that sentence to the instruction.

Both also understand the simulator's "visibility" payloads, which carry
object labels and region coverages instead of pixels, so a bridge can
attach to a purely synthetic session and still produce meaningful scores.
"""

from __future__ import annotations

import base64
import binascii
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from vlmbridge.hashkit import cosine, embed_text, embed_weighted, tokenize


class ScoreError(RuntimeError):
    """The request cannot be answered; the message goes back as an error frame."""


class SliceDecodeError(ScoreError):
    """A slice image failed to decode; carries which slice."""

    def __init__(self, slice_index: int | str, reason: str) -> None:
        super().__init__(f"slice {slice_index} failed to decode: {reason}")
        self.slice_index = slice_index


@dataclass(frozen=True)
class Detection:
    """One detected object in expanded-band pixel coordinates."""

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


def detections_to_sentence(dets: Sequence[Detection]) -> str:
    """Comma-join labels, largest box first; ties keep input order; [] -> ""."""
    ordered = sorted(dets, key=lambda d: -d.area)
    return ", ".join(d.label for d in ordered)


def split_by_spans(
    dets: Sequence[Detection],
    spans: Sequence[Sequence[Sequence[float]]],
    band_width: int,
) -> list[list[Detection]]:
    """Assign each detection to every slice whose half-open column ranges
    contain its center column; centers wrap modulo the band width, and a
    center inside an overlap band lands in both neighbours."""
    per_slice: list[list[Detection]] = [[] for _ in spans]
    for det in dets:
        col = det.center_col % band_width
        for idx, slice_spans in enumerate(spans):
            if any(start <= col < end for start, end in slice_spans):
                per_slice[idx].append(det)
    return per_slice


def decode_png(b64_data: str, which: int | str) -> np.ndarray:
    """Base64 PNG -> float image in [0, 1]; failures carry the slice index."""
    from PIL import Image, UnidentifiedImageError

    try:
        raw = base64.b64decode(b64_data, validate=True)
    except (binascii.Error, TypeError, ValueError) as exc:
        raise SliceDecodeError(which, f"bad base64: {exc}") from exc
    try:
        with Image.open(io.BytesIO(raw)) as img:
            arr = np.asarray(img)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise SliceDecodeError(which, f"bad image data: {exc}") from exc
    return np.asarray(arr, dtype=np.float64) / 255.0


def _luminance(img: np.ndarray) -> np.ndarray:
    if img.ndim == 3:
        return img[..., :3].mean(axis=2)
    return img


@dataclass
class ClipScorer:
    """One similarity per slice: embedded crop (or view summary) vs instruction."""

    backend: "object"  # ScorerBackend; kept loose to avoid an import cycle

    def score(self, req: dict) -> list[float]:
        payload = req.get("payload") or {}
        n_split = int(req["n_split"])
        query = self.backend.embed_text(str(req.get("instruction", "")))
        kind = payload.get("kind")
        if kind == "pixels":
            crops = payload.get("slices", [])
            if len(crops) != n_split:
                raise ScoreError(f"expected {n_split} slice images, got {len(crops)}")
            out = []
            for idx, b64_png in enumerate(crops):
                img = decode_png(b64_png, idx)
                out.append(cosine(query, self.backend.embed_image(img)))
            return out
        if kind == "visibility":
            # Visibility payloads are textual already; both sides of the
            # cosine use the deterministic hash space whatever the backend.
            slices = payload.get("slices", [])
            if len(slices) != n_split:
                raise ScoreError(f"expected {n_split} slice records, got {len(slices)}")
            hash_query = embed_text(str(req.get("instruction", "")))
            out = []
            for record in slices:
                weights: dict[str, float] = {}
                for name, coverage in record.get("regions", []):
                    for token in tokenize(str(name)):
                        weights[token] = weights.get(token, 0.0) + float(coverage)
                out.append(cosine(hash_query, embed_weighted(weights)) if weights else 0.0)
            return out
        raise ScoreError(f"unsupported payload kind {kind!r}")


@dataclass
class DeticScorer:
    """Detector-style scoring: detect once, bin by center column, score sentences."""

    backend: "object"
    confidence_threshold: float = 0.5
    last_sentences: list[str] = field(default_factory=list, repr=False)

    def score(self, req: dict) -> list[float]:
        payload = req.get("payload") or {}
        n_split = int(req["n_split"])
        query = self.backend.embed_text(str(req.get("instruction", "")))
        kind = payload.get("kind")
        if kind == "pixels":
            expanded = decode_png(payload.get("expanded", ""), "expanded")
            spans = payload.get("spans", [])
            if len(spans) != n_split:
                raise ScoreError(f"expected {n_split} span lists, got {len(spans)}")
            dets = [
                d
                for d in self.backend.detect(expanded)
                if d.confidence >= self.confidence_threshold
            ]
            per_slice = split_by_spans(dets, spans, expanded.shape[1])
            self.last_sentences = [detections_to_sentence(group) for group in per_slice]
            return [
                cosine(query, self.backend.embed_text(sentence)) if group else 0.0
                for group, sentence in zip(per_slice, self.last_sentences)
            ]
        if kind == "visibility":
            slices = payload.get("slices", [])
            if len(slices) != n_split:
                raise ScoreError(f"expected {n_split} slice records, got {len(slices)}")
            hash_query = embed_text(str(req.get("instruction", "")))
            out = []
            self.last_sentences = []
            for record in slices:
                labels = [str(label) for label, _, _ in record.get("objects", [])]
                sentence = ", ".join(labels)
                self.last_sentences.append(sentence)
                out.append(cosine(hash_query, embed_text(sentence)) if labels else 0.0)
            return out
        raise ScoreError(f"unsupported payload kind {kind!r}")


def make_scorer(role: str, backend, confidence_threshold: float = 0.5):
    if role == "clip":
        return ClipScorer(backend)
    if role == "detic":
        return DeticScorer(backend, confidence_threshold=confidence_threshold)
    raise ValueError(f"unknown scorer role {role!r}; expected 'clip' or 'detic'")
