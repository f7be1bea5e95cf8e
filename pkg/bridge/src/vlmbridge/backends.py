"""Model backends behind the scorers.

A backend supplies three operations: embed text, embed an image into the
same space, and detect labeled objects in an image. The default "hash"
backend is deterministic and dependency-free, which keeps conformance
tests and synthetic sessions reproducible; heavyweight model backends plug
in through the same interface with their names, weight paths, and device
taken from a config file. A backend that cannot come up raises
BackendLoadError with the reason, and the bridge refuses to dial in.
"""

from __future__ import annotations

from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from vlmbridge.hashkit import EMBED_DIM, embed_text, fnv1a_bytes
from vlmbridge.pipeline import Detection

_GRID = 8


class BackendLoadError(RuntimeError):
    """The requested backend cannot be constructed; the message says why."""


@runtime_checkable
class ScorerBackend(Protocol):
    name: str

    def embed_text(self, text: str) -> np.ndarray:
        ...

    def embed_image(self, img: np.ndarray) -> np.ndarray:
        ...

    def detect(self, img: np.ndarray) -> Sequence[Detection]:
        ...


class HashBackend:
    """Deterministic stand-in: hashed tokens for text, and for images a
    unit vector drawn from a generator seeded by the image's pooled
    content.

    Identical images embed identically. Images whose 8x8 pooled luminance
    differs anywhere get different seeds, hence embeddings with a different
    similarity to any instruction. The dense draw gives image vectors
    support on every bucket, so image-text cosines are informative instead
    of structurally zero. Detection requires a real model; this backend
    reports none.
    """

    name = "hash"

    def embed_text(self, text: str) -> np.ndarray:
        return embed_text(text)

    def embed_image(self, img: np.ndarray) -> np.ndarray:
        arr = np.asarray(img, dtype=np.float64)
        if arr.ndim == 3:
            arr = arr[..., :3].mean(axis=2)
        if arr.ndim != 2 or arr.size == 0:
            return np.zeros(EMBED_DIM, dtype=np.float64)
        levels = bytearray()
        for row_band in np.array_split(arr, min(_GRID, arr.shape[0]), axis=0):
            for cell in np.array_split(row_band, min(_GRID, arr.shape[1]), axis=1):
                levels.append(min(255, max(0, int(float(cell.mean()) * 255.0))))
        rng = np.random.default_rng(fnv1a_bytes(bytes(levels)))
        vec = rng.standard_normal(EMBED_DIM)
        return vec / float(np.linalg.norm(vec))

    def detect(self, img: np.ndarray) -> Sequence[Detection]:
        return []


def load_backend(name: str | None, config: dict | None = None, device: str | None = None):
    """Construct the named backend; unknown names or missing weights fail
    loudly so the operator sees the reason instead of silent zeros."""
    config = config or {}
    chosen = name or str(config.get("backend", "hash"))
    if chosen == "hash":
        return HashBackend()
    weights = config.get(f"{chosen}_model") or config.get("model")
    if weights is not None and not Path(str(weights)).exists():
        raise BackendLoadError(
            f"backend {chosen!r}: model weights not found at {weights!r}"
        )
    raise BackendLoadError(
        f"backend {chosen!r} is not available in this build; available: 'hash'"
        + (f" (requested device {device!r})" if device else "")
    )
