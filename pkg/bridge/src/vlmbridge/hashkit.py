"""Deterministic hashed bag-of-words embeddings.

This is the same construction the gateway's built-in scorers use, rebuilt
here from its published behavior: lowercase alphanumeric tokens, an FNV-1a
64-bit hash (seed folded into the offset) picking one of 512 buckets, token
weights accumulated then L2-normalized. Keeping the arithmetic identical —
same constants, same accumulation order, same normalization — makes bridge
scores reproducible against the frozen sentence/embedding fixtures without
importing the gateway's code.
"""

from __future__ import annotations

import re

import numpy as np

EMBED_DIM = 512
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = (1 << 64) - 1
_SEED = 0x5EED0001
_TOKEN_RE = re.compile(r"[a-z0-9]+")


def fnv1a_bytes(data: bytes) -> int:
    h = _FNV_OFFSET ^ _SEED
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _FNV_MASK
    return h


def fnv1a(token: str) -> int:
    return fnv1a_bytes(token.encode("utf-8"))


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def embed_weighted(weights: dict[str, float]) -> np.ndarray:
    """Bucketed token weights, L2-normalized; an empty bag stays all-zero."""
    vec = np.zeros(EMBED_DIM, dtype=np.float64)
    for token, weight in weights.items():
        vec[fnv1a(token) % EMBED_DIM] += weight
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def embed_text(text: str) -> np.ndarray:
    weights: dict[str, float] = {}
    for token in tokenize(text):
        weights[token] = weights.get(token, 0.0) + 1.0
    return embed_weighted(weights)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Plain dot product; inputs are pre-normalized (or deliberately zero)."""
    return float(np.dot(u, v))
