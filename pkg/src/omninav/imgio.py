"""PNG and control-point file I/O for the stitching tools."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from omninav.stitch import ControlPointSet


def load_image(path: str | Path) -> np.ndarray:
    """Read a PNG (or anything Pillow opens) as float32 RGB in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def save_image(path: str | Path, img: np.ndarray) -> None:
    """Write a float [0, 1] RGB array as 8-bit PNG."""
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    data = np.clip(np.asarray(img, dtype=np.float64) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(str(path))


def load_control_points(path: str | Path) -> ControlPointSet:
    """Parse a control-point file: one `fx fy rx ry` line per pair.

    Blank lines and `#` comments are skipped; bad lines report their number.
    """
    pairs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 numbers, got {len(parts)}")
        try:
            fx, fy, rx, ry = (float(v) for v in parts)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        pairs.append(((fx, fy), (rx, ry)))
    return ControlPointSet(pairs=tuple(pairs))


def save_control_points(path: str | Path, cps: ControlPointSet) -> None:
    lines = [f"{f[0]:.4f} {f[1]:.4f} {r[0]:.4f} {r[1]:.4f}" for f, r in cps.pairs]
    Path(path).write_text("\n".join(lines) + "\n")
