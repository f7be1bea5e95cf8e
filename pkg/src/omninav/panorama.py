"""Equirectangular band geometry: azimuth calibration, cropping, cyclic slicing.

Conventions: the horizontal axis is cyclic and spans a full turn. Column W/2
looks straight ahead (azimuth 0), column 0 looks backward (azimuth +pi), and
azimuth decreases as the column index grows, because image x runs clockwise
while robot yaw is counterclockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Panorama:
    """Equirectangular image band with a cyclic horizontal axis.

    ``pixels`` is H x W x 3 float32 in [0, 1], or None for geometry-only use
    (the simulator never renders pixels but still needs the azimuth map).
    """

    width: int
    height: int
    pixels: np.ndarray | None = None
    cyclic: bool = True

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise GeometryError("panorama dimensions must be positive")
        if self.pixels is not None:
            h, w = self.pixels.shape[:2]
            if (w, h) != (self.width, self.height):
                raise GeometryError(
                    f"pixel array {w}x{h} does not match declared {self.width}x{self.height}"
                )

    @classmethod
    def from_pixels(cls, pixels: np.ndarray) -> "Panorama":
        h, w = pixels.shape[:2]
        return cls(width=w, height=h, pixels=pixels)

    @classmethod
    def geometry(cls, width: int = 2000, height: int = 500) -> "Panorama":
        return cls(width=width, height=height, pixels=None)

    def azimuth_of_column(self, col):
        """Affine map column -> azimuth (radians). azimuth(0)=+pi, azimuth(W/2)=0.

        Accepts scalars or arrays.
        """
        return np.pi * (1.0 - 2.0 * col / self.width)

    def column_of_azimuth(self, phi: float) -> float:
        """Inverse of azimuth_of_column, onto one period [0, W)."""
        col = (math.pi - phi) * self.width / (2.0 * math.pi)
        return col % self.width


@dataclass(frozen=True)
class Slice:
    """One angular window: wrapped pixel spans plus its center direction."""

    index: int
    center_col: float
    phi: float
    b: tuple[float, float]
    spans: tuple[tuple[int, int], ...]  # half-open [start, end) column ranges

    def contains_column(self, col: float) -> bool:
        return any(s <= col < e for s, e in self.spans)

    @property
    def width_px(self) -> int:
        return sum(e - s for s, e in self.spans)


@dataclass(frozen=True)
class SliceSet:
    slices: tuple[Slice, ...]
    n_split: int
    overlap_frac: float
    pano_width: int
    angular_width: float = field(default=0.0)

    def __len__(self) -> int:
        return self.n_split

    def directions(self) -> np.ndarray:
        """(N, 2) array of unit center directions b_i."""
        return np.array([s.b for s in self.slices], dtype=float)

    def angles(self) -> np.ndarray:
        return np.array([s.phi for s in self.slices], dtype=float)


def crop_band(p: Panorama, top: int | None = None, height: int = 500) -> Panorama:
    """Keep ``height`` rows starting at ``top`` (default: vertically centered).

    The azimuth map is untouched; only rows are removed.
    """
    if height <= 0:
        raise GeometryError("crop band is empty")
    if top is None:
        top = (p.height - height) // 2
    if top < 0 or top + height > p.height:
        raise GeometryError(f"crop band [{top}, {top + height}) outside image of height {p.height}")
    pixels = p.pixels[top : top + height] if p.pixels is not None else None
    return Panorama(width=p.width, height=height, pixels=pixels, cyclic=p.cyclic)


def _wrap_span(start: int, end: int, width: int) -> tuple[tuple[int, int], ...]:
    """Normalize a possibly out-of-range half-open span into <= 2 in-range spans."""
    length = min(end - start, width)  # length first: the modulo moves start
    start %= width
    end = start + length
    if end <= width:
        return ((start, end),)
    return ((start, width), (0, end - width))


def make_slices(p: Panorama, n_split: int, overlap_frac: float = 0.0) -> SliceSet:
    """Split the band into n_split windows with a shared overlap fraction.

    Slice i is centered at column (i + 1/2) * W / n_split and covers width
    (W / n_split) * (1 + overlap_frac); ranges wrap cyclically. Deterministic
    and independent of pixel content.
    """
    if n_split < 2:
        raise GeometryError("n_split must be >= 2")
    if not 0.0 <= overlap_frac < 1.0:
        raise GeometryError("overlap_frac must be in [0, 1)")
    w = p.width
    slice_w = (w / n_split) * (1.0 + overlap_frac)
    if slice_w > w:
        raise GeometryError("slice width exceeds panorama width")
    slices = []
    for i in range(n_split):
        center = (i + 0.5) * w / n_split
        start = math.floor(center - slice_w / 2.0)
        end = math.ceil(center + slice_w / 2.0)
        phi = p.azimuth_of_column(center)
        slices.append(
            Slice(
                index=i,
                center_col=center,
                phi=phi,
                b=(math.cos(phi), math.sin(phi)),
                spans=_wrap_span(start, end, w),
            )
        )
    return SliceSet(
        slices=tuple(slices),
        n_split=n_split,
        overlap_frac=overlap_frac,
        pano_width=w,
        angular_width=(2.0 * math.pi / n_split) * (1.0 + overlap_frac),
    )
