"""Dual-fisheye to equirectangular stitching.

Pipeline: vignette compensation -> per-half unwarp onto the unit sphere ->
rotation alignment of the rear half from control points -> feathered blend.
Front camera looks along +x, rear along -x; the panorama convention matches
``Panorama.azimuth_of_column`` (column 0 at azimuth +pi, decreasing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from omninav.panorama import GeometryError, Panorama

# camera frames: (optical axis, image right, image down) in robot coordinates
FRONT_FRAME = ((1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (0.0, 0.0, -1.0))
REAR_FRAME = ((-1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, -1.0))


class StitchError(RuntimeError):
    pass


@dataclass(frozen=True)
class LensModel:
    """Equidistant fisheye: image radius = focal * angle-from-axis."""

    focal: float  # px per radian
    fov: float  # radians
    size: int  # square image side, px

    def __post_init__(self) -> None:
        if not (math.pi < self.fov < 2.0 * math.pi):
            raise GeometryError(f"field of view {self.fov} outside (pi, 2*pi)")
        if self.focal <= 0 or self.size <= 0:
            raise GeometryError("focal and size must be positive")

    @classmethod
    def for_image(cls, size: int, fov_deg: float = 200.0, focal: float | None = None) -> "LensModel":
        fov = math.radians(fov_deg)
        if focal is None:
            # rim of the field of view lands on the inscribed circle
            focal = (size / 2.0) / (fov / 2.0)
        return cls(focal=focal, fov=fov, size=size)


@dataclass(frozen=True)
class FisheyePair:
    front: np.ndarray
    rear: np.ndarray
    lens: LensModel
    vignette: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        for name, img in (("front", self.front), ("rear", self.rear)):
            if img.ndim != 3 or img.shape[0] != img.shape[1]:
                raise GeometryError(f"{name} image must be square HxWx3")
        if self.front.shape != self.rear.shape:
            raise GeometryError("front and rear resolutions differ")
        if self.front.shape[0] != self.lens.size:
            raise GeometryError("lens size does not match images")


@dataclass(frozen=True)
class ControlPointSet:
    """Matched pixel pairs: (x, y) in the front unwarp, (x, y) in the rear unwarp."""

    pairs: tuple[tuple[tuple[float, float], tuple[float, float]], ...]

    def __post_init__(self) -> None:
        if len(self.pairs) < 3:
            raise GeometryError("need at least 3 control point pairs")

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class AlignResult:
    rotation: np.ndarray  # 3x3, maps rear-sphere rays onto front-sphere rays
    residual_rms: float  # radians, great-circle
    degenerate: bool = False

    @property
    def yaw(self) -> float:
        return float(math.atan2(self.rotation[1, 0], self.rotation[0, 0]))


def vignette_gain(r_norm: np.ndarray, c2: float, c4: float) -> np.ndarray:
    """Radial gain, unity at center; radius normalized to half the image side."""
    r2 = np.asarray(r_norm, dtype=float) ** 2
    return 1.0 + c2 * r2 + c4 * r2 * r2


def compensate_vignette(img: np.ndarray, c2: float, c4: float) -> np.ndarray:
    if img.ndim != 3 or img.shape[0] != img.shape[1]:
        raise GeometryError("vignette compensation expects a square HxWx3 image")
    rr = np.linspace(0.0, 1.0, 256)
    if vignette_gain(rr, c2, c4).min() <= 0.0:
        raise ValueError(f"vignette gain not positive over the lens disc (c2={c2}, c4={c4})")
    size = img.shape[0]
    coords = np.arange(size) + 0.5 - size / 2.0
    r_norm = np.hypot(coords[None, :], coords[:, None]) / (size / 2.0)
    out = img / vignette_gain(r_norm, c2, c4)[:, :, None]
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def bilinear_sample(img: np.ndarray, rows: np.ndarray, cols: np.ndarray, wrap_x: bool = False) -> np.ndarray:
    """Bilinear interpolation at float pixel-center coordinates.

    Rows always clamp; columns wrap cyclically when wrap_x (panoramas).
    """
    h, w = img.shape[:2]
    r0 = np.floor(rows).astype(int)
    c0 = np.floor(cols).astype(int)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[:, None]
    r0c = np.clip(r0, 0, h - 1)
    r1c = np.clip(r0 + 1, 0, h - 1)
    if wrap_x:
        c0c = np.mod(c0, w)
        c1c = np.mod(c0 + 1, w)
    else:
        c0c = np.clip(c0, 0, w - 1)
        c1c = np.clip(c0 + 1, 0, w - 1)
    top = img[r0c, c0c] * (1.0 - fc) + img[r0c, c1c] * fc
    bot = img[r1c, c0c] * (1.0 - fc) + img[r1c, c1c] * fc
    return top * (1.0 - fr) + bot * fr


def _pano_dirs(cols: np.ndarray, rows: np.ndarray, width: int, height: int) -> np.ndarray:
    """World rays for continuous panorama pixel coordinates (centers at integers)."""
    phi = np.pi * (1.0 - 2.0 * (np.asarray(cols, dtype=float) + 0.5) / width)
    lam = np.pi / 2.0 - np.pi * (np.asarray(rows, dtype=float) + 0.5) / height
    cl = np.cos(lam)
    return np.stack([cl * np.cos(phi), cl * np.sin(phi), np.sin(lam)], axis=-1)


def unwarp_fisheye(
    img: np.ndarray,
    lens: LensModel,
    frame: tuple = FRONT_FRAME,
    width: int = 2000,
    height: int = 1000,
) -> tuple[np.ndarray, np.ndarray]:
    """Project one fisheye onto the equirectangular grid.

    Returns the half panorama and a validity mask, true exactly where the
    pixel's world ray falls inside the lens field of view and the source
    sample lies inside the image square.
    """
    if img.ndim != 3 or img.shape[0] != img.shape[1]:
        raise GeometryError("fisheye image must be square HxWx3")
    axis, right, down = (np.asarray(v, dtype=float) for v in frame)
    jj, ii = np.meshgrid(np.arange(width), np.arange(height))
    d = _pano_dirs(jj.ravel(), ii.ravel(), width, height)
    ca = np.clip(d @ axis, -1.0, 1.0)
    theta = np.arccos(ca)
    inside = theta <= lens.fov / 2.0 + 1e-12
    psi = np.arctan2(d @ down, d @ right)
    rho = lens.focal * theta
    s = lens.size
    fc = rho * np.cos(psi) + s / 2.0 - 0.5
    fr = rho * np.sin(psi) + s / 2.0 - 0.5
    inside &= (fc >= -0.5) & (fc <= s - 0.5) & (fr >= -0.5) & (fr <= s - 0.5)
    out = np.zeros((width * height, img.shape[2]), dtype=np.float32)
    idx = np.nonzero(inside)[0]
    out[idx] = bilinear_sample(img, fr[idx], fc[idx], wrap_x=False)
    return out.reshape(height, width, img.shape[2]), inside.reshape(height, width)


def align_halves(
    front_unwarp: np.ndarray, rear_unwarp: np.ndarray, cps: ControlPointSet
) -> AlignResult:
    """Rotation of the rear sphere minimizing control-point misfit.

    Points map to unit rays through the equirectangular grid; the rotation is
    the orthogonal least-squares fit of rear rays onto front rays. Degenerate
    (collinear, effectively parallel-ray) sets fall back to a yaw-only fit.
    """
    h, w = front_unwarp.shape[:2]
    fpix = np.array([p[0] for p in cps.pairs], dtype=float)
    rpix = np.array([p[1] for p in cps.pairs], dtype=float)
    a = _pano_dirs(fpix[:, 0], fpix[:, 1], w, h)
    b = _pano_dirs(rpix[:, 0], rpix[:, 1], rear_unwarp.shape[1], rear_unwarp.shape[0])
    hmat = b.T @ a
    u, sv, vt = np.linalg.svd(hmat)
    degenerate = sv[1] <= 1e-9 * max(sv[0], 1e-30)
    if degenerate:
        sin_sum = float(np.sum(b[:, 0] * a[:, 1] - b[:, 1] * a[:, 0]))
        cos_sum = float(np.sum(b[:, 0] * a[:, 0] + b[:, 1] * a[:, 1]))
        gamma = math.atan2(sin_sum, cos_sum)
        cg, sg = math.cos(gamma), math.sin(gamma)
        rot = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    else:
        v = vt.T
        d = np.sign(np.linalg.det(v @ u.T))
        rot = v @ np.diag([1.0, 1.0, d]) @ u.T
    mapped = b @ rot.T
    dots = np.clip(np.sum(mapped * a, axis=1), -1.0, 1.0)
    residual = float(np.sqrt(np.mean(np.arccos(dots) ** 2)))
    return AlignResult(rotation=rot, residual_rms=residual, degenerate=bool(degenerate))


def _feather_row(
    fmask: np.ndarray, rmask: np.ndarray
) -> np.ndarray:
    """Front-image weight for one panorama row (cyclic feather over overlaps)."""
    w = fmask.shape[0]
    overlap = fmask & rmask
    weights = np.zeros(w, dtype=np.float32)
    weights[fmask & ~rmask] = 1.0
    if not overlap.any():
        return weights
    if overlap.all():
        weights[:] = 0.5
        return weights
    starts = np.nonzero(overlap & ~np.roll(overlap, 1))[0]
    for s in starts:
        length = 1
        while overlap[(s + length) % w]:
            length += 1
        ramp = (np.arange(length) + 0.5) / length
        left = (s - 1) % w
        if fmask[left] and not rmask[left]:
            vals = 1.0 - ramp  # leaving front territory
        elif rmask[left] and not fmask[left]:
            vals = ramp
        else:
            vals = np.full(length, 0.5)
        idx = (s + np.arange(length)) % w
        weights[idx] = vals
    return weights


def blend_halves(
    front_unwarp: np.ndarray,
    rear_unwarp: np.ndarray,
    masks: tuple[np.ndarray, np.ndarray],
    offset: np.ndarray | None = None,
) -> Panorama:
    """Feathered merge of the two unwarped halves into one panorama.

    ``offset`` (from align_halves) rotates the rear sphere before blending;
    the rear half is resampled along the rotated rays. Weight ramps linearly
    0 to 1 across each overlap band.
    """
    h, w = front_unwarp.shape[:2]
    fmask, rmask = masks
    rear = rear_unwarp
    if offset is not None and not np.allclose(offset, np.eye(3), atol=1e-12):
        jj, ii = np.meshgrid(np.arange(w), np.arange(h))
        d = _pano_dirs(jj.ravel(), ii.ravel(), w, h)
        b = d @ np.asarray(offset, dtype=float)  # R^T applied to each ray
        phi = np.arctan2(b[:, 1], b[:, 0])
        lam = np.arcsin(np.clip(b[:, 2], -1.0, 1.0))
        cols = w * (1.0 - phi / np.pi) / 2.0 - 0.5
        rows = h * (0.5 - lam / np.pi) - 0.5
        rear = bilinear_sample(rear_unwarp, rows, cols, wrap_x=True).reshape(h, w, -1).astype(np.float32)
        rm = bilinear_sample(rmask.astype(np.float32)[:, :, None], rows, cols, wrap_x=True)
        rmask = (rm.reshape(h, w) >= 0.999)
    if not (fmask & rmask).any():
        raise StitchError("no overlap between halves after alignment")
    weights = np.empty((h, w), dtype=np.float32)
    for i in range(h):
        weights[i] = _feather_row(fmask[i], rmask[i])
    wf = weights[:, :, None]
    out = front_unwarp * wf + rear * (1.0 - wf)
    out[~fmask & ~rmask] = 0.0
    return Panorama.from_pixels(np.clip(out, 0.0, 1.0).astype(np.float32))


def stitch_panorama(
    pair: FisheyePair,
    cps: ControlPointSet | None = None,
    width: int = 2000,
    height: int = 1000,
) -> tuple[Panorama, AlignResult | None]:
    """Full pipeline: compensate, unwarp both halves, align (optional), blend."""
    c2, c4 = pair.vignette
    front = compensate_vignette(pair.front, c2, c4)
    rear = compensate_vignette(pair.rear, c2, c4)
    fu, fm = unwarp_fisheye(front, pair.lens, FRONT_FRAME, width, height)
    ru, rm = unwarp_fisheye(rear, pair.lens, REAR_FRAME, width, height)
    align = align_halves(fu, ru, cps) if cps is not None else None
    offset = align.rotation if align is not None else None
    pano = blend_halves(fu, ru, (fm, rm), offset)
    return pano, align


def erode_mask(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    """Binary erosion with the 8-connected structuring element."""
    out = mask.copy()
    for _ in range(iterations):
        p = np.pad(out, 1, mode="constant", constant_values=False)
        out = (
            p[1:-1, 1:-1]
            & p[:-2, 1:-1]
            & p[2:, 1:-1]
            & p[1:-1, :-2]
            & p[1:-1, 2:]
            & p[:-2, :-2]
            & p[:-2, 2:]
            & p[2:, :-2]
            & p[2:, 2:]
        )
    return out


def rotz(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
