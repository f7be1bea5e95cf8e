"""Synthetic image generation: test patterns and a forward fisheye renderer.

The renderer goes panorama -> fisheye, the opposite direction of the stitch
pipeline, and shares no code with it beyond the frame constants. That makes it
a usable ground-truth generator: render two fisheyes from a known panorama,
stitch them back, compare.
"""

from __future__ import annotations

import numpy as np

from omninav.stitch import (
    FRONT_FRAME,
    REAR_FRAME,
    LensModel,
    bilinear_sample,
    vignette_gain,
)


def checkerboard_panorama(
    width: int = 2000, height: int = 1000, nx: int = 16, ny: int = 8, softness: float = 0.35
) -> np.ndarray:
    """Soft-edged colored checkerboard in equirectangular layout.

    Edges are smoothed (tanh of a sine) and contrast fades toward the poles
    with sin(latitude-from-top); az fisheye pixel near a pole spans many
    columns, so hard polar detail could never survive a round trip.
    """
    jc = (np.arange(width) + 0.5) / width
    ic = (np.arange(height) + 0.5) / height
    gx = np.tanh(np.sin(2.0 * np.pi * nx * jc) / softness)
    gy = np.tanh(np.sin(2.0 * np.pi * ny * ic) / softness)
    c = 0.5 * (1.0 + gy[:, None] * gx[None, :])
    fade = np.sin(np.pi * ic)[:, None]
    c = 0.5 + (c - 0.5) * fade
    img = np.stack([c, 1.0 - c, 0.25 + 0.5 * c], axis=2)
    return img.astype(np.float32)


def pano_direction_grid(width: int, height: int) -> np.ndarray:
    """Unit world rays for every panorama pixel center, shape (H, W, 3)."""
    jc = (np.arange(width) + 0.5) / width
    ic = (np.arange(height) + 0.5) / height
    phi = np.pi * (1.0 - 2.0 * jc)[None, :]
    lam = (np.pi / 2.0 - np.pi * ic)[:, None]
    cl = np.cos(lam)
    d = np.empty((height, width, 3))
    d[:, :, 0] = cl * np.cos(phi)
    d[:, :, 1] = cl * np.sin(phi)
    d[:, :, 2] = np.broadcast_to(np.sin(lam), (height, width))
    return d


def sample_panorama(pano: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Bilinear-sample a panorama along world rays (wrap in azimuth)."""
    h, w = pano.shape[:2]
    flat = dirs.reshape(-1, 3)
    phi = np.arctan2(flat[:, 1], flat[:, 0])
    lam = np.arcsin(np.clip(flat[:, 2], -1.0, 1.0))
    cols = w * (1.0 - phi / np.pi) / 2.0 - 0.5
    rows = h * (0.5 - lam / np.pi) - 0.5
    out = bilinear_sample(pano, rows, cols, wrap_x=True)
    return out.reshape(dirs.shape[:-1] + (pano.shape[2],))


def render_fisheye(
    pano: np.ndarray,
    lens: LensModel,
    frame: tuple = FRONT_FRAME,
    rotation: np.ndarray | None = None,
    supersample: int = 2,
    vignette: tuple[float, float] | None = None,
) -> np.ndarray:
    """Render one fisheye view of a panorama (the stitch test oracle).

    ``rotation`` maps camera rays to world rays, letting tests inject a known
    mounting misalignment. ``supersample`` renders on a finer grid and
    box-averages down, keeping resampling error well below the thresholds the
    stitch pipeline is held to.
    """
    if supersample < 1:
        raise ValueError("supersample must be >= 1")
    axis, right, down = (np.asarray(v, dtype=float) for v in frame)
    s = lens.size * supersample
    half = s / 2.0
    coords = np.arange(s) + 0.5
    u = (coords - half)[None, :] / supersample  # image-plane px, right+
    v = (coords - half)[:, None] / supersample  # down+
    rho = np.hypot(u, v)
    theta = rho / lens.focal
    psi = np.arctan2(np.broadcast_to(v, (s, s)), np.broadcast_to(u, (s, s)))
    st = np.sin(theta)
    rays = (
        np.cos(theta)[:, :, None] * axis
        + (st * np.cos(psi))[:, :, None] * right
        + (st * np.sin(psi))[:, :, None] * down
    )
    if rotation is not None:
        rays = rays @ np.asarray(rotation, dtype=float).T
    img = sample_panorama(pano, rays)
    img[theta > lens.fov / 2.0] = 0.0
    if supersample > 1:
        c = img.shape[2]
        img = img.reshape(lens.size, supersample, lens.size, supersample, c).mean(axis=(1, 3))
    if vignette is not None:
        c2, c4 = vignette
        r_norm = np.hypot(
            (np.arange(lens.size) + 0.5 - lens.size / 2.0)[None, :],
            (np.arange(lens.size) + 0.5 - lens.size / 2.0)[:, None],
        ) / (lens.size / 2.0)
        img = img * vignette_gain(r_norm, c2, c4)[:, :, None]
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def render_pair(
    pano: np.ndarray,
    lens: LensModel,
    rear_rotation: np.ndarray | None = None,
    vignette: tuple[float, float] | None = None,
    supersample: int = 2,
) -> tuple[np.ndarray, np.ndarray]:
    """Front and rear fisheye renders of one panorama."""
    front = render_fisheye(pano, lens, FRONT_FRAME, None, supersample, vignette)
    rear = render_fisheye(pano, lens, REAR_FRAME, rear_rotation, supersample, vignette)
    return front, rear


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB for images in [0, 1]."""
    diff = (np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2
    if mask is not None:
        if not mask.any():
            raise ValueError("empty mask")
        diff = diff[mask]
    mse = float(diff.mean())
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))
