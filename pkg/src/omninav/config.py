"""Runtime configuration: flat key=value files with typed accessors."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Parse a key=value config file. '#' starts a comment, blank lines skipped."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_KEY_MAP = {
    "lens.fov_deg": "fov_deg",
    "lens.focal": "focal",
    "vignette.c2": "vignette_c2",
    "vignette.c4": "vignette_c4",
    "crop.top": "crop_top",
    "crop.height": "crop_height",
    "slices.n": "n_split",
    "slices.overlap": "overlap_frac",
    "control.n_extract": "n_extract",
    "control.c_thre": "c_thre",
    "control.k": "k",
    "control.tick_s": "tick_s",
    "control.omni_speed": "omni_speed",
    "gate.stop_dist": "stop_dist",
    "gate.cone": "cone",
    "sim.rays_per_slice": "rays_per_slice",
    "sim.n_rays": "n_rays",
    "sim.max_range": "max_range",
}


@dataclass
class NavConfig:
    """Pipeline defaults; every field is overridable from a key=value file."""

    # lens / stitching
    fov_deg: float = 200.0
    focal: float | None = None  # px per radian; None derives from image size + fov
    vignette_c2: float = 0.0
    vignette_c4: float = 0.0
    crop_top: int | None = None  # None means vertically centered band
    crop_height: int = 500
    # slicing
    n_split: int = 8
    overlap_frac: float = 0.25
    # reflex control
    n_extract: int = 2
    c_thre: float = 0.6
    k: float = 0.5
    tick_s: float = 0.1
    omni_speed: float = 1.0
    # obstacle gate
    stop_dist: float = 0.4
    cone: float = 0.5
    # simulator sensing
    rays_per_slice: int = 32
    n_rays: int = 360
    max_range: float = 5.0
    extra: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "NavConfig":
        cfg = cls()
        cfg.update(parse_kv_file(path))
        return cfg

    def update(self, raw: dict[str, str]) -> None:
        types = {f.name: f.type for f in fields(self)}
        for key, value in raw.items():
            attr = _KEY_MAP.get(key)
            if attr is None:
                self.extra[key] = value
                continue
            ftype = types[attr]
            try:
                if "int" in ftype:
                    setattr(self, attr, int(value))
                elif "float" in ftype:
                    setattr(self, attr, float(value))
                else:
                    setattr(self, attr, value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
