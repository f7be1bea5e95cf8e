import math
from pathlib import Path

import pytest

from omninav.panorama import Panorama, Slice, SliceSet, make_slices
from omninav.world import WorldModel, load_world

WORLDS = Path(__file__).resolve().parents[1] / "src" / "omninav" / "worlds"


@pytest.fixture(scope="session")
def basic_world() -> WorldModel:
    return load_world(WORLDS / "basic.world")


@pytest.fixture(scope="session")
def advanced_world() -> WorldModel:
    return load_world(WORLDS / "advanced.world")


@pytest.fixture()
def band() -> Panorama:
    return Panorama.geometry(2000, 500)


@pytest.fixture()
def slices8(band) -> SliceSet:
    return make_slices(band, 8, 0.25)


def cardinal_slices(directions) -> SliceSet:
    """SliceSet with hand-picked center directions (unit or not), for control tests."""
    n = len(directions)
    width = 100 * n
    slices = []
    for i, b in enumerate(directions):
        phi = math.atan2(b[1], b[0])
        slices.append(
            Slice(
                index=i,
                center_col=(i + 0.5) * 100,
                phi=phi,
                b=(float(b[0]), float(b[1])),
                spans=((i * 100, (i + 1) * 100),),
            )
        )
    return SliceSet(
        slices=tuple(slices),
        n_split=n,
        overlap_frac=0.0,
        pano_width=width,
        angular_width=2.0 * math.pi / n,
    )
