import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omninav.control import VelocityCommand
from omninav.world import (
    Entity,
    Region,
    RobotState,
    WorldError,
    WorldModel,
    load_world,
    ray_scan,
    save_world,
    step_kinematics,
    world_from_dict,
    world_to_dict,
)

BOX_WALLS = ((0.0, 0.0, 4.0, 0.0), (4.0, 0.0, 4.0, 4.0), (4.0, 4.0, 0.0, 4.0), (0.0, 4.0, 0.0, 0.0))


def _box_world(entities=(), regions=(), bounds=(0.0, 0.0, 4.0, 4.0), walls=BOX_WALLS):
    return WorldModel(bounds=bounds, walls=walls, entities=entities, regions=regions)


class TestEntity:
    def test_disc_requires_center_and_radius(self):
        with pytest.raises(WorldError):
            Entity(label="cup", kind="disc", center=(1.0, 1.0))
        with pytest.raises(WorldError):
            Entity(label="cup", kind="disc", center=(1.0, 1.0), radius=0.0)

    def test_polygon_requires_three_vertices(self):
        with pytest.raises(WorldError):
            Entity(label="desk", kind="polygon", vertices=((0, 0), (1, 0)))

    def test_unknown_kind_rejected(self):
        with pytest.raises(WorldError):
            Entity(label="cup", kind="sphere", center=(1.0, 1.0), radius=0.1)

    def test_height_vocabulary(self):
        with pytest.raises(WorldError):
            Entity(label="cup", kind="disc", center=(1.0, 1.0), radius=0.1, height="medium")

    def test_position(self):
        disc = Entity(label="cup", kind="disc", center=(1.0, 2.0), radius=0.1)
        assert disc.position() == (1.0, 2.0)
        poly = Entity(label="desk", kind="polygon", vertices=((0, 0), (2, 0), (2, 2), (0, 2)))
        assert poly.position() == pytest.approx((1.0, 1.0))


class TestRegion:
    def test_needs_vertices_and_vocab(self):
        with pytest.raises(WorldError):
            Region(name="a", polygon=((0, 0), (1, 0)), vocab=("a",))
        with pytest.raises(WorldError):
            Region(name="a", polygon=((0, 0), (1, 0), (1, 1)), vocab=())

    def test_centroid(self):
        r = Region(name="sq", polygon=((0, 0), (1, 0), (1, 1), (0, 1)), vocab=("sq",))
        assert r.centroid() == pytest.approx((0.5, 0.5))


class TestWorldModel:
    def test_basic_world_shape(self, basic_world):
        assert basic_world.bounds == (0.0, 0.0, 2.5, 1.6)
        assert len(basic_world.walls) == 4
        assert basic_world.entity_by_label("bookshelf").height == "tall"
        assert basic_world.entity_by_label("microwave oven").kind == "disc"
        assert {r.name for r in basic_world.regions} == {"kitchen", "shelf", "office"}
        assert basic_world.center() == pytest.approx((1.25, 0.8))

    def test_lookups_raise_on_missing(self, basic_world):
        with pytest.raises(KeyError):
            basic_world.region_by_name("garage")
        with pytest.raises(KeyError):
            basic_world.entity_by_label("toaster")

    def test_point_in_region(self, basic_world):
        assert basic_world.point_in_region("kitchen", 0.3, 0.8)
        assert not basic_world.point_in_region("kitchen", 2.0, 0.8)

    def test_bad_bounds_rejected(self):
        with pytest.raises(WorldError):
            WorldModel(bounds=(0, 0, 0, 1), walls=(), entities=(), regions=())

    def test_zero_length_wall_rejected(self):
        with pytest.raises(WorldError):
            _box_world(walls=((1.0, 1.0, 1.0, 1.0),))

    def test_entity_outside_bounds_rejected(self):
        far = Entity(label="cup", kind="disc", center=(9.0, 1.0), radius=0.1)
        with pytest.raises(WorldError):
            _box_world(entities=(far,))

    def test_region_outside_bounds_rejected(self):
        r = Region(name="out", polygon=((3, 3), (5, 3), (5, 5), (3, 5)), vocab=("x",))
        with pytest.raises(WorldError):
            _box_world(regions=(r,))

    def test_nonconvex_region_rejected(self):
        r = Region(
            name="dent",
            polygon=((0, 0), (2, 0), (2, 2), (1, 0.5), (0, 2)),
            vocab=("x",),
        )
        with pytest.raises(WorldError, match="convex"):
            _box_world(regions=(r,))

    def test_degenerate_polygon_rejected(self):
        r = Region(name="line", polygon=((0, 0), (1, 1), (2, 2)), vocab=("x",))
        with pytest.raises(WorldError, match="degenerate"):
            _box_world(regions=(r,))


class TestRayScan:
    def test_open_space_reads_max_range(self):
        world = WorldModel(bounds=(-2, -2, 2, 2), walls=(), entities=(), regions=())
        scan = ray_scan(world, RobotState(0.0, 0.0, 0.0), n_rays=360, max_range=5.0)
        assert len(scan) == 360
        assert scan.bearings[0] == pytest.approx(-math.pi, abs=1e-12)
        assert np.all(scan.distances == 5.0)

    def test_wall_dead_ahead(self):
        world = WorldModel(
            bounds=(-2, -6, 2, 6), walls=((1.0, -5.0, 1.0, 5.0),), entities=(), regions=()
        )
        scan = ray_scan(world, RobotState(0.0, 0.0, 0.0), n_rays=360)
        assert scan.bearings[180] == pytest.approx(0.0, abs=1e-12)
        assert scan.distances[180] == pytest.approx(1.0, abs=1e-9)
        assert scan.distances[0] == pytest.approx(5.0)  # nothing behind

    def test_bearings_are_robot_frame(self):
        # heading +y, so the wall at world +x shows up on the right (bearing -pi/2)
        world = WorldModel(
            bounds=(-2, -6, 2, 6), walls=((1.0, -5.0, 1.0, 5.0),), entities=(), regions=()
        )
        scan = ray_scan(world, RobotState(0.0, 0.0, math.pi / 2), n_rays=360)
        assert scan.bearings[90] == pytest.approx(-math.pi / 2, abs=1e-12)
        assert scan.distances[90] == pytest.approx(1.0, abs=1e-9)

    def test_low_entity_still_blocks_rays(self):
        low = Entity(label="kettle", kind="disc", center=(2.0, 3.0), radius=0.2, height="low")
        world = _box_world(entities=(low,))
        scan = ray_scan(world, RobotState(2.0, 2.0, 0.0), n_rays=360)
        # disc is one meter up the +y axis, bearing +pi/2 at index 270
        assert scan.distances[270] == pytest.approx(0.8, abs=1e-9)

    def test_ray_count_validated(self):
        world = _box_world()
        with pytest.raises(ValueError):
            ray_scan(world, RobotState(2.0, 2.0, 0.0), n_rays=7)

    @given(
        st.floats(min_value=0.3, max_value=2.2, allow_nan=False),
        st.floats(min_value=0.3, max_value=1.3, allow_nan=False),
        st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False),
    )
    @settings(max_examples=30, deadline=None)
    def test_distances_bounded(self, x, y, yaw):
        world = load_world_once()
        scan = ray_scan(world, RobotState(x, y, yaw), n_rays=90, max_range=5.0)
        assert np.all(scan.distances > 0.0)
        assert np.all(scan.distances <= 5.0)


_CACHED_WORLD = None


def load_world_once():
    # session fixture is off-limits inside @given; cache by hand
    global _CACHED_WORLD
    if _CACHED_WORLD is None:
        from conftest import WORLDS

        _CACHED_WORLD = load_world(WORLDS / "basic.world")
    return _CACHED_WORLD


class TestKinematics:
    def test_straight_line(self):
        s = step_kinematics(RobotState(0.0, 0.0, 0.0), VelocityCommand(1.0, 0.0), 0.1)
        assert s.pose == pytest.approx((0.1, 0.0, 0.0))
        assert not s.collided
        assert s.commanded == VelocityCommand(1.0, 0.0)

    def test_rotate_in_place(self):
        s = step_kinematics(RobotState(1.0, 1.0, 0.0), VelocityCommand(0.0, 1.0), 0.1)
        assert s.pose == pytest.approx((1.0, 1.0, 0.1))

    def test_translation_uses_pre_update_heading(self):
        s = step_kinematics(RobotState(0.0, 0.0, 0.0), VelocityCommand(1.0, 1.0), 0.5)
        assert s.x == pytest.approx(0.5)
        assert s.y == pytest.approx(0.0)
        assert s.yaw == pytest.approx(0.5)

    def test_yaw_wraps(self):
        s = step_kinematics(
            RobotState(0.0, 0.0, math.pi - 0.05), VelocityCommand(0.0, 1.0), 0.1
        )
        assert s.yaw == pytest.approx(-math.pi + 0.05, abs=1e-12)

    @given(
        st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        st.floats(min_value=0.01, max_value=0.5, allow_nan=False),
        st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False),
    )
    def test_step_length_is_speed_times_dt(self, v, dt, yaw):
        s0 = RobotState(0.0, 0.0, yaw)
        s1 = step_kinematics(s0, VelocityCommand(v, 0.0), dt)
        assert math.hypot(s1.x - s0.x, s1.y - s0.y) == pytest.approx(v * dt, abs=1e-9)

    def test_dt_validated(self):
        with pytest.raises(ValueError):
            step_kinematics(RobotState(0.0, 0.0, 0.0), VelocityCommand(1.0, 0.0), 0.0)

    def test_wall_blocks_and_holds_position(self):
        world = _box_world()
        # sweep would end 0.2 m from the x=4 wall, inside the 0.3 half-footprint
        s = step_kinematics(RobotState(3.5, 2.0, 0.0), VelocityCommand(1.0, 1.0), 0.3, world)
        assert (s.x, s.y) == (3.5, 2.0)
        assert s.collided
        assert s.yaw == pytest.approx(0.3)  # rotation still applies

    def test_grazing_within_half_footprint_blocked(self):
        world = _box_world()
        s = step_kinematics(RobotState(3.5, 2.0, 0.0), VelocityCommand(1.0, 0.0), 0.25, world)
        assert s.collided  # 0.25 m clearance < 0.3

    def test_clear_step_passes(self):
        world = _box_world()
        s = step_kinematics(RobotState(3.5, 2.0, 0.0), VelocityCommand(1.0, 0.0), 0.15, world)
        assert not s.collided
        assert s.x == pytest.approx(3.65)

    def test_holding_still_never_collides(self):
        world = _box_world()
        s = step_kinematics(RobotState(3.9, 2.0, 0.0), VelocityCommand(0.0, 0.5), 0.1, world)
        assert not s.collided

    def test_no_world_no_collision(self):
        s = step_kinematics(RobotState(3.5, 2.0, 0.0), VelocityCommand(10.0, 0.0), 1.0)
        assert s.x == pytest.approx(13.5)
        assert not s.collided


class TestSerialization:
    def test_dict_round_trip(self, basic_world):
        assert world_from_dict(world_to_dict(basic_world)) == basic_world

    def test_file_round_trip(self, basic_world, tmp_path):
        out = tmp_path / "copy.world"
        save_world(basic_world, out)
        assert load_world(out) == basic_world

    def test_malformed_json_reports_line(self, tmp_path):
        bad = tmp_path / "bad.world"
        bad.write_text('{\n  "bounds": [0, 0, 1,\n}')
        with pytest.raises(WorldError, match=r"bad\.world:3"):
            load_world(bad)

    def test_missing_file(self, tmp_path):
        with pytest.raises(WorldError, match="cannot read"):
            load_world(tmp_path / "nope.world")

    def test_bad_bounds_length(self):
        with pytest.raises(WorldError, match="bounds"):
            world_from_dict({"bounds": [0, 0, 1]})

    def test_missing_entity_fields_wrapped(self):
        data = {"bounds": [0, 0, 1, 1], "entities": [{"shape": {"kind": "disc"}}]}
        with pytest.raises(WorldError, match="malformed world data"):
            world_from_dict(data)
