"""Reflex-based open-vocabulary navigation.

Slices an omnidirectional panorama into angular windows, scores each window
against a free-form instruction with two complementary scorers, fuses the
scores, and maps the result reflexively to wheel velocities. Ships with a
2D semantic simulator, oracle scorers, a batch experiment harness, and a
network gateway for external scorers and live operation.
"""

from omninav.config import NavConfig
from omninav.control import (
    DirectionCommand,
    RangeScan,
    ReflexController,
    VelocityCommand,
    diff_drive_command,
    obstacle_gate,
    omni_command,
    select_direction,
)
from omninav.panorama import Panorama, Slice, SliceSet, crop_band, make_slices
from omninav.scoring import (
    Detection,
    FusedProfile,
    Instruction,
    ScoreProfile,
    detections_to_sentence,
    embed_text,
    fuse,
    score_slices,
    split_detections,
    transform_scores,
)
from omninav.world import RobotState, WorldModel, load_world, ray_scan, step_kinematics

__version__ = "0.1.0"
