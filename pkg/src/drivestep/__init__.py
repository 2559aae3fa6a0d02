"""Hybrid driving-stepping locomotion planning for legged robots with wheels.

The pipeline runs from a height map to foot and body costs, an anytime search
over an (x, y, heading, footprint) lattice, and finally the expansion of
abstract steps into statically stable keyframes.
"""

from .calibration import calibrate_step_weight
from .costmap import CostMap, CostModelParams, foot_cost, foot_cost_field
from .errors import (BudgetExhaustedError, CalibrationError, DriveStepError, ExpansionError,
                     MapParseError, NoPathError, ValidationError)
from .motiongen import ExecutablePath, Keyframe, MotionParams, expand_path
from .neighbours import Kind, Manoeuvre, NeighbourGenerator, PlannerParams, heuristic
from .pose import PoseFrame, RobotGeometry, RobotPose
from .scenarios import BUILTIN, ScenarioSpec
from .search import AbstractPath, plan, plan_final
from .terrain import HeightMap, load_height_map, parse_height_map, save_height_map

__all__ = [
    "AbstractPath", "BUILTIN", "BudgetExhaustedError", "CalibrationError", "CostMap", "CostModelParams",
    "DriveStepError", "ExecutablePath", "ExpansionError", "HeightMap", "Keyframe", "Kind", "Manoeuvre",
    "MapParseError", "MotionParams", "NeighbourGenerator", "NoPathError", "PlannerParams", "PoseFrame",
    "RobotGeometry", "RobotPose", "ScenarioSpec", "ValidationError", "calibrate_step_weight",
    "expand_path", "foot_cost", "foot_cost_field", "heuristic", "load_height_map", "parse_height_map",
    "plan", "plan_final", "save_height_map",
]
