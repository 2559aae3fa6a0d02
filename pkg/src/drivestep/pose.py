"""Robot poses on the (x, y, orientation, footprint) lattice."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

N_ORIENTATIONS = 64
ORIENTATION_STEP = 2.0 * math.pi / N_ORIENTATIONS

FOOT_NAMES = ("front_left", "front_right", "rear_left", "rear_right")
# (longitudinal, lateral) sign of each foot in the body frame
FOOT_SIGNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
FRONT_FEET = (0, 1)
REAR_FEET = (2, 3)


def heading(theta: int) -> float:
    return (theta % N_ORIENTATIONS) * ORIENTATION_STEP


def orientation_index(angle: float) -> int:
    """Nearest discrete orientation for an angle in radians."""
    return int(round(angle / ORIENTATION_STEP)) % N_ORIENTATIONS


def angdiff(a: float, b: float) -> float:
    """Absolute angular difference in [0, pi]."""
    d = math.fmod(abs(a - b), 2.0 * math.pi)
    return 2.0 * math.pi - d if d > math.pi else d


def same_side_partner(foot: int) -> int:
    """The other foot on the same robot side (front-left <-> rear-left, ...)."""
    return (foot + 2) % 4


def opposite_side(foot: int) -> tuple[int, int]:
    return (1, 3) if FOOT_SIGNS[foot][1] > 0 else (0, 2)


class RobotPose(NamedTuple):
    """Base cell, orientation index and the four foot cells.

    Feet are ordered front-left, front-right, rear-left, rear-right.
    """

    x: int
    y: int
    theta: int
    feet: tuple

    def with_foot(self, index: int, cell) -> "RobotPose":
        feet = list(self.feet)
        feet[index] = tuple(cell)
        return RobotPose(self.x, self.y, self.theta, tuple(feet))


@dataclass(frozen=True)
class RobotGeometry:
    """Kinematic layout of the robot.

    ``foot_dx``/``foot_dy`` are the neutral foot offsets from the base center
    (longitudinal, lateral). ``max_reach`` bounds the longitudinal displacement
    of a foot from its neutral position.
    """

    foot_dx: float = 0.4
    foot_dy: float = 0.3
    footprint_width: float | None = None
    max_reach: float = 0.6
    com_offset: tuple = (0.0, 0.0)
    driving_leg_height: float = 0.27
    stepping_leg_height: float = 0.45
    max_leg_length: float = 0.8

    def __post_init__(self):
        if self.footprint_width is None:
            object.__setattr__(self, "footprint_width", 2.0 * self.foot_dy)
        object.__setattr__(self, "com_offset", tuple(float(v) for v in self.com_offset))
        for name in ("foot_dx", "foot_dy", "max_reach", "footprint_width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class PoseFrame:
    """Precomputed per-orientation tables for one geometry and resolution."""

    geometry: RobotGeometry
    resolution: float
    body_offsets: tuple = (0.2, -0.2)
    neutral: tuple = field(init=False, repr=False)
    units: tuple = field(init=False, repr=False)
    discs: tuple = field(init=False, repr=False)

    def __post_init__(self):
        neutral, units, discs = _tables(
            self.geometry.foot_dx, self.geometry.foot_dy, self.resolution, tuple(self.body_offsets)
        )
        object.__setattr__(self, "neutral", neutral)
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "discs", discs)

    def neutral_feet(self, x: int, y: int, theta: int) -> tuple:
        return tuple((x + dx, y + dy) for dx, dy in self.neutral[theta])

    def neutral_pose(self, x: int, y: int, theta: int) -> RobotPose:
        theta %= N_ORIENTATIONS
        return RobotPose(x, y, theta, self.neutral_feet(x, y, theta))

    def is_neutral(self, pose: RobotPose) -> bool:
        x, y = pose.x, pose.y
        for (fx, fy), (dx, dy) in zip(pose.feet, self.neutral[pose.theta]):
            if fx - x != dx or fy - y != dy:
                return False
        return True

    def foot_is_neutral(self, pose: RobotPose, foot: int) -> bool:
        dx, dy = self.neutral[pose.theta][foot]
        fx, fy = pose.feet[foot]
        return fx - pose.x == dx and fy - pose.y == dy

    def foot_displacement(self, pose: RobotPose, foot: int) -> tuple[float, float]:
        """(longitudinal, lateral) offset of a foot from its neutral cell, meters."""
        ux, uy = self.units[pose.theta]
        dx, dy = self.neutral[pose.theta][foot]
        fx, fy = pose.feet[foot]
        ex = (fx - pose.x - dx) * self.resolution
        ey = (fy - pose.y - dy) * self.resolution
        return ex * ux + ey * uy, -ex * uy + ey * ux

    def body_point(self, pose: RobotPose, cell) -> tuple[float, float]:
        """Body-frame metric coordinates of a map cell relative to the base cell."""
        ux, uy = self.units[pose.theta]
        ex = (cell[0] - pose.x) * self.resolution
        ey = (cell[1] - pose.y) * self.resolution
        return ex * ux + ey * uy, -ex * uy + ey * ux

    def disc_centers(self, pose: RobotPose) -> tuple:
        return tuple((pose.x + dx, pose.y + dy) for dx, dy in self.discs[pose.theta])


@lru_cache(maxsize=None)
def _tables(foot_dx, foot_dy, resolution, body_offsets):
    neutral, units, discs = [], [], []
    for t in range(N_ORIENTATIONS):
        c, s = math.cos(heading(t)), math.sin(heading(t))
        units.append((c, s))
        feet = []
        for lon, lat in FOOT_SIGNS:
            bx, by = lon * foot_dx, lat * foot_dy
            # rint is symmetric, so opposite feet stay mirror images in cells
            feet.append((int(np.rint((c * bx - s * by) / resolution)),
                         int(np.rint((s * bx + c * by) / resolution))))
        neutral.append(tuple(feet))
        discs.append(tuple((int(np.rint(c * off / resolution)), int(np.rint(s * off / resolution)))
                           for off in body_offsets))
    return tuple(neutral), tuple(units), tuple(discs)
