"""Built-in terrain generators and planning scenarios.

All maps use 2.5 cm cells unless stated otherwise. Generators that draw
random terrain take an explicit seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pose import orientation_index
from .terrain import DEFAULT_RESOLUTION, HeightMap


@dataclass(frozen=True)
class ScenarioSpec:
    """A map together with metric start and goal poses (x, y, theta)."""

    name: str
    map: HeightMap
    start: tuple
    goal: tuple
    overrides: dict | None = None

    def poses(self, frame):
        return to_pose(frame, self.map, self.start), to_pose(frame, self.map, self.goal)


def to_pose(frame, hmap: HeightMap, xyt):
    x, y, theta = xyt
    cx, cy = hmap.cell_of(x, y)
    return frame.neutral_pose(cx, cy, orientation_index(theta))


def _grid(width_m, height_m, res):
    nx = int(round(width_m / res))
    ny = int(round(height_m / res))
    ys, xs = np.mgrid[0:ny, 0:nx]
    return (xs + 0.5) * res, (ys + 0.5) * res


def _box(h, X, Y, x0, x1, y0, y1, height):
    h[(X >= x0) & (X < x1) & (Y >= y0) & (Y < y1)] = height


def flat_map(width_m=2.0, height_m=2.0, res=DEFAULT_RESOLUTION, level=0.0) -> HeightMap:
    X, _ = _grid(width_m, height_m, res)
    return HeightMap.from_array(np.full(X.shape, float(level)), res)


def ramp_map(width_m=2.0, height_m=2.0, slope=0.5, yaw=0.0, res=DEFAULT_RESOLUTION) -> HeightMap:
    """Planar ramp with gradient ``slope`` (rise over run) pointing along ``yaw``."""
    X, Y = _grid(width_m, height_m, res)
    return HeightMap.from_array(slope * (X * math.cos(yaw) + Y * math.sin(yaw)), res)


def platform_map(res=DEFAULT_RESOLUTION, platform_height=0.2, clutter=True) -> HeightMap:
    """Narrow corridor ending at an elevated platform that opens up sideways.

    The corridor walls were never mapped and are left unknown. With
    ``clutter`` a crate stands on the platform beside the corridor exit.
    """
    X, Y = _grid(3.2, 1.8, res)
    h = np.zeros(X.shape)
    edge = 1.7
    h[X >= edge] = platform_height
    if clutter:
        _box(h, X, Y, 2.1, 2.35, 0.1, 0.35, platform_height + 0.35)
    h[(X < edge) & ((Y < 0.3) | (Y >= 1.5))] = np.nan
    return HeightMap.from_array(h, res)


def platform_scenario(res=DEFAULT_RESOLUTION) -> ScenarioSpec:
    return ScenarioSpec("platform", platform_map(res), (1.0, 0.9, 0.0), (2.65, 1.25, 0.0))


def calibration_map(res=DEFAULT_RESOLUTION, platform_height=0.2, detour=1.5) -> HeightMap:
    """A 0.2 m platform in one lane and a ramp up to it in a parallel lane.

    The lanes are ``detour / 2`` apart so driving over the ramp adds about
    ``detour`` meters of sideways travel compared with stepping straight up.
    """
    lane_gap = 0.5 * detour
    width_y = 0.9 + lane_gap + 0.9
    X, Y = _grid(3.0, width_y, res)
    h = np.zeros(X.shape)
    edge = 1.6
    ramp_start = 0.9
    h[X >= edge] = platform_height
    ramp_lane = Y >= 0.9 + lane_gap - 0.45
    rising = ramp_lane & (X >= ramp_start) & (X < edge)
    h[rising] = platform_height * (X[rising] - ramp_start) / (edge - ramp_start)
    return HeightMap.from_array(h, res)


def calibration_scenario(res=DEFAULT_RESOLUTION, detour=1.5) -> ScenarioSpec:
    return ScenarioSpec("calibration", calibration_map(res, detour=detour), (1.0, 0.55, 0.0), (2.3, 0.55, 0.0))


def staircase_map(res=DEFAULT_RESOLUTION, riser=0.15) -> HeightMap:
    """Two-riser staircase onto a landing crossed by a bar obstacle.

    The stairs are only as wide as the robot lane and a tall block stands
    beside them. The strips in front of and behind the bar are shorter than
    the robot, so reaching the goal means straddling the bar and driving
    sideways with the bar between the front and rear legs.
    """
    X, Y = _grid(3.5, 2.6, res)
    h = np.zeros(X.shape)
    h[X >= 1.3] = riser
    h[X >= 1.8] = 2 * riser
    h[(Y >= 1.2) & (X < 1.8)] = 0.8  # solid block beside the stairs
    _box(h, X, Y, 2.6, 2.7, 0.0, 9.0, 2 * riser + 0.12)
    return HeightMap.from_array(h, res)


def staircase_scenario(res=DEFAULT_RESOLUTION) -> ScenarioSpec:
    return ScenarioSpec("staircase", staircase_map(res), (0.7, 0.6, 0.0), (2.65, 1.8, 0.0))


def random_map(seed: int, size_m=5.0, res=DEFAULT_RESOLUTION, n_obstacles=8) -> HeightMap:
    """Flat ground with sparse random boxes and poles."""
    rng = np.random.default_rng(seed)
    X, Y = _grid(size_m, size_m, res)
    h = np.zeros(X.shape)
    for _ in range(n_obstacles):
        cx, cy = rng.uniform(0.3, size_m - 0.3, size=2)
        sx, sy = rng.uniform(0.05, 0.4, size=2)
        _box(h, X, Y, cx - sx / 2, cx + sx / 2, cy - sy / 2, cy + sy / 2, rng.uniform(0.02, 0.4))
    return HeightMap.from_array(h, res)


def random_scenario(seed: int, frame_factory=None, size_m=5.0, res=DEFAULT_RESOLUTION,
                    max_separation=0.6, max_pose_cost=1.5) -> ScenarioSpec:
    """Random map with start and goal drawn near each other on open ground.

    Both poses must cost at most ``max_pose_cost``; a pose wedged against an
    obstacle is legal but makes exhaustive search over the map very slow.
    """
    from .costmap import CostMap  # local import keeps this module light

    hmap = random_map(seed, size_m, res)
    cm = CostMap(hmap) if frame_factory is None else frame_factory(hmap)
    rng = np.random.default_rng(10_000 + seed)
    for _ in range(1000):
        sx, sy = rng.uniform(0.8, size_m - 0.8, size=2)
        ang = rng.uniform(0, 2 * math.pi)
        d = rng.uniform(0.2, max_separation)
        gx, gy = sx + d * math.cos(ang), sy + d * math.sin(ang)
        st = rng.uniform(0, 2 * math.pi)
        gt = st + rng.uniform(-0.4, 0.4)
        start, goal = (sx, sy, st), (gx, gy, gt)
        ps, pg = to_pose(cm.frame, hmap, start), to_pose(cm.frame, hmap, goal)
        if cm.pose_cost(ps) <= max_pose_cost and cm.pose_cost(pg) <= max_pose_cost:
            return ScenarioSpec(f"random-{seed}", hmap, start, goal)
    raise RuntimeError(f"no free start/goal on random map {seed}")


BUILTIN = {
    "platform": platform_scenario,
    "calibration": calibration_scenario,
    "staircase": staircase_scenario,
}
