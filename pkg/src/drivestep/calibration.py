"""Calibration of the step weight against a ramp detour.

The calibration map offers two ways onto a 0.2 m platform: stepping straight
up, or driving a ramp in a parallel lane. For a fixed path the planner cost is
affine in the step weight, ``drive + weight * stepping``, so the optimal
stepping cost is a concave, increasing function of the weight and the
crossover with the (weight-independent) ramp cost can be found by a
parametric update instead of blind bisection: each planner run yields the
optimal stepping path at the current weight, and the weight at which that path
ties with the ramp is a valid lower bound for the crossover. The update stops
once the stepping path no longer beats the ramp.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

from .costmap import CostMap
from .errors import CalibrationError, NoPathError
from .neighbours import STEPPING_KINDS, Kind, NeighbourGenerator, PlannerParams
from .pose import RobotGeometry
from .scenarios import calibration_scenario
from .search import plan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathSplit:
    """A path cost split into its weight-independent and stepping parts."""

    drive: float
    stepping: float
    steps: bool

    def cost(self, step_weight: float) -> float:
        return self.drive + step_weight * self.stepping


def split_path(path) -> PathSplit:
    drive = stepping = 0.0
    steps = False
    for m in path.manoeuvres:
        if m.kind in STEPPING_KINDS:
            stepping += m.raw_cost
        else:
            drive += m.cost
        steps = steps or m.kind is Kind.STEP
    return PathSplit(drive, stepping, steps)


def solve_optimal(costmap: CostMap, start, goal, params: PlannerParams):
    """Single weight-1 search, i.e. plain A*."""
    gen = NeighbourGenerator(costmap, params)
    return next(plan(costmap, start, goal, params, generator=gen, weights=[1.0]))


def calibrate_step_weight(geometry: RobotGeometry | None = None, params: PlannerParams | None = None,
                          detour: float = 1.5, resolution: float = 1e-2, max_rounds: int = 20) -> float:
    """Smallest step weight, on a ``resolution`` grid, for which the optimal
    path on the calibration map takes the ramp instead of stepping up."""
    params = params or PlannerParams()
    sc = calibration_scenario(detour=detour)
    cm = CostMap(sc.map, geometry=geometry)
    start, goal = sc.poses(cm.frame)
    try:
        ramp = solve_optimal(cm, start, goal, replace(params, stepping=False, step_weight=1.0))
    except NoPathError as exc:
        raise CalibrationError("calibration map has no ramp path") from exc
    ramp_cost = ramp.cost
    weight = 1.0
    path = split_path(solve_optimal(cm, start, goal, replace(params, step_weight=weight)))
    if not path.steps or path.cost(weight) >= ramp_cost:
        raise CalibrationError("planner does not step up at unit step weight")
    for _ in range(max_rounds):
        if path.stepping <= 0.0:
            raise CalibrationError("stepping path without stepping cost")
        weight = (ramp_cost - path.drive) / path.stepping
        log.info("stepping path ties with ramp at weight %.6f", weight)
        path = split_path(solve_optimal(cm, start, goal, replace(params, step_weight=weight)))
        if not path.steps or path.cost(weight) >= ramp_cost - 1e-9:
            break
    else:
        raise CalibrationError("step weight did not converge")
    grid = math.ceil(weight / resolution - 1e-9) * resolution
    if grid <= weight + 1e-12:
        # exact ties keep the stepping path, so step past them
        grid += resolution
    return round(grid, 10)
