"""Calibrating the step weight against a ramp detour.

The calibration map offers a 0.2 m platform straight ahead and a ramp up to
it in a parallel lane, about 1.5 m of extra driving away. The step weight is
the smallest value (on a 0.01 grid) for which the optimal path takes the ramp.
Expect about a minute of planning.
"""

from drivestep.calibration import calibrate_step_weight, solve_optimal, split_path
from drivestep.costmap import CostMap
from drivestep.neighbours import Kind, PlannerParams
from drivestep.scenarios import calibration_scenario

sc = calibration_scenario()
cm = CostMap(sc.map)
start, goal = sc.poses(cm.frame)

# With unit weight stepping up is cheapest.
path = solve_optimal(cm, start, goal, PlannerParams(step_weight=1.0))
split = split_path(path)
print(f"weight 1: {sum(m.kind is Kind.STEP for m in path.manoeuvres)} steps, "
      f"cost {split.drive:.2f} + w * {split.stepping:.3f}")

# For a fixed path the cost is affine in the weight, which the calibration uses
# to jump straight to the weight where stepping ties with the ramp.
weight = calibrate_step_weight()
print(f"calibrated step weight {weight}")

ramp = solve_optimal(cm, start, goal, PlannerParams(step_weight=weight))
top = max((p.y + 0.5) * cm.resolution for p in ramp.poses)
print(f"at that weight: {sum(m.kind is Kind.STEP for m in ramp.manoeuvres)} steps, "
      f"path reaches y = {top:.2f} m in the ramp lane")
