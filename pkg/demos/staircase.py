"""Staircase with a bar across the landing.

Two risers lead up to a landing whose free strips are shorter than the robot.
The first (weight 3) solution climbs the stairs with abstract steps and then
drives sideways with the bar between its front and rear legs.
"""

import math

from drivestep.costmap import CostMap
from drivestep.neighbours import Kind
from drivestep.pose import heading
from drivestep.scenarios import staircase_scenario
from drivestep.search import plan

sc = staircase_scenario()
cm = CostMap(sc.map)
start, goal = sc.poses(cm.frame)

first = next(plan(cm, start, goal))
print(f"first solution: weight {first.weight}, cost {first.cost:.2f}, {first.wall_ms / 1000:.1f} s")

for pose, m in first.steps[1:]:
    if m.kind is Kind.STEP:
        name = ("front left", "front right", "rear left", "rear right")[m.foot]
        print(f"  step {name:11s} {m.length:.2f} m, height change {m.height_change:.2f} m")
    elif m.kind is Kind.DRIVE:
        dx, dy = m.end.x - m.start.x, m.end.y - m.start.y
        off = abs(math.remainder(math.atan2(dy, dx) - heading(m.start.theta), 2 * math.pi))
        if math.pi / 4 < off < 3 * math.pi / 4:
            x, y = (pose.x + 0.5) * cm.resolution, (pose.y + 0.5) * cm.resolution
            print(f"  sideways drive to ({x:.2f}, {y:.2f})")
