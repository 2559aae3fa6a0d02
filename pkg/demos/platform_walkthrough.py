"""Walk through the planning pipeline on the corridor-and-platform scenario.

The robot stands in a narrow corridor facing a 0.2 m platform. Driving alone
cannot get it up there, so the planner mixes drives with abstract steps, and
the motion generator turns each step into statically stable keyframes.

Run with ``python3 demos/platform_walkthrough.py [output.svg]``.
"""

import sys
from collections import Counter

import numpy as np

from drivestep.cli import render_svg
from drivestep.costmap import CostMap
from drivestep.motiongen import expand_path
from drivestep.scenarios import platform_scenario
from drivestep.search import plan

sc = platform_scenario()
cm = CostMap(sc.map)
start, goal = sc.poses(cm.frame)

# Foot costs: 1 on flat ground, growing near height changes, infinite on and
# around edges as well as on unknown terrain.
foot = cm.foot.values
print(f"map {cm.width} x {cm.height} cells at {cm.resolution} m")
print(f"untraversable cells: {np.mean(~np.isfinite(foot)):.1%}")
print(f"start pose cost {cm.pose_cost(start):.3f}, goal pose cost {cm.pose_cost(goal):.3f}")

# The anytime search reports one path per heuristic weight.
print("\nweight     cost   expansions   ms")
for path in plan(cm, start, goal):
    print(f"{path.weight:6.3f} {path.cost:8.3f} {path.expansions:12d} {path.wall_ms:6.0f}")

kinds = Counter(m.kind.value for m in path.manoeuvres)
print("\nfinal path:", ", ".join(f"{n} x {k}" for k, n in kinds.items()))

# Each abstract step expands into a roll, optional wheel and base shifts, the
# swing itself and the undo motions.
exe = expand_path(path, cm)
lifts = [k for k in exe.keyframes if k.tag == "LiftFoot"]
print(f"{len(exe.keyframes)} keyframes; smallest margin with a foot in the air "
      f"{min(k.margin for k in lifts):.3f} m")

out = sys.argv[1] if len(sys.argv) > 1 else "platform.svg"
with open(out, "w") as fh:
    fh.write(render_svg(cm, path.steps))
print(f"wrote {out}")
