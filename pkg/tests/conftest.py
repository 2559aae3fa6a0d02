import math

import numpy as np
import pytest

from drivestep.costmap import CostMap
from drivestep.scenarios import to_pose
from drivestep.terrain import HeightMap

RES = 0.025


def grid(width_m, height_m, res=RES):
    """Cell-centre coordinate arrays X, Y for a map of the given size."""
    nx, ny = int(round(width_m / res)), int(round(height_m / res))
    ys, xs = np.mgrid[0:ny, 0:nx]
    return (xs + 0.5) * res, (ys + 0.5) * res


def flat(width_m=2.0, height_m=2.0, level=0.0, res=RES):
    X, _ = grid(width_m, height_m, res)
    return HeightMap.from_array(np.full(X.shape, level), res)


def pose_at(cm: CostMap, x, y, theta=0.0):
    return to_pose(cm.frame, cm.map, (x, y, theta))


def angle_close(a, b, tol=1e-9):
    return abs(math.remainder(a - b, 2 * math.pi)) <= tol


@pytest.fixture
def flat_cm():
    return CostMap(flat(3.0, 3.0))


# acceptance criteria outcomes, reported once at the end of the run
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        title, ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
