import pytest

from drivestep.calibration import PathSplit, calibrate_step_weight, solve_optimal, split_path
from drivestep.costmap import CostMap
from drivestep.neighbours import CALIBRATED_STEP_WEIGHT, Kind, PlannerParams
from drivestep.scenarios import calibration_scenario


@pytest.fixture(scope="module")
def calibration():
    sc = calibration_scenario()
    cm = CostMap(sc.map)
    start, goal = sc.poses(cm.frame)
    return cm, start, goal


def test_path_split_is_affine():
    s = PathSplit(drive=3.0, stepping=0.5, steps=True)
    assert s.cost(1.0) == 3.5
    assert s.cost(10.0) == 8.0


def test_split_recovers_planner_cost(calibration):
    cm, start, goal = calibration
    path = solve_optimal(cm, start, goal, PlannerParams(step_weight=1.0))
    split = split_path(path)
    assert split.steps
    assert split.cost(1.0) == pytest.approx(path.cost, rel=1e-12)


def test_large_weight_still_takes_ramp(calibration):
    cm, start, goal = calibration
    path = solve_optimal(cm, start, goal, PlannerParams(step_weight=10 * CALIBRATED_STEP_WEIGHT))
    assert not any(m.kind is Kind.STEP for m in path.manoeuvres)


@pytest.mark.slow
def test_calibration_reproduces_default():
    assert calibrate_step_weight() == pytest.approx(CALIBRATED_STEP_WEIGHT, abs=1e-9)
