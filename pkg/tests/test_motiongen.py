import math
import re

import numpy as np
import pytest

from conftest import RES, flat, grid, pose_at
from drivestep.costmap import INF, CostMap, FootCostField
from drivestep.errors import DegenerateSupportError, ExpansionError, UnreachableCoMError
from drivestep.motiongen import (Keyframe, MotionParams, RollGeometry, expand_path, generate_step_sequence,
                                 leg_heights_and_pitch, roll_leg_height_delta, rotate_about, support_margin,
                                 support_triangle)
from drivestep.neighbours import Kind, Manoeuvre, NeighbourGenerator, PlannerParams
from drivestep.pose import RobotGeometry
from drivestep.scenarios import platform_scenario
from drivestep.search import plan_final
from drivestep.terrain import HeightMap

GRAMMAR = re.compile(r"(StandUp )?Roll (WheelShift )?(BaseShift )?LiftFoot PlaceFoot (BaseShift )?(WheelShift )?Unroll")
FEET = [(0.4, 0.3), (0.4, -0.3), (-0.4, 0.3), (-0.4, -0.3)]


def test_support_triangle_example():
    st = support_triangle(FEET, 0)
    assert {tuple(p) for p in st.triangle} == {(0.4, -0.3), (-0.4, 0.3), (-0.4, -0.3)}
    assert st.stc == pytest.approx([-0.4 / 3, -0.1])
    assert st.stc == pytest.approx([-0.133, -0.1], abs=5e-4)
    assert st.margin > 0
    # nearest edge is the diagonal 3x + 4y = 0
    assert st.margin == pytest.approx(abs(3 * st.stc[0] + 4 * st.stc[1]) / 5, abs=1e-12)
    assert st.margin == pytest.approx(0.16, abs=1e-12)


def test_support_triangle_sign_and_degenerate():
    assert support_triangle(FEET, 0, com=(0.3, 0.25)).margin < 0
    assert support_triangle(FEET, 0, com=(-0.3, -0.2)).margin > 0
    with pytest.raises(DegenerateSupportError):
        support_triangle([(0, 0), (1, 0), (2, 0), (3, 0)], 3)


def test_support_margin_four_contacts():
    assert support_margin([f + (0.0,) for f in FEET], [True] * 4, (0.0, 0.0)) == pytest.approx(0.3)
    assert support_margin([f + (0.0,) for f in FEET], [False, True, True, True], (0.0, 0.0)) == pytest.approx(0.0)


def test_roll_worked_example():
    geom = RollGeometry(y_rot=0.3, z_rot=0.0, y_com=0.0, z_com=0.6, y_des=0.1, width=0.6)
    assert geom.alpha == pytest.approx(math.atan(0.3 / 0.6))
    assert geom.alpha == pytest.approx(0.4636, abs=1e-4)
    assert geom.arm == pytest.approx(0.6708, abs=1e-4)
    assert geom.alpha_des == pytest.approx(math.asin(0.2 / math.hypot(0.3, 0.6)), abs=1e-12)
    assert geom.alpha_des == pytest.approx(0.3027, abs=1e-4)
    dh = roll_leg_height_delta(geom)
    assert dh == pytest.approx(0.6 * math.tan(geom.alpha - geom.alpha_des))
    assert dh == pytest.approx(0.0973, abs=1e-4)
    # rigid rotation of C about R lands on the target
    y, z = rotate_about((geom.y_com, geom.z_com), (geom.y_rot, geom.z_rot), geom.roll)
    assert y == pytest.approx(0.1, abs=1e-6)
    assert math.hypot(y - 0.3, z) == pytest.approx(geom.arm, abs=1e-12)


def test_roll_trivial_and_unreachable():
    assert roll_leg_height_delta(RollGeometry(0.3, 0.0, 0.0, 0.6, 0.0, 0.6)) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(UnreachableCoMError):
        roll_leg_height_delta(RollGeometry(0.3, 0.0, 0.0, 0.6, 1.2, 0.6))


def test_leg_heights_flat():
    cm = CostMap(flat(3.0, 3.0))
    pose = pose_at(cm, 1.5, 1.5, 0.7)
    legs, z, pitch = leg_heights_and_pitch(pose, cm.map, "driving")
    assert legs == pytest.approx([0.27] * 4, abs=1e-12) and pitch == 0.0 and z == pytest.approx(0.27)
    legs, z, pitch = leg_heights_and_pitch(pose, cm.map, "stepping")
    assert legs == pytest.approx([0.45] * 4, abs=1e-12) and pitch == 0.0


def test_leg_heights_on_ramp():
    X, Y = grid(3.0, 3.0)
    cm = CostMap(HeightMap.from_array(math.tan(0.2) * X))
    pose = pose_at(cm, 1.5, 1.5)
    legs, z, pitch = leg_heights_and_pitch(pose, cm.map, "driving")
    assert pitch == pytest.approx(0.14, abs=1e-9)
    legs, z, pitch = leg_heights_and_pitch(pose, cm.map, "stepping")
    assert pitch == pytest.approx(0.14, abs=1e-9)
    assert min(legs) == pytest.approx(0.45, abs=1e-9)


def test_leg_height_relaxes_then_fails():
    X, Y = grid(3.0, 3.0)
    h = np.where(X >= 1.5, 1.0, 0.0)
    cm = CostMap(HeightMap.from_array(h))
    pose = pose_at(cm, 1.5, 1.5)
    legs, z, pitch = leg_heights_and_pitch(pose, cm.map, "stepping")
    assert max(legs) <= 0.8 + 1e-9 and min(legs) < 0.45
    # relaxed in whole 0.01 m decrements
    assert min(legs) * 100 == pytest.approx(round(min(legs) * 100), abs=1e-6)
    h = np.where(X >= 1.5, 1.2, 0.0)
    with pytest.raises(ExpansionError):
        leg_heights_and_pitch(pose, HeightMap.from_array(h), "stepping")


def _edge_setup(com_offset=(0.0, 0.0)):
    X, Y = grid(2.6, 2.0)
    h = np.where(X >= 1.2, 0.2, 0.0)
    cm = CostMap(HeightMap.from_array(h), geometry=RobotGeometry(com_offset=com_offset))
    pose = pose_at(cm, 0.65, 1.0)
    return cm, pose


def _front_left_step(cm, pose):
    steps = NeighbourGenerator(cm, PlannerParams()).step_neighbours(pose)
    return next(m for m in steps if m.foot == 0)


def _check_sequence(frames, m, cm, params=MotionParams()):
    assert GRAMMAR.fullmatch(" ".join(k.tag for k in frames))
    for k in frames:
        assert sum(k.contact) >= 3
        assert max(k.legs) <= cm.geometry.max_leg_length + 1e-9
        if sum(k.contact) == 3:
            assert k.margin >= params.min_margin - 1e-9
            assert k.tag == "LiftFoot"
        else:
            assert k.margin > 0
    last = frames[-1]
    centres = [[(c[0] + 0.5) * RES, (c[1] + 0.5) * RES] for c in m.end.feet]
    assert np.allclose([f[:2] for f in last.feet], centres, atol=1e-12)
    assert (last.x, last.y) == pytest.approx(((m.end.x + 0.5) * RES, (m.end.y + 0.5) * RES))
    assert last.roll == 0.0


def test_front_left_step_sequence():
    cm, pose = _edge_setup()
    m = _front_left_step(cm, pose)
    frames = generate_step_sequence(pose, m, cm, low=True)
    _check_sequence(frames, m, cm)
    roll = next(k for k in frames if k.tag == "Roll")
    lift = next(k for k in frames if k.tag == "LiftFoot")
    st = support_triangle([f[:2] for f in lift.feet], 0, com=lift.com)
    # the roll brings the CoM laterally onto the support triangle centroid
    assert abs(roll.roll) > 0
    lat = lambda p: -(p[0] - roll.x) * math.sin(roll.theta) + (p[1] - roll.y) * math.cos(roll.theta)
    assert abs(lat(roll.com) - lat(st.stc)) <= 0.01
    # away from the lifted left foot
    assert lat(roll.com) < 0
    # the swing clears the step line
    assert lift.feet[0][2] == pytest.approx(0.2 + 0.05)


def test_aligned_com_needs_no_roll():
    cm, pose = _edge_setup(com_offset=(-0.4 / 3, -0.1))
    m = _front_left_step(CostMap(cm.map), pose)
    frames = generate_step_sequence(pose, m, cm)
    tags = [k.tag for k in frames]
    roll = frames[tags.index("Roll")]
    assert roll.roll == pytest.approx(0.0, abs=1e-9)
    assert "BaseShift" not in tags and "WheelShift" not in tags


def test_blocked_wheel_shift_truncates():
    cm, pose = _edge_setup()
    m = _front_left_step(cm, pose)
    # infinite cells across the rear-left wheel's line from 3 cells ahead
    rx, ry = pose.feet[2]
    values = cm.foot.values.copy()
    values[ry - 3:ry + 4, rx + 3:rx + 6] = INF
    cm.foot = FootCostField(values, RES)
    cm.cf = values.tolist()
    frames = generate_step_sequence(pose, m, cm)
    tags = [k.tag for k in frames]
    roll = frames[tags.index("Roll")]
    wheel = frames[tags.index("WheelShift")]
    shift = frames[tags.index("BaseShift")]
    moved = wheel.feet[2][0] - roll.feet[2][0]
    assert moved == pytest.approx(0.05)
    # required 0.4 m of wheel travel; the base covers what is left, a third as far
    assert shift.x - roll.x == pytest.approx(-(0.4 - 0.05) / 3, abs=1e-9)
    _check_sequence(frames, m, cm)


def test_unblocked_wheel_shift_is_full():
    cm, pose = _edge_setup()
    m = _front_left_step(cm, pose)
    frames = generate_step_sequence(pose, m, cm)
    tags = [k.tag for k in frames]
    wheel = frames[tags.index("WheelShift")]
    assert wheel.feet[2][0] - frames[0].feet[2][0] == pytest.approx(0.4)
    assert "BaseShift" not in tags


def test_expand_drive_only():
    cm = CostMap(flat(3.0, 3.0))
    start = pose_at(cm, 1.0, 1.0)
    goal = pose_at(cm, 1.8, 1.2, 0.3)
    path = plan_final(cm, start, goal)[-1]
    ex = expand_path(path, cm)
    assert set(ex.tags) == {"DriveLow"}
    assert all(k.roll == 0.0 for k in ex.keyframes)
    assert all(k.legs == pytest.approx([0.27] * 4) for k in ex.keyframes)


def test_keyframe_dict_round_trip():
    k = Keyframe("Roll", 3, 1.0, 2.0, 0.5, 0.45, 0.01, 0.0, [[0, 0, 0]] * 4, [True] * 4, [0.45] * 4,
                 [1.0, 2.0], 0.2)
    assert Keyframe.from_dict(k.to_dict()) == k


@pytest.fixture(scope="module")
def platform_expansion():
    sc = platform_scenario()
    cm = CostMap(sc.map)
    start, goal = sc.poses(cm.frame)
    path = plan_final(cm, start, goal)[-1]
    return path, expand_path(path, cm), cm


def test_platform_tag_sequence(platform_expansion):
    path, ex, cm = platform_expansion
    tags = " ".join(ex.tags)
    assert ex.tags[0] == "DriveLow" and ex.tags[-1] in ("LowerBase", "DriveLow")
    assert "LowerBase" in ex.tags
    for kind in ("StandUp", "Roll", "WheelShift", "LiftFoot", "PlaceFoot", "Unroll"):
        assert kind in tags
    n_steps = sum(m.kind is Kind.STEP for m in path.manoeuvres)
    assert len(GRAMMAR.findall(tags)) == n_steps > 0


def test_platform_projection_matches_abstract_path(platform_expansion):
    path, ex, cm = platform_expansion
    last = {}
    for k in ex.keyframes:
        if k.tag != "LowerBase":
            last[k.manoeuvre] = k
    for i, (pose, _) in enumerate(path.steps):
        k = last[i - 1]
        assert (k.x, k.y) == pytest.approx(((pose.x + 0.5) * RES, (pose.y + 0.5) * RES), abs=1e-12)
        assert math.isclose(math.remainder(k.theta - pose.theta * 2 * math.pi / 64, 2 * math.pi), 0.0,
                            abs_tol=1e-12)
        centres = [[(c[0] + 0.5) * RES, (c[1] + 0.5) * RES] for c in pose.feet]
        assert np.allclose([f[:2] for f in k.feet], centres, atol=1e-12)
    for k in ex.keyframes:
        assert sum(k.contact) >= 3 and max(k.legs) <= 0.8 + 1e-9
