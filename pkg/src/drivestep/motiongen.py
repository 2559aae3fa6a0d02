"""Expansion of abstract paths into statically stable keyframe sequences.

Positions are metric. The body frame has x' forward, y' to the left and z'
up; feet keep the order front-left, front-right, rear-left, rear-right. The
centre of mass is modelled as a point mass at the base centre plus the
geometry's planar offset, at the height of the base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .costmap import INF, CostMap, supercover
from .errors import DegenerateSupportError, ExpansionError, UnreachableCoMError
from .neighbours import Kind
from .pose import FOOT_SIGNS, RobotGeometry, RobotPose, heading, same_side_partner
from .terrain import HeightMap

LEFT_FEET = (0, 2)
RIGHT_FEET = (1, 3)

TAGS = ("DriveLow", "StandUp", "Roll", "WheelShift", "BaseShift", "LiftFoot", "PlaceFoot", "Unroll",
        "LowerBase")


@dataclass(frozen=True)
class MotionParams:
    min_margin: float = 0.05
    clearance: float = 0.05
    pitch_factor: float = 0.7
    leg_step: float = 0.01
    align_tolerance: float = 0.01


@dataclass
class Keyframe:
    """Robot configuration at one instant of the executable path.

    ``manoeuvre`` indexes the abstract path manoeuvre this keyframe belongs to
    (-1 for the start pose). ``legs`` are vertical base-to-foot distances and
    ``margin`` is the static stability margin of the CoM projection.
    """

    tag: str
    manoeuvre: int
    x: float
    y: float
    theta: float
    z: float
    roll: float
    pitch: float
    feet: list
    contact: list
    legs: list
    com: list
    margin: float

    def to_dict(self) -> dict:
        return {
            "tag": self.tag, "manoeuvre": self.manoeuvre,
            "base": [self.x, self.y, self.theta, self.z], "roll": self.roll, "pitch": self.pitch,
            "feet": [list(f) for f in self.feet], "contact": list(self.contact), "legs": list(self.legs),
            "com": list(self.com), "margin": self.margin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Keyframe":
        x, y, theta, z = d["base"]
        return cls(d["tag"], d["manoeuvre"], x, y, theta, z, d["roll"], d["pitch"],
                   [list(f) for f in d["feet"]], list(d["contact"]), list(d["legs"]), list(d["com"]),
                   d["margin"])


@dataclass
class ExecutablePath:
    keyframes: list = field(default_factory=list)

    @property
    def tags(self) -> list[str]:
        return [k.tag for k in self.keyframes]

    def to_list(self) -> list:
        return [k.to_dict() for k in self.keyframes]


@dataclass(frozen=True)
class StabilityState:
    triangle: np.ndarray
    stc: np.ndarray
    com: np.ndarray
    margin: float


@dataclass(frozen=True)
class RollGeometry:
    """Back-view roll setup: rotation centre R, CoM C and the lateral CoM target."""

    y_rot: float
    z_rot: float
    y_com: float
    z_com: float
    y_des: float
    width: float

    @property
    def arm(self) -> float:
        return math.hypot(self.y_rot - self.y_com, self.z_com - self.z_rot)

    @property
    def alpha(self) -> float:
        return math.atan((self.y_rot - self.y_com) / (self.z_com - self.z_rot))

    @property
    def alpha_des(self) -> float:
        s = (self.y_rot - self.y_des) / self.arm
        if abs(s) > 1.0:
            raise UnreachableCoMError(f"lateral CoM target {self.y_des:.3f} m is out of reach of the roll")
        return math.asin(s)

    @property
    def roll(self) -> float:
        """Base roll (right-handed about x') that carries C to the target."""
        return self.alpha_des - self.alpha


def roll_leg_height_delta(geom: RollGeometry) -> float:
    """Leg height difference that rolls the lateral CoM onto ``geom.y_des``.

    Positive when R lies left of the CoM; the legs on the side away from R
    grow by the absolute value.
    """
    return geom.width * math.tan(geom.alpha - geom.alpha_des)


def rotate_about(point, centre, angle):
    """Rotate a (y', z') point about a centre, right-handed about x'."""
    dy, dz = point[0] - centre[0], point[1] - centre[1]
    c, s = math.cos(angle), math.sin(angle)
    return centre[0] + c * dy - s * dz, centre[1] + s * dy + c * dz


def _signed_margin(polygon: np.ndarray, point: np.ndarray) -> float:
    """Smallest signed distance from a point to the edges of a convex polygon (positive inside)."""
    n = len(polygon)
    area2 = 0.0
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        area2 += a[0] * b[1] - a[1] * b[0]
    orient = 1.0 if area2 > 0 else -1.0
    best = INF
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        e = b - a
        d = orient * (e[0] * (point[1] - a[1]) - e[1] * (point[0] - a[0])) / math.hypot(e[0], e[1])
        best = min(best, d)
    return best


def support_triangle(feet, lifted: int, com=None) -> StabilityState:
    """Support triangle of the three feet other than ``lifted``.

    ``com`` defaults to the triangle centroid (STC).
    """
    pts = np.asarray(feet, dtype=float)[:, :2]
    tri = np.delete(pts, lifted, axis=0)
    e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
    if abs(e1[0] * e2[1] - e1[1] * e2[0]) < 1e-12:
        raise DegenerateSupportError("remaining contacts are collinear")
    stc = tri.mean(axis=0)
    c = stc if com is None else np.asarray(com, dtype=float)[:2]
    return StabilityState(tri, stc, c, _signed_margin(tri, c))


def support_margin(feet, contact, com) -> float:
    """Stability margin of the CoM over the convex hull of the feet in contact."""
    pts = np.asarray([f[:2] for f, c in zip(feet, contact) if c], dtype=float)
    if len(pts) < 3:
        return -INF
    if len(pts) == 3:
        e1, e2 = pts[1] - pts[0], pts[2] - pts[0]
        if abs(e1[0] * e2[1] - e1[1] * e2[0]) < 1e-12:
            return -INF
        return _signed_margin(pts, np.asarray(com, dtype=float))
    return _signed_margin(_convex_hull(pts), np.asarray(com, dtype=float))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Monotone chain hull, counter-clockwise."""
    p = sorted(map(tuple, pts))
    lower, upper = [], []
    for q in p:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    for q in reversed(p):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    return np.asarray(lower[:-1] + upper[:-1])


def ground_slope(lon, heights) -> float:
    """Least-squares terrain slope angle along the body axis through the foot heights."""
    lon = np.asarray(lon, dtype=float)
    h = np.asarray(heights, dtype=float)
    dl = lon - lon.mean()
    var = float(dl @ dl)
    if var < 1e-12:
        return 0.0
    return math.atan(float(dl @ (h - h.mean())) / var)


def _heights_and_pitch(lon, heights, stepping, geometry: RobotGeometry, params: MotionParams, extra=None):
    """Base height, pitch and per-leg heights for feet at ``lon`` (body x') standing at ``heights``."""
    lon = np.asarray(lon, dtype=float)
    h = np.asarray(heights, dtype=float)
    extra = np.zeros(4) if extra is None else np.asarray(extra, dtype=float)
    pitch = params.pitch_factor * ground_slope(lon, h)
    rise = lon * math.tan(pitch)
    if not stepping:
        z = float(np.mean(h - rise)) + geometry.driving_leg_height
        legs = z + rise - h
        return z, pitch, legs
    level = geometry.stepping_leg_height
    floor = geometry.driving_leg_height - 1e-9
    while level >= floor:
        z = float(np.max(h - rise)) + level
        legs = z + rise - h + extra
        if float(legs.max()) <= geometry.max_leg_length + 1e-9:
            return z, pitch, legs
        level = round(level - params.leg_step, 10)
    raise ExpansionError(f"legs exceed {geometry.max_leg_length} m at every permitted base height")


def leg_heights_and_pitch(pose: RobotPose, hmap: HeightMap, mode: str = "driving",
                          geometry: RobotGeometry | None = None, params: MotionParams | None = None):
    """Per-leg heights, base height and pitch for a lattice pose.

    ``mode`` is ``"driving"`` or ``"stepping"``. Driving keeps a mean leg
    height equal to the low driving height; stepping raises the base so the
    shortest leg has the stepping height, lowered in small decrements while a
    leg would exceed its maximum length.
    """
    if mode not in ("driving", "stepping"):
        raise ValueError(f"unknown mode {mode!r}")
    geometry = geometry or RobotGeometry()
    params = params or MotionParams()
    frame = _Frame.of(pose, hmap.resolution)
    pts = [_cell_centre(c, hmap.resolution) for c in pose.feet]
    lon = [frame.body(p)[0] for p in pts]
    hs = [hmap.height_at(*c) for c in pose.feet]
    if any(math.isnan(v) for v in hs):
        raise ExpansionError("foot on unknown terrain")
    z, pitch, legs = _heights_and_pitch(lon, hs, mode == "stepping", geometry, params)
    return [float(v) for v in legs], z, pitch


def _cell_centre(cell, res):
    return ((cell[0] + 0.5) * res, (cell[1] + 0.5) * res)


@dataclass(frozen=True)
class _Frame:
    """Body frame at a metric base position."""

    bx: float
    by: float
    theta: float

    @classmethod
    def of(cls, pose: RobotPose, res: float) -> "_Frame":
        bx, by = _cell_centre((pose.x, pose.y), res)
        return cls(bx, by, heading(pose.theta))

    def body(self, p):
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx, dy = p[0] - self.bx, p[1] - self.by
        return c * dx + s * dy, -s * dx + c * dy

    def world(self, lon, lat):
        c, s = math.cos(self.theta), math.sin(self.theta)
        return self.bx + c * lon - s * lat, self.by + s * lon + c * lat

    def shifted(self, along: float) -> "_Frame":
        return _Frame(self.bx + along * math.cos(self.theta), self.by + along * math.sin(self.theta), self.theta)


class _StepState:
    """Mutable robot configuration while a step sequence is generated."""

    def __init__(self, pose: RobotPose, cm: CostMap, params: MotionParams, index: int):
        self.cm = cm
        self.res = cm.resolution
        self.geometry = cm.geometry
        self.params = params
        self.index = index
        self.frame = _Frame.of(pose, self.res)
        self.cells = list(pose.feet)
        self.feet = [list(_cell_centre(c, self.res)) + [self._ground(c)] for c in pose.feet]
        self.contact = [True] * 4
        self.com_lat = self.geometry.com_offset[1]
        self.roll = 0.0
        self.extra = np.zeros(4)

    def _ground(self, cell):
        v = self.cm.height_at(cell)
        if math.isnan(v):
            raise ExpansionError(f"foot cell {cell} is unknown", self.index)
        return v

    def com(self):
        return self.frame.world(self.geometry.com_offset[0], self.com_lat)

    def lon(self):
        return [self.frame.body(f)[0] for f in self.feet]

    def lat(self):
        return [self.frame.body(f)[1] for f in self.feet]

    def keyframe(self, tag: str) -> Keyframe:
        ground = [f[2] if c else self.cm.height_at(cell) for f, c, cell in zip(self.feet, self.contact, self.cells)]
        try:
            z, pitch, legs = _heights_and_pitch(self.lon(), ground, True, self.geometry, self.params, self.extra)
        except ExpansionError as exc:
            raise ExpansionError(str(exc), self.index) from None
        legs = [float(legs[i] - (self.feet[i][2] - ground[i])) for i in range(4)]
        com = self.com()
        margin = support_margin(self.feet, self.contact, com)
        return Keyframe(tag, self.index, self.frame.bx, self.frame.by, self.frame.theta, z, self.roll, pitch,
                        [list(map(float, f)) for f in self.feet], list(self.contact), legs,
                        [float(com[0]), float(com[1])], float(margin))


def _roll_setup(state: _StepState, y_des: float) -> tuple[RollGeometry, tuple]:
    """Roll geometry pivoting about the feet on the side the CoM moves toward."""
    lat = state.lat()
    pivot = LEFT_FEET if y_des > state.com_lat else RIGHT_FEET
    far = RIGHT_FEET if pivot is LEFT_FEET else LEFT_FEET
    y_rot = 0.5 * (lat[pivot[0]] + lat[pivot[1]])
    z_rot = 0.5 * (state.feet[pivot[0]][2] + state.feet[pivot[1]][2])
    width = abs(y_rot - 0.5 * (lat[far[0]] + lat[far[1]]))
    z, _, _ = _heights_and_pitch(state.lon(), [f[2] for f in state.feet], True, state.geometry, state.params)
    return RollGeometry(y_rot, z_rot, state.com_lat, z, y_des, width), far


def _wheel_target(state: _StepState, partner: int, shift: float):
    """Farthest cell on the partner's sagittal line, up to ``shift`` metres, it can roll to."""
    cm = state.cm
    res = state.res
    theta = state.frame.theta
    ux, uy = math.cos(theta), math.sin(theta)
    sign = 1.0 if shift > 0 else -1.0
    start = state.cells[partner]
    # the partner stays within reach of its neutral position
    neutral = state.geometry.foot_dx * FOOT_SIGNS[partner][0]
    lon0 = state.frame.body(_cell_centre(start, res))[0]
    limit = state.geometry.max_reach - sign * (lon0 - neutral)
    shift = sign * max(min(abs(shift), limit), 0.0)
    best, best_adv = start, 0.0
    prev = start
    k = 1
    while True:
        c = (start[0] + int(np.rint(sign * k * ux)), start[1] + int(np.rint(sign * k * uy)))
        k += 1
        if c == prev:
            continue
        adv = sign * ((c[0] - start[0]) * ux + (c[1] - start[1]) * uy) * res
        if adv > abs(shift) + 1e-9:
            break
        if any(not cm.in_bounds(x, y) or cm.foot_cost_at((x, y)) == INF for x, y in supercover(prev, c)[1:]):
            break
        best, best_adv, prev = c, adv, c
    return best, sign * best_adv


def generate_step_sequence(pre_pose: RobotPose, step, costmap: CostMap, params: MotionParams | None = None,
                           low: bool = False, index: int = 0) -> list[Keyframe]:
    """Keyframes that carry out one abstract step while statically stable.

    The sequence stands up if ``low``, rolls the CoM over the support
    triangle centroid laterally, aligns it longitudinally by rolling the
    same-side partner wheel and then, for what the wheel could not cover, by
    shifting the base, swings the foot and finally undoes the alignment.
    """
    params = params or MotionParams()
    if step.kind is not Kind.STEP:
        raise ValueError("not an abstract step")
    foot = step.foot
    state = _StepState(pre_pose, costmap, params, index)
    out = []
    if low:
        out.append(state.keyframe("StandUp"))
    geometry = costmap.geometry

    # longitudinal alignment: the partner wheel first, the base for the rest
    partner = same_side_partner(foot)
    lon = state.lon()
    stc_lon = (sum(lon) - lon[foot]) / 3.0
    wheel = 3.0 * (geometry.com_offset[0] - stc_lon)
    target, moved = (state.cells[partner], 0.0)
    if abs(wheel) > params.align_tolerance:
        target, moved = _wheel_target(state, partner, wheel)
    wheel_cell = tuple(target)
    lon_after = list(lon)
    lon_after[partner] = state.frame.body(_cell_centre(wheel_cell, state.res))[0]
    # moving the base forward by s moves the CoM forward by s relative to the feet
    residual = (sum(lon_after) - lon_after[foot]) / 3.0 - geometry.com_offset[0]
    base_shift = residual if abs(residual) > params.align_tolerance else 0.0

    # lateral alignment onto the centroid of the support feet
    lat = state.lat()
    if wheel_cell != state.cells[partner]:
        lat[partner] = state.frame.body(_cell_centre(wheel_cell, state.res))[1]
    y_des = (sum(lat) - lat[foot]) / 3.0
    if abs(y_des - state.com_lat) > 1e-12:
        try:
            geom, far = _roll_setup(state, y_des)
            dh = roll_leg_height_delta(geom)
        except UnreachableCoMError as exc:
            raise ExpansionError(str(exc), index) from None
        state.roll = geom.roll
        for j in far:
            state.extra[j] = abs(dh)
        state.com_lat = y_des
    out.append(state.keyframe("Roll"))

    home = state.cells[partner], list(state.feet[partner])
    if wheel_cell != state.cells[partner]:
        state.cells[partner] = wheel_cell
        state.feet[partner] = list(_cell_centre(wheel_cell, state.res)) + [state._ground(wheel_cell)]
        out.append(state.keyframe("WheelShift"))
    frame0 = state.frame
    if base_shift:
        state.frame = frame0.shifted(base_shift)
        out.append(state.keyframe("BaseShift"))

    # swing
    start_cell = state.cells[foot]
    line = supercover(start_cell, step.foothold)
    top = max(costmap.height_at(c) for c in line)
    if math.isnan(top):
        raise ExpansionError("step line crosses unknown terrain", index)
    state.contact[foot] = False
    state.feet[foot][2] = top + params.clearance
    lift = state.keyframe("LiftFoot")
    if lift.margin < params.min_margin - 1e-12:
        raise ExpansionError(f"stability margin {lift.margin:.3f} m below {params.min_margin} m", index)
    out.append(lift)
    state.contact[foot] = True
    state.cells[foot] = tuple(step.foothold)
    state.feet[foot] = list(_cell_centre(step.foothold, state.res)) + [state._ground(step.foothold)]
    out.append(state.keyframe("PlaceFoot"))

    # undo the alignment in reverse order
    if base_shift:
        state.frame = frame0
        out.append(state.keyframe("BaseShift"))
    if wheel_cell != home[0]:
        state.cells[partner], state.feet[partner] = home[0], home[1]
        out.append(state.keyframe("WheelShift"))
    state.roll = 0.0
    state.extra = np.zeros(4)
    state.com_lat = geometry.com_offset[1]
    out.append(state.keyframe("Unroll"))
    # with all four feet down the CoM only has to stay over the support polygon
    for k in out:
        if k.margin <= 0.0:
            raise ExpansionError(f"CoM leaves the support polygon in the {k.tag} keyframe", index)
    return out


def _pose_keyframe(tag, index, pose: RobotPose, cm: CostMap, params: MotionParams, stepping: bool) -> Keyframe:
    res = cm.resolution
    frame = _Frame.of(pose, res)
    feet = [list(_cell_centre(c, res)) + [cm.height_at(c)] for c in pose.feet]
    if any(math.isnan(f[2]) for f in feet):
        raise ExpansionError("foot on unknown terrain", index)
    lon = [frame.body(f)[0] for f in feet]
    try:
        z, pitch, legs = _heights_and_pitch(lon, [f[2] for f in feet], stepping, cm.geometry, params)
    except ExpansionError as exc:
        raise ExpansionError(str(exc), index) from None
    com = frame.world(*cm.geometry.com_offset)
    margin = support_margin(feet, [True] * 4, com)
    return Keyframe(tag, index, frame.bx, frame.by, frame.theta, z, 0.0, pitch, feet, [True] * 4,
                    [float(v) for v in legs], [float(com[0]), float(com[1])], float(margin))


def expand_path(path, costmap: CostMap | HeightMap, geometry: RobotGeometry | None = None,
                params: MotionParams | None = None) -> ExecutablePath:
    """Keyframes for a whole abstract path.

    ``path`` is an :class:`~drivestep.search.AbstractPath` or its list of
    (pose, manoeuvre) pairs.
    """
    params = params or MotionParams()
    cm = costmap if isinstance(costmap, CostMap) else CostMap(costmap, geometry=geometry)
    steps = path.steps if hasattr(path, "steps") else list(path)
    if not steps:
        return ExecutablePath([])
    pose0 = steps[0][0]
    out = [_pose_keyframe("DriveLow", -1, pose0, cm, params, stepping=False)]
    low = True
    prev = pose0
    for i, (pose, m) in enumerate(steps[1:]):
        if m.kind in (Kind.DRIVE, Kind.ROTATE):
            if not low:
                out.append(_pose_keyframe("LowerBase", i, prev, cm, params, stepping=False))
                low = True
            out.append(_pose_keyframe("DriveLow", i, pose, cm, params, stepping=False))
        elif m.kind is Kind.STEP:
            out.extend(generate_step_sequence(prev, m, cm, params, low=low, index=i))
            low = False
        else:
            if low:
                out.append(_pose_keyframe("StandUp", i, prev, cm, params, stepping=True))
                low = False
            tag = "BaseShift" if m.kind is Kind.BASE_SHIFT else "WheelShift"
            out.append(_pose_keyframe(tag, i, pose, cm, params, stepping=True))
        prev = pose
    if not low:
        out.append(_pose_keyframe("LowerBase", len(steps) - 2, prev, cm, params, stepping=False))
    return ExecutablePath(out)
