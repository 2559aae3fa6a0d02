"""Manoeuvres connecting lattice poses: driving, turning, stepping and footprint changes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import ndimage
from scipy.sparse import csgraph

from .costmap import INF, CostMap, supercover
from .errors import UntraversableSegmentError
from .pose import (FRONT_FEET, N_ORIENTATIONS, ORIENTATION_STEP, REAR_FEET,
                   RobotPose, angdiff, heading, opposite_side)

PLATEAU = 2.0 * math.pi / 60.0
# output of calibration.calibrate_step_weight() with default parameters
CALIBRATED_STEP_WEIGHT = 19.78

_EIGHT = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]
_KNIGHT = [(2, 1), (1, 2), (-1, 2), (-2, 1), (-2, -1), (-1, -2), (1, -2), (2, -1)]
_LONG_DIAGONAL = [(2, 2), (-2, 2), (-2, -2), (2, -2)]


def drive_offsets(mode: int):
    if mode == 16:
        return _EIGHT + _KNIGHT
    if mode == 20:
        return _EIGHT + _KNIGHT + _LONG_DIAGONAL
    raise ValueError(f"neighbourhood must be 16 or 20, got {mode}")


class Kind(str, Enum):
    DRIVE = "Drive"
    ROTATE = "Rotate"
    STEP = "AbstractStep"
    BASE_SHIFT = "BaseShift"
    WHEEL_MOVE = "WheelMove"


STEPPING_KINDS = (Kind.STEP, Kind.BASE_SHIFT, Kind.WHEEL_MOVE)


@dataclass(frozen=True)
class PlannerParams:
    k7: float = 0.5
    k8: float = 0.1
    k9: float = 2.3
    k10: float = 0.5
    k11: float = 0.125
    k12: float = 2.0
    k_back: float | None = None
    k_rot: float = 0.5
    step_weight: float = CALIBRATED_STEP_WEIGHT
    initial_weight: float = 3.0
    weight_decay: float = 0.5
    weight_floor_gap: float = 0.02
    neighbourhood: int = 20
    max_step_height: float = 0.3
    obstacle_distance: float = 0.1
    safe_stand_distance: float = 0.5
    stepping: bool = True

    def __post_init__(self):
        if self.k_back is None:
            object.__setattr__(self, "k_back", 0.5 * (1.0 + self.k12))
        if self.step_weight < 1.0:
            raise ValueError("step_weight must be >= 1")
        if self.initial_weight < 1.0:
            raise ValueError("heuristic weights must be >= 1")
        if self.k12 < 1.0 or not 1.0 <= self.k_back <= max(self.k12, 1.0):
            raise ValueError("orientation factors must lie in [1, k12]")
        drive_offsets(self.neighbourhood)

    def weights(self) -> list[float]:
        """Heuristic inflation schedule, strictly decreasing down to 1."""
        w = float(self.initial_weight)
        out = [w]
        while w > 1.0:
            w = 1.0 + self.weight_decay * (w - 1.0)
            if w - 1.0 < self.weight_floor_gap:
                w = 1.0
            out.append(w)
        return out


def orientation_cost_factor(dtheta: float, params: PlannerParams = PlannerParams()) -> float:
    """Cost multiplier for driving at angle ``dtheta`` in [0, pi] off the robot heading."""
    d = abs(dtheta)
    half = 0.5 * math.pi
    if d <= PLATEAU:
        return 1.0
    if d <= half:
        return 1.0 + (params.k12 - 1.0) * (d - PLATEAU) / (half - PLATEAU)
    return params.k12 + (params.k_back - params.k12) * (min(d, math.pi) - half) / half


def heuristic(pose: RobotPose, goal: RobotPose, params: PlannerParams, resolution: float) -> float:
    """Distance-to-goal plus weighted orientation difference.

    The distance term averages the base position and the foot centroid; for a
    neutral footprint both coincide and this is the plain Euclidean distance.
    Splitting it keeps the heuristic consistent for base shifts and foot moves,
    which displace only one of the two.
    """
    gx, gy = goal.x, goal.y
    cx = sum(f[0] for f in pose.feet) * 0.25
    cy = sum(f[1] for f in pose.feet) * 0.25
    dist = 0.5 * (math.hypot(pose.x - gx, pose.y - gy) + math.hypot(cx - gx, cy - gy)) * resolution
    return dist + params.k_rot * angdiff(heading(pose.theta), heading(goal.theta))


class StepLowerBound:
    """Heuristic term for feet that can only reach their goal cell by stepping.

    Finite-cost cells are grouped into regions a foot can reach by rolling,
    where regions closer than one on-the-spot turn moves a foot are merged.
    Leaving a region takes at least one abstract step, whose cost is bounded
    below by its length, the height gap between the regions and the cheapest
    foothold of the target region. Shortest
    paths over these bounds, per foot, give an admissible and consistent
    addition to :func:`heuristic`; a step's share of the plain distance term
    is taken off the length bound to keep the sum consistent.
    """

    def __init__(self, costmap: CostMap, goal: RobotPose, params: PlannerParams):
        frame = costmap.frame
        res = costmap.resolution
        finite = np.isfinite(costmap.foot.values)
        jump = max(max(abs(a[0] - b[0]), abs(a[1] - b[1]))
                   for t in range(N_ORIENTATIONS)
                   for a, b in zip(frame.neutral[t], frame.neutral[(t + 1) % N_ORIENTATIONS]))
        r = max(jump - 1, 0) // 2 + (max(jump - 1, 0) % 2)
        grown = ndimage.binary_dilation(finite, structure=np.ones((2 * r + 1,) * 2, bool)) if r else finite
        labels, n = ndimage.label(grown, structure=np.ones((3, 3), bool))
        labels = np.where(finite, labels, 0)
        heights = costmap.map.heights
        lo = ndimage.minimum(heights, labels, index=np.arange(1, n + 1))
        hi = ndimage.maximum(heights, labels, index=np.arange(1, n + 1))
        cheapest = ndimage.minimum(np.where(finite, costmap.foot.values, 0.0), labels, index=np.arange(1, n + 1))
        per_length = max(params.step_weight * params.k7 - 0.125, 0.0)
        weights = np.full((n, n), INF)
        for a in range(n):
            dist = ndimage.distance_transform_edt(labels != a + 1) * res
            for b in range(n):
                if a == b:
                    continue
                gap = max(lo[b] - hi[a], lo[a] - hi[b], 0.0)
                if gap > params.max_step_height + 1e-12:
                    continue
                d = float(dist[labels == b + 1].min())
                landing = params.k9 * gap + params.k8 * (cheapest[b] - 1.0)
                weights[a, b] = params.step_weight * landing + per_length * d
        self.labels = labels.tolist()
        self.regions = n
        self.to_goal = []
        for gx, gy in goal.feet:
            self.to_goal.append(_region_distances(weights, labels[gy, gx] - 1) if n else [])

    def __call__(self, pose: RobotPose) -> float:
        labels = self.labels
        total = 0.0
        for j, (x, y) in enumerate(pose.feet):
            k = labels[y][x]
            if k:
                total += self.to_goal[j][k - 1]
        return total


def _region_distances(weights, target):
    """Shortest path costs from every region to ``target`` (row: from, column: to)."""
    if target < 0:
        return [0.0] * len(weights)
    # absent edges are zeros in the dense input; every present edge is positive
    graph = np.where(np.isfinite(weights), weights, 0.0)
    return csgraph.dijkstra(graph.T, indices=target).tolist()


class Manoeuvre(NamedTuple):
    """A transition between two lattice poses and its cost.

    ``raw_cost`` is the cost before the step weight is applied, for the
    stepping-related kinds.
    """

    kind: Kind
    start: RobotPose
    end: RobotPose
    cost: float
    foot: int | None = None
    length: float = 0.0
    foothold: tuple | None = None
    height_change: float = 0.0
    raw_cost: float | None = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "cost": self.cost, "length": self.length}
        if self.foot is not None:
            d["foot"] = self.foot
        if self.foothold is not None:
            d["foothold"] = list(self.foothold)
        if self.kind is Kind.STEP:
            d["height_change"] = self.height_change
        return d


@dataclass(frozen=True)
class _DriveMove:
    dx: int
    dy: int
    length: float
    factor: float
    swept: tuple


class NeighbourGenerator:
    """Successor function of the planning lattice over one cost map."""

    def __init__(self, costmap: CostMap, params: PlannerParams | None = None):
        self.cm = costmap
        self.params = params or PlannerParams()
        self.frame = costmap.frame
        self.res = costmap.resolution
        self._moves = self._drive_tables()
        near = _near_obstacle(costmap, self.params.obstacle_distance)
        self.near_obstacle = near
        self._near = near.tolist()
        self._ray_cache = {}
        self._ray_offsets = self._ray_tables()
        self._line_offsets = self._line_tables()
        self._roll_cache = {}
        self._segment_cache = {}
        cx, cy = costmap.geometry.com_offset
        self._com_cells = [((cx * math.cos(heading(t)) - cy * math.sin(heading(t))) / self.res,
                            (cx * math.sin(heading(t)) + cy * math.cos(heading(t))) / self.res)
                           for t in range(N_ORIENTATIONS)]

    def _drive_tables(self):
        p = self.params
        res = self.res
        tables = []
        for t in range(N_ORIENTATIONS):
            th = heading(t)
            moves = []
            for dx, dy in drive_offsets(p.neighbourhood):
                d = angdiff(math.atan2(dy, dx), th)
                swept = [c for c in supercover((0, 0), (dx, dy)) if c not in ((0, 0), (dx, dy))]
                # cells passed by any foot, relative to the base cell
                swept = tuple(sorted({(fx + sx, fy + sy) for fx, fy in self.frame.neutral[t] for sx, sy in swept}))
                moves.append(_DriveMove(dx, dy, math.hypot(dx, dy) * res, orientation_cost_factor(d, p), swept))
            tables.append(moves)
        return tables

    def __call__(self, pose: RobotPose) -> list[Manoeuvre]:
        out = self.driving_neighbours(pose)
        if not self.params.stepping:
            return out
        out.extend(self.step_neighbours(pose))
        shift = self.base_shift_neighbour(pose)
        if shift is not None:
            out.append(shift)
        out.extend(self.wheel_move_neighbours(pose))
        return out

    # driving

    def driving_neighbours(self, pose: RobotPose) -> list[Manoeuvre]:
        """Rigid drives over the 16/20-neighbourhood plus turns on the spot.

        Only neutral footprints drive; other footprints first change their
        feet through steps, base shifts and wheel moves.
        """
        cm = self.cm
        cf = cm.cf
        w, h = cm.width, cm.height
        pc0 = cm.pose_cost(pose)
        out = []
        if pc0 == INF or not self.frame.is_neutral(pose):
            return out
        feet = pose.feet
        bx, by = pose.x, pose.y
        table = cm.neutral_costs(pose.theta)
        for mv in self._moves[pose.theta]:
            dx, dy = mv.dx, mv.dy
            nx, ny = pose.x + dx, pose.y + dy
            if not (0 <= nx < w and 0 <= ny < h):
                continue
            pc1 = table[ny][nx]
            if pc1 == INF:
                continue
            blocked = False
            for sx, sy in mv.swept:
                x, y = bx + sx, by + sy
                if not (0 <= x < w and 0 <= y < h) or cf[y][x] == INF:
                    blocked = True
                    break
            if blocked:
                continue
            new = RobotPose(nx, ny, pose.theta, tuple((fx + dx, fy + dy) for fx, fy in feet))
            cost = mv.length * 0.5 * (pc0 + pc1) * mv.factor
            out.append(Manoeuvre(Kind.DRIVE, pose, new, cost, length=mv.length))
        turn = self.params.k_rot * ORIENTATION_STEP * pc0
        for dt in (1, -1):
            t = (pose.theta + dt) % N_ORIENTATIONS
            if cm.neutral_costs(t)[pose.y][pose.x] < INF:
                new = self.frame.neutral_pose(pose.x, pose.y, t)
                out.append(Manoeuvre(Kind.ROTATE, pose, new, turn, length=ORIENTATION_STEP))
        return out

    # stepping

    def is_near_obstacle(self, cell) -> bool:
        x, y = cell
        if not self.cm.in_bounds(x, y):
            return True
        return bool(self._near[y][x])

    def step_cost(self, length: float, foothold_cost: float, height_change: float) -> float:
        p = self.params
        return p.k7 * length + p.k8 * (foothold_cost - 1.0) + p.k9 * height_change

    def _ray(self, foot_cell, theta):
        """Footholds along the sagittal ray from a cell: (cell, advance, length, dH, C_S).

        ``advance`` is the metric progress along the heading. The step line is
        the polyline through successive ray cells, so its height range grows
        incrementally. Only footholds behind untraversable cells qualify.
        """
        key = (foot_cell, theta)
        hit = self._ray_cache.get(key)
        if hit is not None:
            return hit
        cm = self.cm
        p = self.params
        w, h = cm.width, cm.height
        heights = cm.h
        cf = cm.cf
        fx, fy = foot_cell
        h0 = cm.height_at(foot_cell)
        lo = hi = h0
        crossed = False
        out = []
        for (cx, cy), advance, length, between in self._ray_offsets[theta]:
            unknown = False
            for qx, qy in between:
                x, y = fx + qx, fy + qy
                v = heights[y][x] if 0 <= x < w and 0 <= y < h else math.nan
                if v != v:
                    unknown = True
                    break
                if v < lo:
                    lo = v
                elif v > hi:
                    hi = v
                if not crossed and cf[y][x] == INF:
                    crossed = True
            if unknown:
                break
            c = (fx + cx, fy + cy)
            cost_h = cf[c[1]][c[0]]
            # a foothold reachable by rolling needs no step
            if not crossed or cost_h == INF or abs(h0 - heights[c[1]][c[0]]) > p.max_step_height + 1e-12:
                continue
            out.append((c, advance, length, hi - lo, self.step_cost(length, cost_h, hi - lo)))
        self._ray_cache[key] = out
        return out

    def _line_tables(self):
        """Per orientation: cells ahead of a neutral foot cell within reach, relative to it."""
        reach = self.cm.geometry.max_reach + 1e-9
        tables = []
        for t in range(N_ORIENTATIONS):
            ux, uy = self.frame.units[t]
            rows = []
            prev = None
            for k in range(1, int(2 * reach / self.res) + 2):
                c = (int(np.rint(k * ux)), int(np.rint(k * uy)))
                lon = (c[0] * ux + c[1] * uy) * self.res
                if lon > reach:
                    break
                if c == prev:
                    continue
                between = tuple(supercover(prev, c)[1:]) if prev is not None else ()
                rows.append((c, lon, between))
                prev = c
            tables.append(tuple(rows))
        return tuple(tables)

    def _ray_tables(self):
        """Per orientation: ray cells relative to the foot with the cells passed on the way."""
        kmax = int(math.ceil(2.0 * self.cm.geometry.max_reach / self.res)) + 1
        tables = []
        for t in range(N_ORIENTATIONS):
            ux, uy = self.frame.units[t]
            prev = (0, 0)
            rows = []
            for k in range(1, kmax + 1):
                c = (int(np.rint(k * ux)), int(np.rint(k * uy)))
                if c == prev:
                    continue
                rows.append((c, (c[0] * ux + c[1] * uy) * self.res, math.hypot(*c) * self.res,
                             tuple(supercover(prev, c)[1:])))
                prev = c
            tables.append(tuple(rows))
        return tuple(tables)

    def step_candidates(self, pose: RobotPose, foot: int):
        """Finite-cost footholds ahead of a foot within reach: (cell, L, dH, C_S)."""
        lon0, _ = self.frame.foot_displacement(pose, foot)
        limit = self.cm.geometry.max_reach - lon0 + 1e-9
        return [(c, length, dh, cs) for c, adv, length, dh, cs in self._ray(pose.feet[foot], pose.theta)
                if adv <= limit]

    def step_neighbours(self, pose: RobotPose) -> list[Manoeuvre]:
        """One abstract step per foot meeting all stepping criteria, to its cheapest foothold."""
        cm = self.cm
        p = self.params
        out = []
        for j in range(4):
            if not self.is_near_obstacle(pose.feet[j]):
                continue
            a, b = opposite_side(j)
            (ax, ay), (bx, by) = pose.feet[a], pose.feet[b]
            if math.hypot(ax - bx, ay - by) * self.res <= p.safe_stand_distance:
                continue
            best = None
            # cheapest first; the stable sort keeps ray order among ties
            for c, length, dh, cs in sorted(self.step_candidates(pose, j), key=lambda t: t[3]):
                new = pose.with_foot(j, c)
                if cm.pose_cost(new) == INF or not self.supports_com(new):
                    continue
                best = (c, length, dh, cs, new)
                break
            if best is None:
                continue
            c, length, dh, cs, new = best
            out.append(Manoeuvre(Kind.STEP, pose, new, p.step_weight * cs, foot=j,
                                 length=length, foothold=c, height_change=dh,
                                 raw_cost=cs))
        return out

    def base_shift_neighbour(self, pose: RobotPose) -> Manoeuvre | None:
        """Shift the base forward over fixed feet until a front foot is neutral or a rear leg is at reach."""
        frame = self.frame
        cm = self.cm
        reach = cm.geometry.max_reach
        if frame.is_neutral(pose):
            return None
        front = [frame.foot_displacement(pose, j)[0] for j in FRONT_FEET]
        if min(front) <= 0.5 * self.res:
            return None
        rear_slack = [reach + frame.foot_displacement(pose, j)[0] for j in REAR_FEET]
        length = min(min(front), min(rear_slack))
        ux, uy = frame.units[pose.theta]
        nx = pose.x + int(np.rint(length * ux / self.res))
        ny = pose.y + int(np.rint(length * uy / self.res))
        if (nx, ny) == (pose.x, pose.y):
            return None
        new = RobotPose(nx, ny, pose.theta, pose.feet)
        if not self._within_reach(new) or cm.pose_cost(new) == INF or not self.supports_com(new):
            return None
        try:
            avg = cm.segment_avg_base_cost(pose, new)
        except UntraversableSegmentError:
            return None
        actual = math.hypot(nx - pose.x, ny - pose.y) * self.res
        raw = self.params.k10 * actual * avg
        return Manoeuvre(Kind.BASE_SHIFT, pose, new, self.params.step_weight * raw, length=actual, raw_cost=raw)

    def supports_com(self, pose: RobotPose) -> bool:
        """Whether the CoM projection lies strictly inside the hull of the four feet."""
        ox, oy = self._com_cells[pose.theta]
        px, py = pose.x + ox, pose.y + oy
        # usual case: the feet form a convex ring front-left, rear-left, rear-right, front-right
        ring = (pose.feet[0], pose.feet[2], pose.feet[3], pose.feet[1])
        convex = inside = True
        for i in range(4):
            ax, ay = ring[i]
            bx, by = ring[(i + 1) % 4]
            cx, cy = ring[(i + 2) % 4]
            ex, ey = bx - ax, by - ay
            if ex * (cy - by) - ey * (cx - bx) <= 0:
                convex = False
                break
            if ex * (py - ay) - ey * (px - ax) <= 0:
                inside = False
        if convex:
            return inside
        return _strictly_inside_hull(px, py, pose.feet)

    def _within_reach(self, pose: RobotPose) -> bool:
        reach = self.cm.geometry.max_reach + 1e-9
        return all(abs(self.frame.foot_displacement(pose, j)[0]) <= reach for j in range(4))

    def _farthest_drivable(self, pose, foot):
        """Farthest cell ahead of a foot within reach that it can roll to over finite costs.

        Cells are taken on the sagittal line through the foot's neutral cell,
        so the result depends on the base pose and not on where the foot
        happened to land.
        """
        nx0, ny0 = self.frame.neutral[pose.theta][foot]
        key = (pose.theta, nx0 + pose.x, ny0 + pose.y, pose.feet[foot])
        if key in self._roll_cache:
            return self._roll_cache[key]
        best = self._roll_cache[key] = self._farthest_on_line(pose, foot)
        return best

    def _farthest_on_line(self, pose, foot):
        cm = self.cm
        cf = cm.cf
        w, h = cm.width, cm.height
        nx0, ny0 = self.frame.neutral[pose.theta][foot]
        nx0 += pose.x
        ny0 += pose.y
        lon0, _ = self.frame.foot_displacement(pose, foot)
        best = None
        prev = pose.feet[foot]
        first = True
        for (ox, oy), lon, between in self._line_offsets[pose.theta]:
            c = (nx0 + ox, ny0 + oy)
            if lon <= lon0 + 1e-9 or c == prev:
                continue
            cells = supercover(prev, c)[1:] if first else [(nx0 + qx, ny0 + qy) for qx, qy in between]
            first = False
            if any(not (0 <= x < w and 0 <= y < h) or cf[y][x] == INF for x, y in cells):
                break
            best = prev = c
        # creeping forward by a few cells frees no room for a rear step
        if best is None or self.frame.foot_displacement(pose._replace(feet=(best,) * 4), foot)[0] - lon0 \
                < self.params.obstacle_distance - 1e-9:
            return None
        return best

    def _wheel_move(self, pose, foot, target):
        cm = self.cm
        if not cm.in_bounds(*target):
            return None
        # targets come from within reach already
        new = pose.with_foot(foot, target)
        if cm.pose_cost(new) == INF or not self.supports_com(new):
            return None
        key = (pose.feet[foot], target)
        avg = self._segment_cache.get(key)
        if avg is None:
            try:
                avg = cm.segment_avg_foot_cost(pose.feet[foot], target)
            except UntraversableSegmentError:
                avg = INF
            self._segment_cache[key] = avg
        if avg == INF:
            return None
        length = math.hypot(target[0] - pose.feet[foot][0], target[1] - pose.feet[foot][1]) * self.res
        raw = self.params.k11 * length * avg
        return Manoeuvre(Kind.WHEEL_MOVE, pose, new, self.params.step_weight * raw, foot=foot, length=length,
                         foothold=target, raw_cost=raw)

    def wheel_move_neighbours(self, pose: RobotPose) -> list[Manoeuvre]:
        """Front wheels forward when a rear foot is near an obstacle; any foot back to neutral."""
        frame = self.frame
        out = []
        # only as a preparation for a rear step over the obstacle ahead
        if any(self.is_near_obstacle(pose.feet[j]) and self._ray(pose.feet[j], pose.theta) for j in REAR_FEET):
            for j in FRONT_FEET:
                target = self._farthest_drivable(pose, j)
                if target is not None:
                    m = self._wheel_move(pose, j, target)
                    if m is not None:
                        out.append(m)
        neutral = frame.neutral[pose.theta]
        for j in range(4):
            target = (pose.x + neutral[j][0], pose.y + neutral[j][1])
            if target == pose.feet[j]:
                continue
            m = self._wheel_move(pose, j, target)
            if m is not None:
                out.append(m)
        return out


def _strictly_inside_hull(px, py, points) -> bool:
    pts = sorted(set(points))
    if len(pts) < 3:
        return False

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for q in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    for q in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return False
    p = (px, py)
    return all(cross(hull[i], hull[(i + 1) % len(hull)], p) > 0 for i in range(len(hull)))


def _near_obstacle(cm: CostMap, distance: float) -> np.ndarray:
    """Cells with an infinite-cost cell closer than ``distance``."""
    r = distance / cm.resolution
    k = int(math.ceil(r))
    ys, xs = np.mgrid[-k:k + 1, -k:k + 1]
    disc = np.hypot(xs, ys) < r
    blocked = ~np.isfinite(cm.foot.values)
    padded = np.pad(blocked, k, constant_values=True)
    return ndimage.binary_dilation(padded, structure=disc)[k:-k, k:-k]
