"""Foot, base and pose costs computed from a height map.

Foot costs accumulate distance-weighted local height differences around a
cell and become infinite when a large height step sits within a foot radius.
Base costs penalise terrain rising into the robot body and uneven feet.
Pose costs mix both so that flat terrain costs exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BoundsError, UnknownTerrainError, UntraversableSegmentError
from .pose import PoseFrame, RobotGeometry, RobotPose
from .terrain import HeightDiffField, HeightMap, height_diff_field

INF = math.inf


@dataclass(frozen=True)
class CostModelParams:
    k1: float = 100.0
    k2: float = 1.0
    k3: float = 0.5
    k4: float = 0.1
    k5: float = 0.1
    k6: float = 0.5
    foot_radius: float = 0.12
    neighbourhood_radius: float = 0.3
    height_threshold: float = 0.05
    body_circle_radius: float = 0.25
    body_circle_offsets: tuple = (0.2, -0.2)

    def __post_init__(self):
        object.__setattr__(self, "body_circle_offsets", tuple(float(v) for v in self.body_circle_offsets))
        if not (self.foot_radius > 0 and self.neighbourhood_radius > 0 and self.body_circle_radius > 0):
            raise ValueError("radii must be positive")
        if not self.neighbourhood_radius > self.foot_radius:
            raise ValueError("neighbourhood radius must exceed foot radius")


@dataclass(frozen=True, eq=False)
class FootCostField:
    values: np.ndarray
    resolution: float

    def at(self, x: int, y: int) -> float:
        return float(self.values[y, x])

    @property
    def shape(self):
        return self.values.shape


def _offsets_within(radius_cells: float, strict: bool):
    r = int(math.ceil(radius_cells))
    ys, xs = np.mgrid[-r:r + 1, -r:r + 1]
    d = np.hypot(xs, ys)
    return xs, ys, (d < radius_cells) if strict else (d <= radius_cells + 1e-9)


def _weight_kernel(params: CostModelParams, resolution: float):
    xs, ys, inside = _offsets_within(params.neighbourhood_radius / resolution, strict=True)
    dist = np.hypot(xs, ys) * resolution
    return np.where(inside, 1.0 - dist / params.neighbourhood_radius, 0.0)


def _disc(radius: float, resolution: float, strict: bool):
    return _offsets_within(radius / resolution, strict)[2]


def foot_cost(diff: HeightDiffField, cell, params: CostModelParams = CostModelParams()) -> float:
    """Foot cost of a single cell, evaluated directly over its neighbourhood."""
    x, y = cell
    ny, nx = diff.shape
    if not (0 <= x < nx and 0 <= y < ny):
        raise BoundsError(f"cell {cell} outside the map")
    res = diff.resolution
    r = int(math.ceil(params.neighbourhood_radius / res))
    total = 0.0
    for j in range(y - r, y + r + 1):
        for i in range(x - r, x + r + 1):
            d = math.hypot(i - x, j - y) * res
            if d >= params.neighbourhood_radius:
                continue
            inside = 0 <= i < nx and 0 <= j < ny
            dh = diff.values[j, i] if inside else math.nan
            if d < params.foot_radius and not (dh <= params.height_threshold):
                return INF
            if inside and math.isfinite(dh):
                total += dh * (1.0 - d / params.neighbourhood_radius)
    return 1.0 + params.k1 * total


def foot_cost_field(diff: HeightDiffField, params: CostModelParams = CostModelParams()) -> FootCostField:
    """Foot cost for every cell at once."""
    res = diff.resolution
    known = np.isfinite(diff.values)
    dh = np.where(known, diff.values, 0.0)
    weighted = ndimage.correlate(dh, _weight_kernel(params, res), mode="constant", cval=0.0)
    blocked = ~known | (dh > params.height_threshold)
    foot = _disc(params.foot_radius, res, strict=True)
    pad = foot.shape[0] // 2
    # cells beyond the border count as unknown
    padded = np.pad(blocked, pad, constant_values=True)
    blocked = ndimage.binary_dilation(padded, structure=foot)[pad:-pad or None, pad:-pad or None]
    values = 1.0 + params.k1 * weighted
    values[blocked] = INF
    return FootCostField(values, res)


def body_max_field(hmap: HeightMap, params: CostModelParams = CostModelParams()) -> np.ndarray:
    """Max known terrain height within a body circle centred on each cell (-inf if none)."""
    h = np.where(hmap.known, hmap.heights, -np.inf)
    disc = _disc(params.body_circle_radius, hmap.resolution, strict=False)
    return ndimage.maximum_filter(h, footprint=disc, mode="constant", cval=-np.inf)


def supercover(a, b) -> list:
    """Every cell touched by the segment between two cell centres."""
    x0, y0 = a
    x1, y1 = b
    dx, dy = x1 - x0, y1 - y0
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    px, py = x0, y0
    cells = [(px, py)]
    ix = iy = 0
    while ix < nx or iy < ny:
        decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if decision == 0:
            # exact corner crossing touches both side cells
            cells.append((px + sx, py))
            cells.append((px, py + sy))
            px += sx
            py += sy
            ix += 1
            iy += 1
        elif decision < 0:
            px += sx
            ix += 1
        else:
            py += sy
            iy += 1
        cells.append((px, py))
    return cells


def segment_avg_foot_cost(field: FootCostField, start, end) -> float:
    values = field.values
    ny, nx = values.shape
    total = 0.0
    cells = supercover(start, end)
    for x, y in cells:
        if not (0 <= x < nx and 0 <= y < ny):
            raise UntraversableSegmentError(f"segment leaves the map at {(x, y)}")
        v = values[y, x]
        if not math.isfinite(v):
            raise UntraversableSegmentError(f"segment crosses untraversable cell {(x, y)}")
        total += v
    return total / len(cells)


class CostMap:
    """Cost model bound to one height map, with memoised pose costs.

    Pose costs are cached per pose; inserts are idempotent so concurrent
    readers at worst recompute a value.
    """

    def __init__(self, hmap: HeightMap, params: CostModelParams | None = None,
                 geometry: RobotGeometry | None = None):
        self.map = hmap
        self.params = params or CostModelParams()
        self.geometry = geometry or RobotGeometry()
        self.frame = PoseFrame(self.geometry, hmap.resolution, self.params.body_circle_offsets)
        self.diff = height_diff_field(hmap)
        self.foot = foot_cost_field(self.diff, self.params)
        self.body_max = body_max_field(hmap, self.params)
        self.width = hmap.width
        self.height = hmap.height
        # nested lists are much faster than numpy for scalar lookups
        self.cf = self.foot.values.tolist()
        self.h = hmap.heights.tolist()
        self._bm = self.body_max.tolist()
        self._memo = {}
        self._neutral_tables = {}

    @property
    def resolution(self) -> float:
        return self.map.resolution

    def in_bounds(self, x, y) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def foot_cost_at(self, cell) -> float:
        x, y = cell
        if 0 <= x < self.width and 0 <= y < self.height:
            return self.cf[y][x]
        return INF

    def height_at(self, cell) -> float:
        x, y = cell
        if 0 <= x < self.width and 0 <= y < self.height:
            return self.h[y][x]
        return math.nan

    def base_cost(self, pose: RobotPose, leg_height: float | None = None) -> float:
        p = self.params
        hs = []
        for fx, fy in pose.feet:
            if not (0 <= fx < self.width and 0 <= fy < self.height):
                raise BoundsError(f"foot {(fx, fy)} outside the map")
            v = self.h[fy][fx]
            if v != v:
                raise UnknownTerrainError(f"foot {(fx, fy)} on unknown terrain")
            hs.append(v)
        if leg_height is None:
            g = self.geometry
            leg_height = g.driving_leg_height if self.frame.is_neutral(pose) else g.stepping_leg_height
        under = -INF
        for cx, cy in self.frame.disc_centers(pose):
            if not (0 <= cx < self.width and 0 <= cy < self.height):
                raise BoundsError(f"body circle centre {(cx, cy)} outside the map")
            under = max(under, self._bm[cy][cx])
        if under == -INF:
            raise UnknownTerrainError("no known terrain under the body")
        top = max(hs)
        body_bottom = top + leg_height
        return 1.0 + p.k2 * max(under - body_bottom, 0.0) + p.k3 * (top - min(hs))

    def pose_cost(self, pose: RobotPose) -> float:
        """Pose cost; infinite for poses off the map or on untraversable terrain."""
        c = self._memo.get(pose)
        if c is None:
            c = self._pose_cost(pose)
            self._memo[pose] = c
        return c

    def _pose_cost(self, pose):
        cf = self.cf
        hts = self.h
        w, h = self.width, self.height
        costs = []
        hs = []
        for fx, fy in pose.feet:
            if not (0 <= fx < w and 0 <= fy < h):
                return INF
            v = cf[fy][fx]
            if v == INF:
                return INF
            costs.append(v)
            hs.append(hts[fy][fx])
        # same as base_cost, inlined because this is the search hot path
        g = self.geometry
        leg = g.driving_leg_height if self.frame.is_neutral(pose) else g.stepping_leg_height
        under = -INF
        bm = self._bm
        for cx, cy in self.frame.disc_centers(pose):
            if not (0 <= cx < w and 0 <= cy < h):
                return INF
            v = bm[cy][cx]
            if v > under:
                under = v
        if under == -INF:
            return INF
        p = self.params
        top = max(hs)
        cb = 1.0 + p.k2 * max(under - top - leg, 0.0) + p.k3 * (top - min(hs))
        return p.k4 * max(costs) + p.k5 * sum(costs) + p.k6 * cb

    def neutral_costs(self, theta: int) -> list:
        """Pose costs of every neutral pose with orientation ``theta``, as rows[y][x].

        Evaluated for the whole grid at once with the same arithmetic as
        ``pose_cost`` so both give identical values.
        """
        table = self._neutral_tables.get(theta)
        if table is None:
            table = self._neutral_tables[theta] = self._neutral_table(theta).tolist()
        return table

    def _neutral_table(self, theta):
        p = self.params
        costs = [_shifted(self.foot.values, dx, dy, INF) for dx, dy in self.frame.neutral[theta]]
        hs = [_shifted(self.map.heights, dx, dy, np.nan) for dx, dy in self.frame.neutral[theta]]
        under = np.full(self.map.shape, -INF)
        inside = np.ones(self.map.shape, dtype=bool)
        for dx, dy in self.frame.discs[theta]:
            inside &= _shifted(np.zeros(self.map.shape), dx, dy, np.nan) == 0.0
            under = np.maximum(under, _shifted(self.body_max, dx, dy, -INF))
        top = np.maximum(np.maximum(np.maximum(hs[0], hs[1]), hs[2]), hs[3])
        low = np.minimum(np.minimum(np.minimum(hs[0], hs[1]), hs[2]), hs[3])
        cmax = np.maximum(np.maximum(np.maximum(costs[0], costs[1]), costs[2]), costs[3])
        csum = ((costs[0] + costs[1]) + costs[2]) + costs[3]
        with np.errstate(invalid="ignore"):
            cb = 1.0 + p.k2 * np.maximum(under - top - self.geometry.driving_leg_height, 0.0) + p.k3 * (top - low)
            out = p.k4 * cmax + p.k5 * csum + p.k6 * cb
        valid = np.isfinite(csum) & inside & (under > -INF)
        return np.where(valid, out, INF)

    def segment_avg_foot_cost(self, start, end) -> float:
        return segment_avg_foot_cost(self.foot, start, end)

    def segment_avg_base_cost(self, start: RobotPose, end: RobotPose, leg_height=None) -> float:
        """Mean base cost over base positions sampled every cell along a shift.

        Feet stay where ``start`` has them.
        """
        n = int(math.ceil(math.hypot(end.x - start.x, end.y - start.y)))
        if leg_height is None and n > 0:
            leg_height = self.geometry.stepping_leg_height
        total = 0.0
        for k in range(n + 1):
            t = k / n if n else 0.0
            bx = int(round(start.x + t * (end.x - start.x)))
            by = int(round(start.y + t * (end.y - start.y)))
            try:
                total += self.base_cost(RobotPose(bx, by, start.theta, start.feet), leg_height)
            except (BoundsError, UnknownTerrainError) as exc:
                raise UntraversableSegmentError(str(exc)) from None
        return total / (n + 1)


def _shifted(arr, dx, dy, fill):
    """``out[y, x] = arr[y + dy, x + dx]``, with ``fill`` where that falls off the grid."""
    ny, nx = arr.shape
    out = np.full(arr.shape, fill, dtype=float)
    ys0, ys1 = max(0, -dy), min(ny, ny - dy)
    xs0, xs1 = max(0, -dx), min(nx, nx - dx)
    if ys0 < ys1 and xs0 < xs1:
        out[ys0:ys1, xs0:xs1] = arr[ys0 + dy:ys1 + dy, xs0 + dx:xs1 + dx]
    return out


def base_cost(hmap: HeightMap, pose: RobotPose, geometry: RobotGeometry | None = None,
              params: CostModelParams | None = None, leg_height: float | None = None) -> float:
    """Body clearance and foot-height spread cost of a pose."""
    return CostMap(hmap, params, geometry).base_cost(pose, leg_height)


def pose_cost(hmap: HeightMap, pose: RobotPose, geometry: RobotGeometry | None = None,
              params: CostModelParams | None = None) -> float:
    """Pose cost with errors propagated instead of mapped to infinity."""
    cm = CostMap(hmap, params, geometry)
    for fx, fy in pose.feet:
        if not cm.in_bounds(fx, fy):
            raise BoundsError(f"foot {(fx, fy)} outside the map")
    costs = [cm.cf[fy][fx] for fx, fy in pose.feet]
    if INF in costs:
        return INF
    p = cm.params
    return p.k4 * max(costs) + p.k5 * sum(costs) + p.k6 * cm.base_cost(pose)
