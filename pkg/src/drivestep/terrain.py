"""Height maps and the local height-difference field derived from them.

Grids are stored row-major as ``heights[y, x]``; row 0 is the minimum-y edge.
Cell ``(x, y)`` covers ``[x*res, (x+1)*res) x [y*res, (y+1)*res)`` in meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateTerrainError, MapParseError, ValidationError

DEFAULT_RESOLUTION = 0.025

_NEIGHBOURS_8 = [(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dx or dy]


@dataclass(frozen=True, eq=False)
class HeightMap:
    """Regular grid of terrain heights with a mask of observed cells."""

    heights: np.ndarray
    known: np.ndarray
    resolution: float = DEFAULT_RESOLUTION

    def __post_init__(self):
        heights = np.array(self.heights, dtype=float)
        known = np.array(self.known, dtype=bool)
        if heights.ndim != 2 or heights.shape != known.shape:
            raise ValidationError("heights and known mask must be 2D arrays of equal shape")
        if heights.shape[0] < 1 or heights.shape[1] < 1:
            raise ValidationError("height map needs at least one cell")
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise ValidationError(f"resolution must be positive, got {self.resolution}")
        if not np.all(np.isfinite(heights[known])):
            raise ValidationError("known cells must have finite heights")
        heights[~known] = np.nan
        heights.flags.writeable = False
        known.flags.writeable = False
        object.__setattr__(self, "heights", heights)
        object.__setattr__(self, "known", known)

    @classmethod
    def from_array(cls, heights, resolution=DEFAULT_RESOLUTION):
        """Build a map from an array where NaN marks unknown cells."""
        heights = np.asarray(heights, dtype=float)
        return cls(heights, np.isfinite(heights), resolution)

    @property
    def width(self) -> int:
        return self.heights.shape[1]

    @property
    def height(self) -> int:
        return self.heights.shape[0]

    @property
    def shape(self):
        return self.heights.shape

    def in_bounds(self, x, y) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def cell_of(self, px: float, py: float) -> tuple[int, int]:
        """Cell containing the metric point ``(px, py)``."""
        return int(math.floor(px / self.resolution)), int(math.floor(py / self.resolution))

    def center_of(self, x: int, y: int) -> tuple[float, float]:
        return (x + 0.5) * self.resolution, (y + 0.5) * self.resolution

    def height_at(self, x: int, y: int) -> float:
        """Terrain height of a cell; NaN when unknown."""
        return float(self.heights[y, x])


@dataclass(frozen=True, eq=False)
class HeightDiffField:
    """Per-cell unsigned local height difference; NaN where not assessable."""

    values: np.ndarray
    resolution: float

    @property
    def known(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def shape(self):
        return self.values.shape

    def at(self, x: int, y: int) -> float:
        return float(self.values[y, x])


def load_height_map(path) -> HeightMap:
    """Parse a text height map.

    The header reads ``resolution <m> width <n> height <n>``; it is followed by
    ``height`` rows of ``width`` entries, each a height in meters or ``?``.
    Blank lines and ``#`` comments are ignored.
    """
    text = Path(path).read_text()
    return parse_height_map(text)


def parse_height_map(text: str) -> HeightMap:
    rows = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            header = _parse_header(line, lineno)
            continue
        rows.append((lineno, line.split()))
    if header is None:
        raise MapParseError("missing header", line=1)
    resolution, width, height = header
    if len(rows) != height:
        raise MapParseError(f"expected {height} rows, found {len(rows)}", line=rows[-1][0] if rows else None)

    heights = np.full((height, width), np.nan)
    for row_idx, (lineno, entries) in enumerate(rows):
        if len(entries) != width:
            raise MapParseError(f"expected {width} entries, found {len(entries)}", line=lineno)
        for col, entry in enumerate(entries):
            if entry == "?":
                continue
            try:
                value = float(entry)
            except ValueError:
                raise MapParseError(f"bad height {entry!r}", line=lineno, offset=col) from None
            if not math.isfinite(value):
                raise MapParseError(f"non-finite height {entry!r}", line=lineno, offset=col)
            heights[row_idx, col] = value
    return HeightMap(heights, np.isfinite(heights), resolution)


def _parse_header(line, lineno):
    tokens = line.split()
    if len(tokens) != 6 or tokens[0::2] != ["resolution", "width", "height"]:
        raise MapParseError("header must be 'resolution <m> width <int> height <int>'", line=lineno)
    try:
        resolution = float(tokens[1])
        width = int(tokens[3])
        height = int(tokens[5])
    except ValueError:
        raise MapParseError("malformed header value", line=lineno) from None
    if not resolution > 0:
        raise ValidationError(f"resolution must be positive, got {tokens[1]}")
    if width < 1 or height < 1:
        raise ValidationError("width and height must be at least 1")
    return resolution, width, height


def format_height_map(hmap: HeightMap) -> str:
    lines = [f"resolution {hmap.resolution!r} width {hmap.width} height {hmap.height}"]
    for y in range(hmap.height):
        lines.append(" ".join(
            repr(float(hmap.heights[y, x])) if hmap.known[y, x] else "?" for x in range(hmap.width)
        ))
    return "\n".join(lines) + "\n"


def save_height_map(hmap: HeightMap, path) -> None:
    Path(path).write_text(format_height_map(hmap))


def height_diff_field(hmap: HeightMap) -> HeightDiffField:
    """Max absolute height difference of each cell to its 8 neighbours.

    Cells on the map border, unknown cells and cells touching an unknown cell
    are not assessable and come out as NaN.
    """
    h = hmap.heights
    ny, nx = h.shape
    padded = np.full((ny + 2, nx + 2), np.nan)
    padded[1:-1, 1:-1] = h
    out = np.zeros_like(h)
    for dx, dy in _NEIGHBOURS_8:
        shifted = padded[1 + dy:1 + dy + ny, 1 + dx:1 + dx + nx]
        # NaN propagates through both abs and maximum
        out = np.maximum(out, np.abs(h - shifted))
    return HeightDiffField(out, hmap.resolution)


def _plane_fit(hmap: HeightMap, center, radius):
    cx, cy = center
    if not hmap.in_bounds(cx, cy):
        raise DegenerateTerrainError(f"center {center} outside the map")
    res = hmap.resolution
    r_cells = int(math.ceil(radius / res))
    x0, x1 = max(0, cx - r_cells), min(hmap.width, cx + r_cells + 1)
    y0, y1 = max(0, cy - r_cells), min(hmap.height, cy + r_cells + 1)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= (radius / res) ** 2 + 1e-9
    inside &= hmap.known[y0:y1, x0:x1]
    if inside.sum() < 3:
        raise DegenerateTerrainError("fewer than 3 known cells for slope estimate")
    px = (xs[inside] - cx) * res
    py = (ys[inside] - cy) * res
    z = hmap.heights[y0:y1, x0:x1][inside]
    design = np.column_stack([px, py, np.ones_like(px)])
    coef, _, rank, _ = np.linalg.lstsq(design, z, rcond=None)
    if rank < 3:
        raise DegenerateTerrainError("known cells are collinear; plane is undetermined")
    return coef[0], coef[1]


def ground_slope(hmap: HeightMap, center, radius: float = 0.5) -> float:
    """Inclination (rad) of the least-squares plane through a disc of cells."""
    gx, gy = _plane_fit(hmap, center, radius)
    return math.atan(math.hypot(gx, gy))


def directional_slope(hmap: HeightMap, center, heading: float, radius: float = 0.5) -> float:
    """Signed slope angle of the fitted plane along ``heading``; uphill is positive."""
    gx, gy = _plane_fit(hmap, center, radius)
    return math.atan(gx * math.cos(heading) + gy * math.sin(heading))
