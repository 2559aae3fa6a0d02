"""Command-line front end: planning runs, artifacts and the benchmark harness.

Usage examples::

    python -m drivestep --scenario platform --emit-json path.json --emit-svg path.svg
    python -m drivestep --map terrain.txt --start 0.5,0.5,0 --goal 2,1,0 --budget-s 5
    python -m drivestep --bench platform,staircase --reps 3 --out bench.csv
    python -m drivestep --calibrate-step-weight
"""

from __future__ import annotations

import argparse
import ast
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .calibration import calibrate_step_weight
from .costmap import INF, CostMap, CostModelParams
from .errors import DriveStepError, ExpansionError, ValidationError
from .motiongen import MotionParams, expand_path
from .neighbours import Kind, PlannerParams
from .pose import FOOT_SIGNS, RobotGeometry, heading
from .scenarios import BUILTIN, random_map, to_pose
from .search import plan
from .terrain import HeightMap, load_height_map

log = logging.getLogger("drivestep")

_SECTIONS = {
    "planner": PlannerParams,
    "costmap": CostModelParams,
    "geometry": RobotGeometry,
    "motion": MotionParams,
}
_TOP_KEYS = {"map", "start", "goal", "budget_s", "seed", "emit_json", "emit_svg", "name"}


@dataclass
class Scenario:
    """Everything one planning run needs; ``overrides`` maps section -> {field: value}."""

    name: str
    map: HeightMap
    start: tuple
    goal: tuple
    overrides: dict = field(default_factory=dict)
    budget_s: float | None = None
    emit_json: str | None = None
    emit_svg: str | None = None

    def params(self):
        out = {}
        for section, cls in _SECTIONS.items():
            out[section] = cls(**self.overrides.get(section, {}))
        return out


def _parse_value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_pose(text) -> tuple:
    if isinstance(text, (tuple, list)):
        vals = [float(v) for v in text]
    else:
        vals = [float(v) for v in str(text).split(",")]
    if len(vals) != 3:
        raise ValidationError(f"pose needs x,y,theta, got {text!r}")
    return tuple(vals)


def add_override(overrides: dict, key: str, value, where: str = "") -> None:
    section, _, name = key.partition(".")
    if section not in _SECTIONS or not name:
        raise ValidationError(f"unknown setting {key!r}{where}")
    names = {f.name for f in dataclasses.fields(_SECTIONS[section]) if f.init}
    if name not in names:
        raise ValidationError(f"{section} has no parameter {name!r}{where}")
    overrides.setdefault(section, {})[name] = value


def _build_map(spec, seed: int, base: Path | None) -> tuple[HeightMap, tuple | None, tuple | None]:
    """Map from a builtin generator name, ``random`` or a height-map file."""
    if spec in BUILTIN:
        sc = BUILTIN[spec]()
        return sc.map, sc.start, sc.goal
    if spec == "random":
        return random_map(seed), None, None
    path = Path(spec)
    if base is not None and not path.is_absolute():
        path = base / path
    return load_height_map(path), None, None


def load_scenario(path) -> Scenario:
    """Read a ``key = value`` scenario file; dotted keys override parameters."""
    path = Path(path)
    values = {}
    overrides = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        where = f" ({path}:{lineno})"
        if not sep or not key:
            raise ValidationError(f"expected 'key = value'{where}")
        if "." in key:
            add_override(overrides, key, _parse_value(value), where)
        elif key in _TOP_KEYS:
            values[key] = value
        else:
            raise ValidationError(f"unknown key {key!r}{where}")
    if "map" not in values:
        raise ValidationError(f"scenario {path} names no map")
    hmap, start, goal = _build_map(values["map"], int(values.get("seed", 0)), path.parent)
    start = parse_pose(values["start"]) if "start" in values else start
    goal = parse_pose(values["goal"]) if "goal" in values else goal
    if start is None or goal is None:
        raise ValidationError(f"scenario {path} needs start and goal poses")
    budget = float(values["budget_s"]) if "budget_s" in values else None
    return Scenario(values.get("name", path.stem), hmap, start, goal, overrides, budget,
                    values.get("emit_json"), values.get("emit_svg"))


def builtin_scenario(name: str) -> Scenario:
    sc = BUILTIN[name]()
    return Scenario(name, sc.map, sc.start, sc.goal)


# running


def _check_on_map(hmap: HeightMap, pose, label):
    x, y, _ = pose
    if not hmap.in_bounds(*hmap.cell_of(x, y)):
        raise ValidationError(f"{label} pose {pose} lies outside the map")


def run(scenario: Scenario):
    """Plan, expand and serialise; returns (document, abstract path or None)."""
    params = scenario.params()
    planner = params["planner"]
    cm = CostMap(scenario.map, params["costmap"], params["geometry"])
    _check_on_map(scenario.map, scenario.start, "start")
    _check_on_map(scenario.map, scenario.goal, "goal")
    start = to_pose(cm.frame, scenario.map, scenario.start)
    goal = to_pose(cm.frame, scenario.map, scenario.goal)
    iterations = []
    last = None
    for p in plan(cm, start, goal, planner, time_budget=scenario.budget_s):
        iterations.append(p)
        last = p
    doc = {
        "scenario": scenario.name,
        "params": {k: _jsonable(dataclasses.asdict(v)) for k, v in params.items()},
        "start": list(scenario.start),
        "goal": list(scenario.goal),
        "iterations": [_iteration_dict(p) for p in iterations],
    }
    try:
        doc["executable"] = expand_path(last, cm, params=params["motion"]).to_list()
    except ExpansionError as exc:
        doc["executable"] = []
        doc["error"] = "expansion"
        doc["message"] = str(exc)
    return doc, last, cm


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if hasattr(v, "item"):
        return v.item()
    return v


def pose_dict(pose) -> dict:
    return {"cell": [pose.x, pose.y], "theta": pose.theta, "feet": [list(f) for f in pose.feet]}


def _iteration_dict(p) -> dict:
    return {
        "weight": p.weight,
        "cost": p.cost,
        "bound": p.bound,
        "expansions": p.expansions,
        "ms": round(p.wall_ms, 3),
        "path": [{"pose": pose_dict(s), "manoeuvre": _jsonable(m.to_dict()) if m else None} for s, m in p.steps],
    }


def dumps(doc) -> str:
    """Canonical serialisation; parsing and re-dumping reproduces the same bytes."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


# SVG


_COST_COLOURS = ("#f7fcf5", "#e5f5e0", "#c7e9c0", "#a1d99b", "#fdd49e", "#fdbb84", "#fc8d59", "#d7301f")
_KIND_COLOURS = {"Drive": "#2b5797", "Rotate": "#2b5797", "BaseShift": "#7b3294", "WheelMove": "#e08214"}
FRONT_STEP_COLOUR = "#d62728"
REAR_STEP_COLOUR = "#2ca02c"


def _cost_bin(v: float) -> int:
    if v == INF:
        return -1
    return min(int(math.log2(v)), len(_COST_COLOURS) - 1) if v >= 1.0 else 0


def render_svg(cm: CostMap, steps, scale: float = 8.0) -> str:
    """Foot-cost underlay with the path drawn on top.

    Every manoeuvre of ``steps`` yields exactly one element of class
    ``manoeuvre``; front-foot steps are red and rear-foot steps green.
    """
    h, w = cm.height, cm.width
    res = cm.resolution
    px = scale / res  # pixels per meter

    def pt(x, y):
        return x * px, (h * res - y) * px

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * scale:.0f}" height="{h * scale:.0f}" '
           f'viewBox="0 0 {w * scale:.0f} {h * scale:.0f}">',
           '<g class="footcost">']
    known = cm.map.known
    for y in range(h):
        x = 0
        row = cm.cf[y]
        while x < w:
            b = _cost_bin(row[x]) if known[y, x] else -2
            x1 = x
            while x1 + 1 < w and (_cost_bin(row[x1 + 1]) if known[y, x1 + 1] else -2) == b:
                x1 += 1
            colour = {-1: "#555555", -2: "#111111"}.get(b) or _COST_COLOURS[b]
            X, Y = pt(x * res, (y + 1) * res)
            out.append(f'<rect x="{X:.1f}" y="{Y:.1f}" width="{(x1 - x + 1) * scale:.1f}" '
                       f'height="{scale:.1f}" fill="{colour}"/>')
            x = x1 + 1
    out.append("</g>")
    centres = [pt((s.x + 0.5) * res, (s.y + 0.5) * res) for s, _ in steps]
    poly = " ".join(f"{a:.1f},{b:.1f}" for a, b in centres)
    out.append(f'<polyline class="center" points="{poly}" fill="none" stroke="#000" stroke-width="1"/>')
    for i, (s, _) in enumerate(steps):
        if i % 8 and i != len(steps) - 1:
            continue
        a, b = centres[i]
        t = heading(s.theta)
        out.append(f'<line class="heading" x1="{a:.1f}" y1="{b:.1f}" x2="{a + 12 * math.cos(t):.1f}" '
                   f'y2="{b - 12 * math.sin(t):.1f}" stroke="#000" stroke-width="1.5"/>')
    for i, (s, m) in enumerate(steps):
        if m is None:
            continue
        kind = m.kind.value
        if m.kind is Kind.STEP:
            colour = FRONT_STEP_COLOUR if FOOT_SIGNS[m.foot][0] > 0 else REAR_STEP_COLOUR
            (ax, ay), (bx, by) = m.start.feet[m.foot], m.foothold
        elif m.kind is Kind.WHEEL_MOVE:
            colour = _KIND_COLOURS[kind]
            (ax, ay), (bx, by) = m.start.feet[m.foot], m.foothold
        else:
            colour = _KIND_COLOURS[kind]
            (ax, ay), (bx, by) = (m.start.x, m.start.y), (s.x, s.y)
        A = pt((ax + 0.5) * res, (ay + 0.5) * res)
        B = pt((bx + 0.5) * res, (by + 0.5) * res)
        out.append(f'<line class="manoeuvre" data-kind="{kind}" data-index="{i - 1}" x1="{A[0]:.1f}" '
                   f'y1="{A[1]:.1f}" x2="{B[0]:.1f}" y2="{B[1]:.1f}" stroke="{colour}" stroke-width="2"/>')
        if m.kind is Kind.STEP:
            out.append(f'<rect class="foothold" x="{B[0] - scale / 2:.1f}" y="{B[1] - scale / 2:.1f}" '
                       f'width="{scale:.1f}" height="{scale:.1f}" fill="none" stroke="{colour}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# benchmark


def bench(names, reps: int, out, budget_s=None, overrides=None):
    """Run each scenario ``reps`` times; one CSV row per ARA* iteration."""
    rows = []
    for name in names:
        for rep in range(reps):
            sc = builtin_scenario(name) if name in BUILTIN else load_scenario(name)
            if overrides:
                for section, vals in overrides.items():
                    sc.overrides.setdefault(section, {}).update(vals)
            if budget_s is not None:
                sc.budget_s = budget_s
            params = sc.params()
            cm = CostMap(sc.map, params["costmap"], params["geometry"])
            start = to_pose(cm.frame, sc.map, sc.start)
            goal = to_pose(cm.frame, sc.map, sc.goal)
            try:
                for p in plan(cm, start, goal, params["planner"], time_budget=sc.budget_s):
                    rows.append([sc.name, rep, p.weight, f"{p.wall_ms:.3f}", p.expansions, repr(float(p.cost))])
            except DriveStepError as exc:
                rows.append([sc.name, rep, "", "", "", exc.code])
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["scenario", "rep", "weight", "wall_ms", "expansions", "cost"])
    writer.writerows(rows)
    return rows


# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drivestep", description="Hybrid driving-stepping locomotion planner.")
    ap.add_argument("--scenario", help="builtin scenario name or scenario file")
    ap.add_argument("--map", help="height map file, builtin generator name or 'random'")
    ap.add_argument("--seed", type=int, default=0, help="seed for generated maps")
    ap.add_argument("--start", help="start pose x,y,theta (m, m, rad)")
    ap.add_argument("--goal", help="goal pose x,y,theta (m, m, rad)")
    ap.add_argument("--budget-s", type=float, help="planning time budget in seconds")
    ap.add_argument("--initial-weight", type=float, default=3.0)
    ap.add_argument("--neighborhood", type=int, choices=(16, 20), default=20)
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.NAME=VALUE",
                    help="parameter override, e.g. planner.k12=3 (repeatable)")
    ap.add_argument("--emit-json", metavar="PATH")
    ap.add_argument("--emit-svg", metavar="PATH")
    ap.add_argument("--calibrate-step-weight", action="store_true")
    ap.add_argument("--bench", metavar="SUITE", help="comma-separated scenarios, or 'builtin' for all built-in ones")
    ap.add_argument("--reps", type=int, default=1)
    ap.add_argument("--out", metavar="CSV")
    return ap


def _cli_overrides(args) -> dict:
    overrides = {}
    add_override(overrides, "planner.initial_weight", args.initial_weight)
    add_override(overrides, "planner.neighbourhood", args.neighborhood)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects SECTION.NAME=VALUE, got {item!r}")
        add_override(overrides, key.strip(), _parse_value(value.strip()))
    return overrides


def _scenario_from_args(args) -> Scenario:
    if args.scenario:
        sc = builtin_scenario(args.scenario) if args.scenario in BUILTIN else load_scenario(args.scenario)
    elif args.map:
        hmap, start, goal = _build_map(args.map, args.seed, None)
        sc = Scenario(Path(args.map).stem, hmap, start, goal)
    else:
        raise ValidationError("either --scenario or --map is required")
    if args.start:
        sc.start = parse_pose(args.start)
    if args.goal:
        sc.goal = parse_pose(args.goal)
    if sc.start is None or sc.goal is None:
        raise ValidationError("start and goal poses are required")
    for section, vals in _cli_overrides(args).items():
        sc.overrides.setdefault(section, {}).update(vals)
    if args.budget_s is not None:
        sc.budget_s = args.budget_s
    sc.emit_json = args.emit_json or sc.emit_json
    sc.emit_svg = args.emit_svg or sc.emit_svg
    return sc


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("PLANNER_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.calibrate_step_weight:
            params = PlannerParams(**_cli_overrides(args).get("planner", {}))
            print(json.dumps({"step_weight": calibrate_step_weight(params=params)}))
            return 0
        if args.bench:
            names = ["platform", "calibration", "staircase"] if args.bench == "builtin" else args.bench.split(",")
            overrides = _cli_overrides(args)
            if args.out:
                with open(args.out, "w", newline="") as fh:
                    bench(names, args.reps, fh, args.budget_s, overrides)
            else:
                bench(names, args.reps, sys.stdout, args.budget_s, overrides)
            return 0
        sc = _scenario_from_args(args)
    except (DriveStepError, OSError) as exc:
        print(json.dumps({"error": getattr(exc, "code", "io-error"), "message": str(exc)}))
        return 2
    try:
        doc, last, cm = run(sc)
    except DriveStepError as exc:
        doc = {"error": exc.code, "message": f"{sc.name}: {exc}"}
        if sc.emit_json:
            Path(sc.emit_json).write_text(dumps(doc))
        print(json.dumps(doc))
        return 1
    if sc.emit_json:
        Path(sc.emit_json).write_text(dumps(doc))
    if sc.emit_svg:
        Path(sc.emit_svg).write_text(render_svg(cm, last.steps))
    final = doc["iterations"][-1]
    print(json.dumps({"scenario": sc.name, "iterations": len(doc["iterations"]), "cost": final["cost"],
                      "weight": final["weight"], "keyframes": len(doc["executable"])}))
    return 3 if "error" in doc else 0
