import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import flat
from drivestep.cli import bench, dumps, load_scenario, main, parse_pose
from drivestep.errors import ValidationError
from drivestep.terrain import HeightMap, save_height_map


@pytest.fixture
def flat_file(tmp_path):
    path = tmp_path / "flat.txt"
    save_height_map(flat(2.5, 2.0), path)
    return path


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, json.loads(out.strip().splitlines()[-1])


def test_flat_map_single_iteration(flat_file, tmp_path, capsys):
    out = tmp_path / "path.json"
    code, summary = _run(["--map", flat_file, "--start", "0.8,1.0,0", "--goal", "1.6,1.0,0",
                          "--initial-weight", "1", "--emit-json", out], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert [it["weight"] for it in doc["iterations"]] == [1.0]
    assert {"params", "iterations", "executable"} <= set(doc)
    first = doc["iterations"][0]
    assert {"weight", "cost", "bound", "expansions", "ms", "path"} <= set(first)
    assert first["path"][0]["manoeuvre"] is None
    assert all(s["manoeuvre"]["kind"] == "Drive" for s in first["path"][1:])
    assert {k["tag"] for k in doc["executable"]} == {"DriveLow"}


def test_unreachable_goal(tmp_path, capsys):
    h = np.zeros((80, 100))
    h[:, 30:70] = 0.5  # wall across the map, wider than a step reaches
    path = tmp_path / "wall.txt"
    save_height_map(HeightMap.from_array(h), path)
    out = tmp_path / "path.json"
    code, summary = _run(["--map", path, "--start", "0.5,1.0,0", "--goal", "2.0,1.0,0",
                          "--emit-json", out], capsys)
    assert code != 0
    assert summary["error"] == "no-path"
    assert json.loads(out.read_text())["error"] == "no-path"


@pytest.fixture(scope="module")
def platform_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("platform")
    code = main(["--scenario", "platform", "--budget-s", "10",
                 "--emit-json", str(d / "path.json"), "--emit-svg", str(d / "path.svg")])
    return code, d


def test_platform_budget_run(platform_run):
    code, d = platform_run
    assert code == 0
    doc = json.loads((d / "path.json").read_text())
    costs = [it["cost"] for it in doc["iterations"]]
    assert len(costs) >= 2
    assert all(a >= b for a, b in zip(costs, costs[1:]))
    assert any(k["tag"] == "LiftFoot" for k in doc["executable"])


def test_json_round_trip(platform_run):
    _, d = platform_run
    text = (d / "path.json").read_text()
    assert dumps(json.loads(text)) == text


def test_svg_manoeuvre_parity(platform_run):
    _, d = platform_run
    doc = json.loads((d / "path.json").read_text())
    svg = (d / "path.svg").read_text()
    final = doc["iterations"][-1]["path"]
    kinds = [s["manoeuvre"]["kind"] for s in final[1:]]
    assert svg.count('class="manoeuvre"') == len(kinds)
    for kind in set(kinds):
        assert svg.count(f'data-kind="{kind}"') == kinds.count(kind)
    steps = [s["manoeuvre"] for s in final[1:] if s["manoeuvre"]["kind"] == "AbstractStep"]
    assert svg.count('class="foothold"') == len(steps)
    front = sum(m["foot"] in (0, 1) for m in steps)
    assert svg.count('stroke="#d62728" stroke-width="2"') == front
    assert svg.count('stroke="#2ca02c" stroke-width="2"') == len(steps) - front
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_scenario_file(tmp_path, flat_file):
    path = tmp_path / "s.txt"
    path.write_text(f"# comment\nmap = {flat_file.name}\nstart = 0.8,1.0,0\ngoal = 1.6, 1.0, 0\n"
                    "planner.k12 = 3.0\ncostmap.k1 = 50\ngeometry.max_reach = 0.5\nbudget_s = 4\n")
    sc = load_scenario(path)
    params = sc.params()
    assert params["planner"].k12 == 3.0 and params["planner"].k_back == 2.0
    assert params["costmap"].k1 == 50
    assert params["geometry"].max_reach == 0.5
    assert sc.budget_s == 4.0 and sc.goal == (1.6, 1.0, 0.0)


@pytest.mark.parametrize("line, message", [
    ("planner.bogus = 1", "planner has no parameter 'bogus'"),
    ("colour = red", "unknown key 'colour'"),
    ("nonsense", "expected 'key = value'"),
])
def test_scenario_errors_name_the_line(tmp_path, flat_file, line, message):
    path = tmp_path / "bad.txt"
    path.write_text(f"map = {flat_file}\nstart = 0.8,1.0,0\n{line}\n")
    with pytest.raises(ValidationError) as err:
        load_scenario(path)
    assert message in str(err.value)
    assert f"{path}:3" in str(err.value)


def test_bad_input_exit_code(tmp_path, flat_file, capsys):
    code, summary = _run(["--map", flat_file, "--start", "0.8,1.0", "--goal", "1.6,1.0,0"], capsys)
    assert code == 2 and summary["error"] == "invalid-input"
    code, summary = _run(["--map", flat_file, "--start", "0.8,1.0,0", "--goal", "9,1.0,0"], capsys)
    assert code != 0 and summary["error"] == "invalid-input"
    code, summary = _run(["--map", flat_file, "--start", "0.8,1.0,0", "--goal", "1.6,1.0,0",
                          "--set", "planner.nope=1"], capsys)
    assert code == 2


def test_parse_pose():
    assert parse_pose("1, 2.5,-0.5") == (1.0, 2.5, -0.5)
    with pytest.raises(ValidationError):
        parse_pose("1,2")


def test_bench_rows_are_deterministic(tmp_path, flat_file):
    path = tmp_path / "s.txt"
    path.write_text(f"name = hop\nmap = {flat_file}\nstart = 0.8,1.0,0\ngoal = 1.5,1.2,0.5\n")
    buf = io.StringIO()
    bench([str(path)], 3, buf)
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert list(rows[0]) == ["scenario", "rep", "weight", "wall_ms", "expansions", "cost"]
    per_rep = {}
    for r in rows:
        per_rep.setdefault(r["rep"], []).append((r["weight"], r["expansions"], r["cost"]))
    assert len(per_rep) == 3
    assert per_rep["0"] == per_rep["1"] == per_rep["2"]


def test_module_entry_point_and_log_level(flat_file, tmp_path):
    env = dict(os.environ, PLANNER_LOG="INFO")
    proc = subprocess.run([sys.executable, "-m", "drivestep", "--map", str(flat_file), "--start", "0.8,1.0,0",
                           "--goal", "1.2,1.0,0", "--initial-weight", "1.5"],
                          capture_output=True, text=True, env=env, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["weight"] == 1.0
    assert "INFO drivestep" in proc.stderr
