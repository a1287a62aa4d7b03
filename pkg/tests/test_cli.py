from __future__ import annotations

import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from semexplore.cli import main
from semexplore.grid import OccupancyGrid
from semexplore.sim.batch import CSV_COLUMNS, SUMMARY_MODULES, read_csv, summarize_rows
from semexplore.sim.scenario import ScenarioError, loads, scenario_dict

from worlds import open_room

PROMPT = "Pick up the <p>bottle</p> and place it in the <p>tray</p>."


def _write(path: Path, payload) -> Path:
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload, indent=2), encoding="utf-8")
    return path


@pytest.fixture
def room_scenario(tmp_path):
    return _write(tmp_path / "room.json", scenario_dict(open_room(), PROMPT, seed=0))


def _tree(root: Path) -> set[str]:
    return {str(p.relative_to(root)) for p in root.rglob("*")}


# ---------------------------------------------------------------- scenario files

def test_scenario_roundtrip_keeps_world():
    sc = loads(json.dumps(scenario_dict(open_room(), PROMPT, seed=7)))
    assert sc.seed == 7 and sc.target_class == "bottle"
    w = sc.world_for(7)
    assert len(w.walls) == 4 and len(w.tables) == 1 and len(w.objects) == 2
    assert w.robot_start.x == 2.0 and w.robot_start.yaw == 0.0


def test_scenario_params_override_nested_sections():
    text = json.dumps({"generator": {"rooms": 2}, "prompt": PROMPT, "budget_s": 90,
                       "params": {"exploration": {"R_e": 7.5}, "dbscan": {"min_pts": 7},
                                  "episode": {"c_stop": 0.7}},
                       "sensors": {"detector": {"tp_rate": 0.5}}})
    sc = loads(text)
    assert sc.params.exploration.R_e == 7.5
    assert sc.params.aggregation.dbscan.min_pts == 7
    assert sc.params.c_stop == 0.7 and sc.params.budget_s == 90
    assert sc.params.sensors.detector.tp_rate == 0.5
    assert sc.generator.rooms == 2 and sc.generator.target == "bottle"


@pytest.mark.parametrize("text, line, column", [
    ('{\n  "seed": 1,\n  "params": {"exploration": {"R_e": 5,}}\n}', 3, 39),
    ('{\n  "seed": 1,\n  "params": {"exploration": {"R_e": "far"}}\n}', 3, 30),
    ('{\n  "seed": 1,\n  "params": {\n    "warp": {}\n  }\n}', 4, 5),
    ('{\n  "prompt": "Pick up the <p>unicorn</p> and place it in the <p>box</p>."\n}', 2, 3),
])
def test_scenario_errors_carry_line_and_column(text, line, column):
    with pytest.raises(ScenarioError) as info:
        loads(text)
    assert (info.value.line, info.value.column) == (line, column)
    assert f"line {line}, column {column}" in str(info.value)


def test_unknown_object_class_in_world_rejected():
    d = scenario_dict(open_room(), PROMPT)
    d["world"]["objects"][0]["class"] = "unicorn"
    with pytest.raises(ScenarioError, match="unicorn"):
        loads(json.dumps(d))


def test_world_and_generator_are_exclusive():
    d = scenario_dict(open_room(), PROMPT)
    d["generator"] = {"rooms": 2}
    with pytest.raises(ScenarioError):
        loads(json.dumps(d))


def test_robot_start_inside_wall_rejected():
    d = scenario_dict(open_room(), PROMPT)
    d["robot_start"] = [4.9, 4.0, 0.0]
    with pytest.raises(ScenarioError, match="obstacle"):
        loads(json.dumps(d))


# ---------------------------------------------------------------- run

def test_run_success_writes_three_artifacts(tmp_path, room_scenario, capsys):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(room_scenario), "--seed", "0", "--out", str(out)]) == 0
    lines = (out / "episode.jsonl").read_text(encoding="utf-8").splitlines()
    log = json.loads(lines[0])
    assert log["outcome"] == "success" and log["success"]
    assert (out / "grid.pgm").read_bytes().startswith(b"P5")
    meta = json.loads((out / "grid.json").read_text(encoding="utf-8"))
    g = OccupancyGrid.load_pgm(out / "grid.pgm")
    assert g.resolution == meta["resolution"] == 0.1
    assert (g.origin.x, g.origin.y) == (meta["origin_x"], meta["origin_y"])
    assert (g.cells != -1).sum() > 1000
    objs = [json.loads(x) for x in (out / "semantic_map.jsonl").read_text(encoding="utf-8").splitlines()]
    assert any(o["class_id"] == 0 and o["confidence"] >= 0.6 for o in objs)
    assert "success" in capsys.readouterr().out


def test_run_with_absent_target_exits_two(tmp_path):
    sc = _write(tmp_path / "empty.json", scenario_dict(open_room(target=None), PROMPT))
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(sc), "--out", str(out)]) == 2
    log = json.loads((out / "episode.jsonl").read_text(encoding="utf-8"))
    assert log["outcome"] == "frontiers_exhausted"


def test_run_with_unknown_class_exits_one(tmp_path, capsys):
    d = scenario_dict(open_room(), "Pick up the <p>unicorn</p> and place it in the <p>tray</p>.")
    sc = _write(tmp_path / "bad.json", d)
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(sc), "--out", str(out)]) == 1
    assert "unknown class" in capsys.readouterr().err
    assert not out.exists()


def test_run_with_malformed_json_reports_position(tmp_path, capsys):
    sc = _write(tmp_path / "broken.json", '{\n  "seed": 1,\n  "prompt": oops\n}')
    assert main(["run", "--scenario", str(sc), "--out", str(tmp_path / "o")]) == 1
    assert "line 3" in capsys.readouterr().err


def test_run_missing_file_exits_one(tmp_path):
    assert main(["run", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 1


def test_run_touches_nothing_outside_out_dir(tmp_path, room_scenario, monkeypatch):
    work = tmp_path / "cwd"
    work.mkdir()
    monkeypatch.chdir(work)
    before = _tree(tmp_path)
    main(["run", "--scenario", str(room_scenario), "--out", str(tmp_path / "out")])
    created = _tree(tmp_path) - before
    assert created and all(p == "out" or p.startswith("out" + os.sep) for p in created)
    assert _tree(work) == set()


def test_run_is_deterministic(tmp_path, room_scenario):
    logs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        main(["run", "--scenario", str(room_scenario), "--seed", "3", "--out", str(out)])
        d = json.loads((out / "episode.jsonl").read_text(encoding="utf-8"))
        d.pop("wall_time_ms")
        for p in d["phases"]:
            p.pop("wall_time_ms")
        logs.append(d)
        assert (out / "grid.pgm").read_bytes() == (tmp_path / "o0" / "grid.pgm").read_bytes()
    assert logs[0] == logs[1]


# ---------------------------------------------------------------- sweep

@pytest.fixture(scope="module")
def sweep_out(tmp_path_factory):
    root = tmp_path_factory.mktemp("sweep")
    sc = _write(root / "room.json", scenario_dict(open_room(), PROMPT))
    out = root / "out"
    code = main(["sweep", "--scenario", str(sc), "--radii", "2.5,5", "--episodes", "10", "--seed", "100",
                 "--out", str(out)])
    return root, sc, out, code


def test_sweep_rows_and_groups(sweep_out):
    _, _, out, code = sweep_out
    assert code == 0
    rows = read_csv(out / "episodes.csv")
    assert len(rows) == 20
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert sorted(summary["time_quartiles"]) == ["2.5", "5"]
    assert summary["episodes"] == 20 and summary["seed_range"] == [100, 109]
    assert sorted({int(r["seed"]) for r in rows}) == list(range(100, 110))


def test_sweep_summary_recomputable_from_csv(sweep_out):
    _, _, out, _ = sweep_out
    rows = read_csv(out / "episodes.csv")
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert json.loads(json.dumps(summarize_rows(rows).to_dict())) == summary
    for m in SUMMARY_MODULES:
        assert summary["module_sr"][m] == pytest.approx(100 * sum(int(r[m]) for r in rows) / len(rows))
    assert 0 <= summary["overall_sr"] <= min(summary["module_sr"].values()) + 1e-9


def test_sweep_rows_are_consistent(sweep_out):
    _, _, out, _ = sweep_out
    for r in read_csv(out / "episodes.csv"):
        assert all(r[p] in ("0", "1") for p in ("slam", "exploration", "detection", "approach", "navigation"))
        if r["success"] == "1":
            assert r["navigation"] == "1" and r["detection"] == "1"
            assert math.isfinite(float(r["goal_x"])) and math.isfinite(float(r["goal_yaw_deg"]))
        assert 0 <= float(r["sim_time_s"]) <= 600


def test_sweep_is_deterministic(sweep_out):
    root, sc, out, _ = sweep_out
    again = root / "again"
    main(["sweep", "--scenario", str(sc), "--radii", "2.5,5", "--episodes", "10", "--seed", "100",
          "--out", str(again)])
    assert (again / "summary.json").read_text() == (out / "summary.json").read_text()
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_ms"} for r in rows]
    assert strip(read_csv(again / "episodes.csv")) == strip(read_csv(out / "episodes.csv"))


@pytest.mark.parametrize("radii", ["0,5", "-1", "a,b", ""])
def test_sweep_rejects_bad_radii(radii, room_scenario, tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--scenario", str(room_scenario), "--radii", radii, "--out", str(tmp_path / "o")])
    assert info.value.code != 0


# ---------------------------------------------------------------- gen-world

def test_gen_world_is_deterministic_and_loadable(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for f in (a, b):
        assert main(["gen-world", "--rooms", "4", "--size", "16x12", "--seed", "1", "--out", str(f)]) == 0
    assert a.read_bytes() == b.read_bytes()
    sc = loads(a.read_text(encoding="utf-8"))
    assert sc.world is not None and len(sc.world.objects_of("bottle")) == 1


def test_gen_world_radius_constraint(tmp_path):
    f = tmp_path / "w.json"
    assert main(["gen-world", "--seed", "4", "--radius", "2.5", "--out", str(f)]) == 0
    w = loads(f.read_text(encoding="utf-8")).world
    (t,) = w.objects_of("bottle")
    assert math.hypot(t.position[0] - w.robot_start.x, t.position[1] - w.robot_start.y) <= 2.5


def test_gen_world_bad_size_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["gen-world", "--size", "16by12", "--out", str(tmp_path / "w.json")])


def test_module_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "semexplore", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("run", "sweep", "gen-world"):
        assert cmd in res.stdout
