import json
import math
from dataclasses import replace

import pytest

from omninav import cli
from omninav.episode import csv_header
from omninav.harness import (
    JITTER_POS,
    JITTER_YAW,
    Scenario,
    ScenarioError,
    export_artifacts,
    jittered_origin,
    load_scenario_world,
    render_world_svg,
    run_comparison,
    run_scenario,
    run_trial,
    summarize,
    summary_csv,
)

from conftest import WORLDS


def _corridor_scenario(tmp_path, trials=1, seed=3):
    """Narrow corridor: every sideways clearance is under the half footprint,
    so the first forward step terminates with a collision."""
    world = {
        "bounds": [0, 0, 4, 0.5],
        "walls": [[0, 0, 4, 0], [4, 0, 4, 0.5], [4, 0.5, 0, 0.5], [0, 0.5, 0, 0]],
        "entities": [
            {
                "label": "cup",
                "shape": {"kind": "disc", "center": [3.5, 0.25], "radius": 0.12},
                "height": "low",
            }
        ],
        "regions": [],
    }
    path = tmp_path / "corridor.world"
    path.write_text(json.dumps(world))
    return Scenario(
        name="corridor",
        world_path=str(path),
        origin=(0.5, 0.25, 0.0),
        target=(3.5, 0.25),
        target_label="cup",
        schedule=((0.0, "see the cup"),),
        strategy="all",
        trials=trials,
        seed=seed,
        max_time=5.0,
    )


def _kitchen(**overrides):
    scenario = Scenario.from_file(WORLDS / "basic_kitchen.json")
    return replace(scenario, **overrides) if overrides else scenario


def _parse_rows(csv_text):
    lines = csv_text.strip().split("\n")
    return lines[0], [[float(v) for v in line.split(",")] for line in lines[1:]]


def _recompute_final_error(result, target, tick_s=0.1):
    """Independent re-derivation of the end pose from the logged rows alone."""
    _, rows = _parse_rows(result.csv())
    t, x, y, yaw, linear = rows[-1][:5]
    if result.termination != "collision":
        x += linear * math.cos(yaw) * tick_s
        y += linear * math.sin(yaw) * tick_s
    return math.hypot(x - target[0], y - target[1])


class TestScenario:
    def test_from_file_reads_packaged_scenario(self):
        s = _kitchen()
        assert s.name == "kitchen"
        assert s.origin == (1.45, 0.8, 0.0)
        assert s.target == (0.35, 0.8)
        assert s.schedule == ((0.0, "Go to the kitchen"),)
        assert s.trials == 5
        assert load_scenario_world(s).bounds == (0.0, 0.0, 2.5, 1.6)

    def test_world_name_resolves_to_packaged_dir(self):
        data = {
            "name": "x",
            "world": "basic.world",
            "origin": [1.0, 0.8, 0.0],
            "target": {"point": [0.5, 0.5], "label": "kitchen"},
            "schedule": [[0.0, "go"]],
        }
        s = Scenario.from_dict(data)
        assert s.world_path.endswith("worlds/basic.world")

    def test_unknown_world_rejected(self):
        data = {
            "name": "x",
            "world": "missing.world",
            "origin": [0, 0, 0],
            "target": {"point": [0, 0], "label": "x"},
            "schedule": [],
        }
        with pytest.raises(ScenarioError, match="world not found"):
            Scenario.from_dict(data)

    def test_validation(self, tmp_path):
        base = _kitchen()
        with pytest.raises(ScenarioError):
            replace(base, trials=0)
        with pytest.raises(ScenarioError):
            replace(base, strategy="fastest")
        with pytest.raises(ScenarioError):
            replace(base, max_time=0.0)
        with pytest.raises(ScenarioError, match="start at time 0"):
            replace(base, schedule=((1.0, "late"),))
        with pytest.raises(ScenarioError, match="nondecreasing"):
            replace(base, schedule=((0.0, "a"), (2.0, "b"), (1.0, "c")))

    def test_bad_config_value_rejected(self):
        data = {
            "name": "x",
            "world": "basic.world",
            "origin": [1.0, 0.8, 0.0],
            "target": {"point": [0.5, 0.5], "label": "kitchen"},
            "schedule": [[0.0, "go"]],
            "config": {"slices.n": "abc"},
        }
        with pytest.raises(ScenarioError, match="bad scenario"):
            Scenario.from_dict(data)

    def test_config_override_applies(self):
        data = {
            "name": "x",
            "world": "basic.world",
            "origin": [1.0, 0.8, 0.0],
            "target": {"point": [0.5, 0.5], "label": "kitchen"},
            "schedule": [[0.0, "go"]],
            "config": {"slices.n": "4"},
        }
        assert Scenario.from_dict(data).config.n_split == 4

    def test_from_file_errors(self, tmp_path):
        with pytest.raises(ScenarioError):
            Scenario.from_file(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{\n  broken\n}")
        with pytest.raises(ScenarioError, match="bad.json:2"):
            Scenario.from_file(bad)

    def test_empty_schedule_allowed(self):
        s = _kitchen(schedule=(), max_time=1.0)
        assert s.schedule == ()


class TestJitter:
    def test_bounds_and_determinism(self):
        s = _kitchen()
        for k in range(10):
            ox, oy, oyaw = jittered_origin(s, k)
            assert abs(ox - s.origin[0]) <= JITTER_POS
            assert abs(oy - s.origin[1]) <= JITTER_POS
            assert abs(oyaw - s.origin[2]) <= JITTER_YAW
        assert jittered_origin(s, 3) == jittered_origin(s, 3)
        assert jittered_origin(s, 3) != jittered_origin(s, 4)

    def test_seed_shifts_jitter(self):
        s = _kitchen()
        assert jittered_origin(s, 0) != jittered_origin(replace(s, seed=99), 0)


class TestRunTrial:
    def test_identical_reruns_identical_bytes(self):
        s = _kitchen(trials=1, max_time=2.0)
        a = run_trial(s, 0)
        b = run_trial(s, 0)
        assert a.csv() == b.csv()
        assert a.final_error == b.final_error

    def test_timeout_row_count_and_header(self):
        s = _kitchen(trials=1, max_time=3.0)
        r = run_trial(s, 0)
        assert r.termination == "timeout"
        assert len(r.records) == 30
        header, rows = _parse_rows(r.csv())
        assert header == csv_header(8)
        assert len(rows) == 30
        assert rows[0][0] == 0.0
        assert rows[-1][0] == pytest.approx(2.9)

    def test_final_error_matches_row_reconstruction_timeout(self):
        s = _kitchen(trials=1, max_time=3.0)
        r = run_trial(s, 0)
        assert r.termination == "timeout"
        # rows carry 6 decimal places, so agreement is bounded by that quantization
        assert _recompute_final_error(r, s.target) == pytest.approx(r.final_error, abs=2e-6)

    def test_final_error_matches_row_reconstruction_collision(self, tmp_path):
        s = _corridor_scenario(tmp_path)
        r = run_trial(s, 0)
        assert r.termination == "collision"
        assert _recompute_final_error(r, s.target) == pytest.approx(r.final_error, abs=2e-6)

    def test_empty_schedule_holds_position(self):
        s = _kitchen(schedule=(), max_time=1.0, trials=1)
        r = run_trial(s, 0)
        ox, oy, _ = jittered_origin(s, 0)
        assert r.final_error == pytest.approx(math.hypot(ox - s.target[0], oy - s.target[1]), abs=1e-12)
        _, rows = _parse_rows(r.csv())
        assert all(row[4] == 0.0 for row in rows)  # linear column never moves


class TestSummaries:
    def test_single_trial_zero_variance(self, tmp_path):
        s = _corridor_scenario(tmp_path)
        rows = summarize(run_scenario(s))
        assert len(rows) == 1
        assert rows[0].trials == 1
        assert rows[0].var_error == 0.0
        assert rows[0].mean_error == pytest.approx(run_trial(s, 0).final_error)

    def test_stats_match_independent_recomputation(self, tmp_path):
        s = _corridor_scenario(tmp_path, trials=3)
        results = run_scenario(s)
        row = summarize(results)[0]
        errs = [r.final_error for r in results]
        mean = sum(errs) / len(errs)
        var = sum((e - mean) ** 2 for e in errs) / len(errs)
        assert row.mean_error == pytest.approx(mean, abs=1e-12)
        assert row.var_error == pytest.approx(var, abs=1e-12)

    def test_order_independent(self, tmp_path):
        s = _corridor_scenario(tmp_path, trials=3)
        results = run_scenario(s)
        forward = summarize(results)
        backward = summarize(list(reversed(results)))
        assert len(forward) == len(backward)
        for a, b in zip(forward, backward):
            assert (a.scenario, a.strategy, a.trials) == (b.scenario, b.strategy, b.trials)
            assert a.mean_error == pytest.approx(b.mean_error, rel=1e-12)
            assert a.var_error == pytest.approx(b.var_error, rel=1e-12, abs=1e-15)

    def test_csv_format(self, tmp_path):
        rows = summarize(run_scenario(_corridor_scenario(tmp_path)))
        text = summary_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "scenario,strategy,trials,mean_error,var_error"
        name, strategy, trials, mean, var = lines[1].split(",")
        assert (name, strategy, trials) == ("corridor", "all", "1")
        assert float(mean) == pytest.approx(rows[0].mean_error, abs=1e-6)

    def test_run_comparison_covers_all_strategies(self, tmp_path):
        s = _corridor_scenario(tmp_path)
        rows, results = run_comparison([s])
        assert [r.strategy for r in rows] == ["all", "clip", "detic"]
        assert len(results) == 3
        assert all(r.termination in ("collision", "timeout") for r in results)


class TestExport:
    def test_artifact_inventory_and_svg(self, tmp_path):
        s = _corridor_scenario(tmp_path, trials=2)
        results = run_scenario(s)
        out = tmp_path / "artifacts"
        written = export_artifacts(results, out, [s])
        names = sorted(p.name for p in written)
        assert names == [
            "corridor.svg",
            "corridor_all_trial0.csv",
            "corridor_all_trial1.csv",
            "summary.csv",
        ]
        assert all(p.exists() for p in written)
        svg = (out / "corridor.svg").read_text()
        world = load_scenario_world(s)
        x0, y0, x1, y1 = world.bounds
        scale = (640 - 48) / (x1 - x0)
        assert 'class="bounds"' in svg
        assert f'width="{(x1 - x0) * scale:.1f}"' in svg
        assert f'height="{(y1 - y0) * scale:.1f}"' in svg
        assert svg.count('class="trail"') == 2
        assert 'stroke="#d62728"' in svg  # the "all" strategy trail color

    def test_svg_marks_origin_and_target(self, tmp_path):
        s = _corridor_scenario(tmp_path)
        world = load_scenario_world(s)
        svg = render_world_svg(world, [], s.origin[:2], s.target)
        assert 'class="origin"' in svg
        assert 'class="target"' in svg
        assert 'class="entity"' in svg


class TestCli:
    def test_run_exit_ok(self, tmp_path, capsys):
        scenario = json.loads((WORLDS / "basic_kitchen.json").read_text())
        scenario["max_time"] = 2.0
        path = tmp_path / "short.json"
        path.write_text(json.dumps(scenario))
        code = cli.main(["run", "--scenario", str(path), "--trials", "1"])
        out = capsys.readouterr().out
        assert code == 0
        assert "trial 0:" in out
        assert "timeout" in out

    def test_run_missing_scenario_is_a_scenario_error(self, tmp_path, capsys):
        code = cli.main(["run", "--scenario", str(tmp_path / "none.json")])
        assert code == 2
        assert "omninav:" in capsys.readouterr().err

    def test_run_bad_strategy_value(self, tmp_path, capsys):
        scenario = json.loads((WORLDS / "basic_kitchen.json").read_text())
        scenario["strategy"] = "warp"
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(scenario))
        code = cli.main(["run", "--scenario", str(path)])
        assert code == 2

    def test_run_out_path_collides_with_file(self, tmp_path, capsys):
        scenario = json.loads((WORLDS / "basic_kitchen.json").read_text())
        scenario["max_time"] = 0.5
        path = tmp_path / "short.json"
        path.write_text(json.dumps(scenario))
        blocker = tmp_path / "outdir"
        blocker.write_text("in the way")
        code = cli.main(
            ["run", "--scenario", str(path), "--trials", "1", "--out", str(blocker)]
        )
        assert code == 3

    def test_compare_missing_suite(self, tmp_path, capsys):
        code = cli.main(["compare", "--suite", str(tmp_path / "none.json")])
        assert code == 2

    def test_stitch_missing_inputs(self, tmp_path, capsys):
        code = cli.main(
            [
                "stitch",
                "--front",
                str(tmp_path / "a.png"),
                "--rear",
                str(tmp_path / "b.png"),
                "--out",
                str(tmp_path / "pano.png"),
            ]
        )
        assert code == 3
