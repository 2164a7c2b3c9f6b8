import json

import pytest

from horizon_bench.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from horizon_bench.config import load_config, shipped_config, shipped_config_names
from horizon_bench.errors import ConfigError
from horizon_bench.eval import report as rep

BASE = """
version = 1
task = "{task}"
variant = "{variant}"
episode_length = 0.1
seeds = [0, 1]
out = "{out}"
[planner]
kind = "sampling"
horizon = 0.1
iterations = 1
candidates = 4
knots = 3
"""


def write_config(tmp_path, name="c", task="stand", variant="ours", extra=""):
    path = tmp_path / f"{name}.toml"
    path.write_text(BASE.format(task=task, variant=variant, out=tmp_path / f"out_{name}") + extra)
    return path


def test_run_writes_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["run", "--config", str(cfg)]) == EXIT_OK
    out = tmp_path / "out_c"
    report = rep.load_report(out / "report.json")
    assert report["seeds"] == [0, 1]
    assert report["config"]["planner"]["kind"] == "sampling"
    for name, columns in (("scores.csv", rep.SCORES_COLUMNS), ("smoothness.csv", rep.SMOOTHNESS_COLUMNS),
                          ("timing.csv", rep.TIMING_COLUMNS)):
        comments, rows = rep.read_csv(out / name)
        assert comments[0].startswith("# config: ") and comments[1] == "# seeds: [0, 1]"
        assert len(rows) == (1 if name == "timing.csv" else 2)
        assert tuple(rows[0]) == columns
    assert "score mean" in capsys.readouterr().out


def test_out_and_seed_offset(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "elsewhere"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--seed-offset", "10"]) == EXIT_OK
    assert rep.load_report(out / "report.json")["seeds"] == [10, 11]


def test_set_overrides(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "o"
    args = ["run", "--config", str(cfg), "--out", str(out), "--set", "seeds=[3]",
            "--set", "overrides.cost.posture.weight=2.5", "--set", "planner.candidates=3"]
    assert main(args) == EXIT_OK
    conf = rep.load_report(out / "report.json")["config"]
    assert conf["seeds"] == [3]
    assert conf["overrides"] == {"cost.posture.weight": 2.5}
    assert conf["planner"]["candidates"] == 3


def test_parallel_jobs_match_serial(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--jobs", "2"]) == EXIT_OK
    assert (tmp_path / "a" / "scores.csv").read_text() == (tmp_path / "b" / "scores.csv").read_text()


@pytest.mark.parametrize("extra, needle", [
    ("bogus = 1\n", "bogus: unknown key"),
    ("[planner.extra]\nx = 1\n", "planner.extra: unknown key"),
])
def test_unknown_keys_are_usage_errors(tmp_path, capsys, extra, needle):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(extra + BASE.format(task="stand", variant="ours", out=tmp_path / "x"))
    assert main(["run", "--config", str(cfg)]) == EXIT_USAGE
    assert needle in capsys.readouterr().err


@pytest.mark.parametrize("sets", [["planner.kind=cem"], ["task=run"], ["overrides.model.wings=2"],
                                  ["overrides.cost.nothing.weight=1"], ["episode_length=-1"], ["seeds=[1, 1]"],
                                  ["version=2"], ["planner.iterations=0"]])
def test_invalid_values_are_usage_errors(tmp_path, sets):
    cfg = write_config(tmp_path)
    argv = ["run", "--config", str(cfg)]
    for s in sets:
        argv += ["--set", s]
    assert main(argv) == EXIT_USAGE


def test_missing_config_and_bad_args(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.toml")]) == EXIT_USAGE
    assert main(["run"]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["run", "--config", str(write_config(tmp_path)), "--jobs", "0"]) == EXIT_USAGE


def test_strict_flags_diverged_runs(tmp_path):
    cfg = write_config(tmp_path, extra='[overrides]\n"model.contact_stiffness" = 1e9\n')
    assert main(["run", "--config", str(cfg)]) == EXIT_OK
    assert main(["run", "--config", str(cfg), "--strict"]) == EXIT_RUNTIME
    report = rep.load_report(tmp_path / "out_c" / "report.json")
    assert report["diverged_episodes"] == 2


def test_sweep_outputs(tmp_path):
    cfg = write_config(tmp_path, extra="[sweep]\nlengths = [0.04, 0.1]\nreuse_prefix = true\n")
    assert main(["sweep", "--config", str(cfg)]) == EXIT_OK
    out = tmp_path / "out_c"
    _, rows = rep.read_csv(out / "sweep.csv")
    assert len(rows) == 4
    _, series = rep.read_csv(out / "series.csv")
    assert len(series) == 5 and set(series[0]) == {"step", "t_s", "seed_0", "seed_1", "median"}
    assert rep.load_report(out / "report.json")["sweep"]["lengths"] == [0.04, 0.1]


def test_compare(tmp_path, capsys):
    a = write_config(tmp_path, "a", variant="ours")
    b = write_config(tmp_path, "b", variant="hb")
    assert main(["run", "--config", str(a)]) == EXIT_OK
    assert main(["run", "--config", str(b)]) == EXIT_OK
    ra, rb = tmp_path / "out_a" / "report.json", tmp_path / "out_b" / "report.json"
    assert main(["compare", str(ra), str(rb), "--out", str(tmp_path / "cmp")]) == EXIT_OK
    cmp = json.loads((tmp_path / "cmp" / "comparison.json").read_text())["comparison"]
    assert cmp["variants"] == ["ours", "hb"]
    assert "Δ median" in capsys.readouterr().out


def test_compare_mismatched_reports(tmp_path):
    a = write_config(tmp_path, "a", task="stand")
    b = write_config(tmp_path, "b", task="walk")
    assert main(["run", "--config", str(a)]) == EXIT_OK
    assert main(["run", "--config", str(b)]) == EXIT_OK
    assert main(["compare", str(tmp_path / "out_a" / "report.json"), str(tmp_path / "out_b" / "report.json")]) \
        == EXIT_USAGE
    assert main(["compare", str(tmp_path / "none.json"), str(tmp_path / "out_b" / "report.json")]) == EXIT_USAGE


def test_bench_schema_and_counts(tmp_path):
    extra = """
[bench]
tasks = ["stand", "push"]
[[bench.planners]]
kind = "ilqg"
horizon = 0.06
iterations = 2
[[bench.planners]]
kind = "sampling"
horizon = 0.1
iterations = 3
candidates = 4
"""
    cfg = write_config(tmp_path, extra=extra)
    assert main(["bench", "--config", str(cfg)]) == EXIT_OK
    _, rows = rep.read_csv(tmp_path / "out_c" / "timing.csv")
    assert len(rows) == 4
    for r in rows:
        assert int(r["calls"]) == 2 * 5  # two seeds x five steps
        assert int(r["iterations_run"]) == int(r["calls"]) * int(r["iterations"])
    bench = json.loads((tmp_path / "out_c" / "bench.json").read_text())
    assert bench["schema"] == rep.SCHEMA and len(bench["timing"]) == 4


def test_bench_requires_table(tmp_path):
    assert main(["bench", "--config", str(write_config(tmp_path))]) == EXIT_USAGE


def test_shipped_configs_load():
    names = shipped_config_names()
    assert {"stand_ours", "stand_hb", "walk_ours", "walk_hb", "push_ours", "push_hb"} <= set(names)
    for name in names:
        load_config(shipped_config(name))
    with pytest.raises(ConfigError):
        shipped_config("nonexistent")
