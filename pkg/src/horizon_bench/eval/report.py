"""Report documents and flat CSV tables.

Every file embeds the resolved config and the seed list; CSV files carry
them as leading ``#`` comment lines followed by exactly one header row.
All writes go to a temporary file in the target directory and are then
renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from horizon_bench.errors import ContractViolation
from horizon_bench.eval.episode import EpisodeRecord
from horizon_bench.eval.metrics import SweepResult, aggregate, mean_step_reward, score, smoothness, timing_report

SCHEMA = "horizon-bench/report/v1"

SCORES_COLUMNS = ("task", "variant", "planner", "seed", "length_s", "score", "mean_step_reward")
SMOOTHNESS_COLUMNS = ("task", "variant", "planner", "seed", "length_s", "smoothness")
TIMING_COLUMNS = ("task", "episode_length_s", "planner", "iterations", "horizon_s", "episodes", "calls",
                  "iterations_run", "mean_s", "min_s", "max_s", "total_s")
TIMING_VALUE_COLUMNS = ("mean_s", "min_s", "max_s", "total_s")  # wall-clock, not reproducible
SWEEP_COLUMNS = ("task", "variant", "planner", "seed", "length_s", "score", "mean_step_reward", "diverged")

AGGREGATE_TOL = 1e-12


def episode_summary(r: EpisodeRecord) -> dict:
    return {
        "task": r.task_id,
        "variant": r.variant,
        "planner": r.planner,
        "seed": r.seed,
        "length_s": r.length_s,
        "steps": r.steps,
        "score": score(r),
        "mean_step_reward": mean_step_reward(r),
        "smoothness": smoothness(r),
        "diverged": r.diverged,
        "diverged_step": r.diverged_step,
        "termination_step": r.termination_step,
        "respawns": [{"step": e.step, "box_target": e.box_target} for e in r.respawns],
        "planner_calls": r.planner_calls,
        "planner_iterations": r.planner_iterations,
        "degraded_calls": r.degraded_calls,
        "plan_time_total_s": float(np.sum(r.plan_times)),
    }


def _per_seed(values: Sequence[float]) -> dict:
    return {"per_seed": [float(v) for v in values], **aggregate(values)}


def sweep_summary(sw: SweepResult) -> dict:
    key = lambda L: repr(float(L))  # noqa: E731
    return {
        "lengths": sw.lengths,
        "seeds": sw.seeds,
        "scores": {key(L): _per_seed(sw.scores[L]) for L in sw.lengths},
        "mean_rewards": {key(L): _per_seed(sw.mean_rewards[L]) for L in sw.lengths},
        "diverged": {key(L): sw.diverged[L] for L in sw.lengths},
        "median_series": [float(x) for x in sw.median_series],
    }


def build_report(config: dict, seeds: Sequence[int], records: Sequence[EpisodeRecord],
                 sweep: SweepResult | None = None) -> dict:
    if not records:
        raise ContractViolation("a report needs at least one episode")
    first = records[0]
    eps = [episode_summary(r) for r in records]
    return {
        "schema": SCHEMA,
        "config": config,
        "seeds": [int(s) for s in seeds],
        "summary": {"task": first.task_id, "variant": first.variant, "planner": first.planner,
                    "length_s": first.length_s},
        "episodes": eps,
        "scores": _per_seed([e["score"] for e in eps]),
        "mean_step_reward": _per_seed([e["mean_step_reward"] for e in eps]),
        "smoothness": _per_seed([e["smoothness"] for e in eps]),
        "diverged_episodes": int(sum(e["diverged"] for e in eps)),
        "timing": timing_report(records),
        "sweep": sweep_summary(sweep) if sweep is not None else None,
    }


def _check_block(block: dict, where: str) -> None:
    ref = aggregate(block["per_seed"])
    for k, v in ref.items():
        if not math.isclose(block[k], v, rel_tol=0.0, abs_tol=AGGREGATE_TOL):
            raise ContractViolation(f"{where}.{k} = {block[k]!r} disagrees with its per-seed entries ({v!r})")


def check_report(report: dict) -> dict:
    """Validates the schema id and that every aggregate matches its per-seed data."""
    if report.get("schema") != SCHEMA:
        raise ContractViolation(f"unsupported report schema {report.get('schema')!r}")
    for name in ("scores", "mean_step_reward", "smoothness"):
        _check_block(report[name], name)
    for name, field in (("scores", "score"), ("smoothness", "smoothness")):
        if report[name]["per_seed"] != [e[field] for e in report["episodes"]]:
            raise ContractViolation(f"{name} per-seed entries disagree with the episode list")
    sw = report.get("sweep")
    if sw:
        for part in ("scores", "mean_rewards"):
            for L, block in sw[part].items():
                _check_block(block, f"sweep.{part}[{L}]")
    return report


# -- files ----------------------------------------------------------------------


def atomic_write(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_report(path, report: dict) -> Path:
    return atomic_write(path, dumps(check_report(report)))


def load_report(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ContractViolation(f"cannot read report {path}: {exc}") from None
    return check_report(report)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[dict], config: dict, seeds: Sequence[int]) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config, sort_keys=True, separators=(",", ":")) + "\n")
    buf.write("# seeds: " + json.dumps([int(s) for s in seeds]) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows, config, seeds) -> Path:
    return atomic_write(path, csv_text(columns, rows, config, seeds))


def read_csv(path) -> tuple[list[str], list[dict]]:
    """(comment lines, rows) of a table written by :func:`write_csv`."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return comments, list(csv.DictReader(body))


def score_rows(records: Sequence[EpisodeRecord]) -> list[dict]:
    return [{"task": r.task_id, "variant": r.variant, "planner": r.planner, "seed": r.seed,
             "length_s": r.length_s, "score": score(r), "mean_step_reward": mean_step_reward(r)} for r in records]


def smoothness_rows(records: Sequence[EpisodeRecord]) -> list[dict]:
    return [{"task": r.task_id, "variant": r.variant, "planner": r.planner, "seed": r.seed,
             "length_s": r.length_s, "smoothness": smoothness(r)} for r in records]


def sweep_rows(sw: SweepResult, task: str, variant: str, planner: str) -> list[dict]:
    rows = []
    for L in sw.lengths:
        for i, s in enumerate(sw.seeds):
            rows.append({"task": task, "variant": variant, "planner": planner, "seed": s, "length_s": L,
                         "score": sw.scores[L][i], "mean_step_reward": sw.mean_rewards[L][i],
                         "diverged": sw.diverged[L][i]})
    return rows


def series_table(sw: SweepResult, control_dt: float) -> tuple[list[str], list[dict]]:
    """Per-step rewards at the longest length: one column per seed plus the across-seed median."""
    cols = ["step", "t_s"] + [f"seed_{s}" for s in sw.seeds] + ["median"]
    med = sw.median_series
    rows = []
    for k in range(sw.series.shape[1]):
        row = {"step": k, "t_s": round((k + 1) * control_dt, 10), "median": float(med[k])}
        for i, s in enumerate(sw.seeds):
            row[f"seed_{s}"] = float(np.nan_to_num(sw.series[i, k], nan=0.0))
        rows.append(row)
    return cols, rows
