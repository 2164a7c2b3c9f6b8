"""Command-line front end: run, sweep, compare, bench.

Exit status: 0 success, 1 runtime failure (or a diverged episode under
--strict), 2 usage/config error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from horizon_bench.config import ExperimentConfig, PlannerSection, SweepSection, load_config, resolve_task, resolved
from horizon_bench.errors import ConfigError, ContractViolation
from horizon_bench.eval import report as rep
from horizon_bench.eval.episode import EpisodeRecord, run_episode
from horizon_bench.eval.metrics import compare, episode_length_sweep, timing_report
from horizon_bench.planners.agent import task_agent

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


# -- episode jobs (module level so they pickle into worker processes) --------------


@dataclass(frozen=True)
class Job:
    task: str
    variant: str
    overrides: tuple  # sorted (key, value) pairs
    planner: PlannerSection
    length: float
    seed: int


def run_job(job: Job) -> EpisodeRecord:
    task = resolve_task(job.task, job.variant, dict(job.overrides))
    agent = task_agent(task, job.planner.build(), seed=job.seed)
    return run_episode(task, agent, job.length, job.seed)


def run_jobs(jobs: Sequence[Job], n_jobs: int) -> list[EpisodeRecord]:
    """Results come back in job order whatever the completion order."""
    if n_jobs <= 1 or len(jobs) <= 1:
        return [run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(n_jobs, len(jobs))) as pool:
        return list(pool.map(run_job, jobs))


def _overrides(cfg: ExperimentConfig) -> tuple:
    return tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in cfg.overrides.items()))


def _seeds(cfg: ExperimentConfig, offset: int) -> list[int]:
    return [s + offset for s in cfg.seeds]


def _out_dir(cfg: ExperimentConfig, args) -> Path:
    return Path(args.out if args.out is not None else cfg.out)


def _resolved(cfg: ExperimentConfig, seeds) -> dict:
    d = resolved(cfg)
    d["seeds"] = list(seeds)
    return d


def _write_tables(out: Path, records, conf: dict, seeds) -> None:
    rep.write_csv(out / "scores.csv", rep.SCORES_COLUMNS, rep.score_rows(records), conf, seeds)
    rep.write_csv(out / "smoothness.csv", rep.SMOOTHNESS_COLUMNS, rep.smoothness_rows(records), conf, seeds)
    rep.write_csv(out / "timing.csv", rep.TIMING_COLUMNS, timing_report(records), conf, seeds)


def _strict_status(args, records) -> int:
    diverged = [r for r in records if r.diverged]
    for r in diverged:
        print(f"warning: seed {r.seed} diverged at step {r.diverged_step}", file=sys.stderr)
    return EXIT_RUNTIME if (args.strict and diverged) else EXIT_OK


# -- commands ---------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.set)
    seeds = _seeds(cfg, args.seed_offset)
    jobs = [Job(cfg.task, cfg.variant, _overrides(cfg), cfg.planner, cfg.episode_length, s) for s in seeds]
    records = run_jobs(jobs, args.jobs)
    out = _out_dir(cfg, args)
    conf = _resolved(cfg, seeds)
    report = rep.build_report(conf, seeds, records)
    rep.write_report(out / "report.json", report)
    _write_tables(out, records, conf, seeds)
    s = report["scores"]
    print(f"{cfg.task}/{cfg.variant}/{cfg.planner.kind}: score mean {s['mean']:.2f} median {s['median']:.2f} "
          f"std {s['std']:.2f} over {len(seeds)} seed(s) -> {out}")
    return _strict_status(args, records)


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.set)
    sweep = cfg.sweep or SweepSection()
    seeds = _seeds(cfg, args.seed_offset)
    ov = _overrides(cfg)
    task = resolve_task(cfg.task, cfg.variant, dict(ov))
    lengths = [float(x) for x in sweep.lengths]

    def runner(length, seed):  # serial fallback; batched below when --jobs > 1
        return run_job(Job(cfg.task, cfg.variant, ov, cfg.planner, length, seed))

    cache: dict = {}
    if args.jobs > 1:
        todo = [(L, s) for L in (lengths[-1:] if sweep.reuse_prefix else lengths) for s in seeds]
        recs = run_jobs([Job(cfg.task, cfg.variant, ov, cfg.planner, L, s) for L, s in todo], args.jobs)
        cache = dict(zip(todo, recs))
    sw = episode_length_sweep(task, None, lengths, seeds, reuse_prefix=sweep.reuse_prefix,
                              runner=lambda L, s: cache.get((L, s)) or runner(L, s))
    out = _out_dir(cfg, args)
    conf = _resolved(cfg, seeds)
    report = rep.build_report(conf, seeds, sw.records, sweep=sw)
    rep.write_report(out / "report.json", report)
    _write_tables(out, sw.records, conf, seeds)
    rows = rep.sweep_rows(sw, cfg.task, cfg.variant, cfg.planner.kind)
    rep.write_csv(out / "sweep.csv", rep.SWEEP_COLUMNS, rows, conf, seeds)
    cols, srows = rep.series_table(sw, task.model.control_dt)
    rep.write_csv(out / "series.csv", cols, srows, conf, seeds)
    for L in sw.lengths:
        print(f"{L:6.1f} s  median score {report['sweep']['scores'][repr(L)]['median']:9.2f}")
    return _strict_status(args, sw.records)


def cmd_compare(args) -> int:
    a = rep.load_report(args.report_a)
    b = rep.load_report(args.report_b)
    cmp = compare(a, b)
    out = Path(args.out) if args.out is not None else Path(args.report_a).parent
    rep.atomic_write(out / "comparison.json", rep.dumps({"reports": [str(args.report_a), str(args.report_b)],
                                                         "configs": [a["config"], b["config"]],
                                                         "comparison": cmp}))
    print(comparison_table([cmp]))
    return EXIT_OK


def comparison_table(rows: Sequence[dict]) -> str:
    def cell(block):
        return f"{block['mean']:9.2f} ± {block['std']:7.2f}"

    head = f"{'task':<8} {'metric':<11} {'A mean ± std':>19} {'B mean ± std':>19} {'Δ median':>10}"
    lines = [head, "-" * len(head)]
    for c in rows:
        for name in ("score", "smoothness"):
            m = c[name]
            lines.append(f"{c['task']:<8} {name:<11} {cell(m['a']):>19} {cell(m['b']):>19} {m['delta_median']:>10.3f}")
        if c["a_below_b"]:
            lines.append(f"{'':<8} note: median score of A is below B")
    return "\n".join(lines)


def cmd_bench(args) -> int:
    cfg = load_config(args.config, args.set)
    bench = cfg.bench
    if bench is None:
        raise ConfigError(f"{args.config}: bench: missing [bench] table")
    seeds = _seeds(cfg, args.seed_offset)
    ov = _overrides(cfg)
    jobs = [Job(t, bench.variant, ov, p, cfg.episode_length, s) for t in bench.tasks for p in bench.planners
            for s in seeds]
    records = run_jobs(jobs, args.jobs)
    for job, r in zip(jobs, records):
        if r.planner_iterations != r.planner_calls * job.planner.iterations and not r.degraded_calls:
            raise RuntimeError(f"{job.task}/{job.planner.kind}: iteration budget not honored")
    rows = timing_report(records)
    out = _out_dir(cfg, args)
    conf = _resolved(cfg, seeds)
    rep.write_csv(out / "timing.csv", rep.TIMING_COLUMNS, rows, conf, seeds)
    rep.atomic_write(out / "bench.json", rep.dumps({"schema": rep.SCHEMA, "config": conf, "seeds": seeds,
                                                    "timing": rows}))
    print(f"{'task':<6} {'length':>7} {'planner':<9} {'iter':>4} {'horizon':>8} {'calls':>6} {'mean [ms]':>10}")
    for r in rows:
        print(f"{r['task']:<6} {r['episode_length_s']:>7.1f} {r['planner']:<9} {r['iterations']:>4} "
              f"{r['horizon_s']:>8.2f} {r['calls']:>6} {1e3 * r['mean_s']:>10.2f}")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry (repeatable); overrides.<dotted.key>=v for model/task/cost")
    p.add_argument("--out", default=None, metavar="DIR", help="output directory (default: config 'out')")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel episodes (processes)")
    p.add_argument("--strict", action="store_true", help="exit 1 if any episode diverged")
    p.add_argument("--seed-offset", type=int, default=0, metavar="N", help="add N to every seed")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="horizon-bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run seeds x episodes"), ("sweep", "episode-length sweep"),
                           ("bench", "planner timing grid")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--config", required=True, metavar="PATH", help="TOML config file")
    p = sub.add_parser("compare", parents=[common], help="compare two run reports (A vs B)")
    p.add_argument("report_a")
    p.add_argument("report_b")
    return parser


COMMANDS: dict[str, Callable] = {"run": cmd_run, "sweep": cmd_sweep, "compare": cmd_compare, "bench": cmd_bench}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
