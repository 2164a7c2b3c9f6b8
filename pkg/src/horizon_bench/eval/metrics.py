"""Scores, smoothness, sweeps, timing and ours-vs-hb comparison."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from horizon_bench.errors import ContractViolation
from horizon_bench.eval.episode import EpisodeRecord, run_episode


def score(record: EpisodeRecord) -> float:
    """Sum of per-step benchmark rewards; missing steps count as zero."""
    return float(np.sum(record.rewards)) if record.steps else 0.0


def mean_step_reward(record: EpisodeRecord) -> float:
    """Score divided by the scheduled step count, so truncation is penalized."""
    return score(record) / record.scheduled_steps


def smoothness(record: EpisodeRecord) -> float:
    """Average squared joint velocity over steps and actuated joints [rad^2/s^2]."""
    if not record.steps:
        return 0.0
    nq = record.states.shape[1] // 2
    qd = record.states[:, nq + np.asarray(record.actuated, dtype=np.int64)]
    return float(np.mean(np.mean(qd**2, axis=1)))


def aggregate(values: Iterable[float]) -> dict:
    """mean / median / population std of a per-seed list."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        return {"mean": 0.0, "median": 0.0, "std": 0.0}
    return {"mean": float(np.mean(v)), "median": float(np.median(v)), "std": float(np.std(v))}


# -- episode-length sweep -----------------------------------------------------


@dataclass
class SweepResult:
    lengths: list[float]
    seeds: list[int]
    scores: dict  # length -> per-seed scores (seed order)
    mean_rewards: dict  # length -> per-seed mean per-step reward
    diverged: dict  # length -> per-seed divergence flags
    series: np.ndarray  # (seeds, steps) per-step rewards at the longest length, NaN past truncation
    records: list[EpisodeRecord]  # longest-length records, seed order

    @property
    def median_series(self) -> np.ndarray:
        """Median across seeds of the per-step reward at each step (truncated steps count 0)."""
        return np.median(np.nan_to_num(self.series, nan=0.0), axis=0)


def episode_length_sweep(task, agent_factory: Callable, lengths: Sequence[float], seeds: Sequence[int],
                         reuse_prefix: bool = False, runner: Callable | None = None) -> SweepResult:
    """Scores at each episode length for each seed.

    ``agent_factory(seed)`` must return a fresh agent. With ``reuse_prefix``
    only the longest episode is simulated and shorter ones are read off as its
    prefixes, which is exact for deterministic agents.
    """
    lengths = [float(x) for x in lengths]
    if not lengths or any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ContractViolation("sweep lengths must be non-empty and strictly ascending")
    run = runner or (lambda L, s: run_episode(task, agent_factory(s), L, s))
    scores, means, div = {}, {}, {}
    longest = []
    for L in reversed(lengths):
        recs = []
        for i, s in enumerate(seeds):
            if reuse_prefix and longest:
                recs.append(longest[i].prefix(L))
            else:
                recs.append(run(L, s))
        if not longest:
            longest = recs
        scores[L] = [score(r) for r in recs]
        means[L] = [mean_step_reward(r) for r in recs]
        div[L] = [r.diverged for r in recs]
    n = longest[0].scheduled_steps if longest else 0
    series = np.full((len(seeds), n), np.nan)
    for i, r in enumerate(longest):
        series[i, : r.steps] = r.rewards
        if r.diverged or r.termination_step is not None:
            series[i, r.steps :] = 0.0
    order = sorted(scores)
    return SweepResult(order, list(seeds), {L: scores[L] for L in order}, {L: means[L] for L in order},
                       {L: div[L] for L in order}, series, longest)


# -- timing ---------------------------------------------------------------------

TIMING_KEY = ("task", "episode_length_s", "planner", "iterations", "horizon_s")


def timing_report(records: Iterable[EpisodeRecord]) -> list[dict]:
    """Planning wall-time statistics grouped by (task, length, planner, iterations, horizon)."""
    groups: dict[tuple, list[EpisodeRecord]] = {}
    for r in records:
        key = (r.task_id, float(r.length_s), r.planner, int(r.iterations), float(r.horizon_s))
        groups.setdefault(key, []).append(r)
    rows = []
    for key in sorted(groups):
        recs = groups[key]
        t = np.concatenate([r.plan_times for r in recs]) if recs else np.zeros(0)
        totals = [float(np.sum(r.plan_times)) for r in recs]
        rows.append({
            **dict(zip(TIMING_KEY, key)),
            "episodes": len(recs),
            "calls": int(sum(r.planner_calls for r in recs)),
            "iterations_run": int(sum(r.planner_iterations for r in recs)),
            "mean_s": float(np.mean(t)) if t.size else 0.0,
            "min_s": float(np.min(t)) if t.size else 0.0,
            "max_s": float(np.max(t)) if t.size else 0.0,
            "total_s": float(np.mean(totals)) if totals else 0.0,
        })
    return rows


# -- comparison ---------------------------------------------------------------


def compare(ours: dict, hb: dict) -> dict:
    """Score and smoothness deltas (ours - hb) between two run reports.

    Both reports must describe the same task and episode length.
    """
    for key in ("task", "length_s"):
        if ours["summary"][key] != hb["summary"][key]:
            raise ContractViolation(f"reports differ in {key}: {ours['summary'][key]!r} vs {hb['summary'][key]!r}")
    so, sh = ours["scores"], hb["scores"]
    mo, mh = ours["smoothness"], hb["smoothness"]
    out = {
        "task": ours["summary"]["task"],
        "length_s": ours["summary"]["length_s"],
        "variants": [ours["summary"]["variant"], hb["summary"]["variant"]],
        "score": {"a": so, "b": sh, "delta_mean": so["mean"] - sh["mean"], "delta_median": so["median"] - sh["median"]},
        "smoothness": {"a": mo, "b": mh, "delta_mean": mo["mean"] - mh["mean"], "delta_median": mo["median"] - mh["median"]},
    }
    out["a_below_b"] = bool(so["median"] < sh["median"])
    return out
