from horizon_bench.eval.episode import EpisodeRecord, RespawnEvent, run_episode
from horizon_bench.eval.metrics import (
    SweepResult,
    aggregate,
    compare,
    episode_length_sweep,
    mean_step_reward,
    score,
    smoothness,
    timing_report,
)
from horizon_bench.eval.report import SCHEMA, build_report, check_report, load_report, write_report

__all__ = [
    "EpisodeRecord",
    "RespawnEvent",
    "SCHEMA",
    "SweepResult",
    "aggregate",
    "build_report",
    "check_report",
    "compare",
    "episode_length_sweep",
    "load_report",
    "mean_step_reward",
    "run_episode",
    "score",
    "smoothness",
    "timing_report",
    "write_report",
]
