"""Experiment configuration: strict TOML files plus ``--set`` overrides.

Grammar (format version 1)::

    version = 1                 # required
    task = "walk"               # stand | walk | push
    variant = "ours"            # ours | hb
    episode_length = 8.0        # seconds, multiple of the control step
    seeds = [0, 1, 2, 3, 4, 5]
    out = "results/walk_ours"

    [planner]                   # any PlannerConfig field
    kind = "ilqg"
    horizon = 0.35
    iterations = 2

    [overrides]                 # flat dotted keys
    "task.walk_speed" = 1.0     # TaskParams field
    "model.torque_limit" = 150  # BipedParams field
    "cost.posture.weight" = 2.0 # <residual>.(weight | p | norm)

    [sweep]                     # used by `sweep`
    lengths = [2, 4, 8, 12, 16, 20]
    reuse_prefix = true

    [bench]                     # used by `bench`; one row per task x planner
    tasks = ["stand", "walk"]
    [[bench.planners]]
    kind = "ilqg"
    iterations = 2

Unknown keys anywhere are errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from horizon_bench.cost import CostSpec
from horizon_bench.errors import ConfigError, ContractViolation
from horizon_bench.planners.plan import PlannerConfig
from horizon_bench.tasks.task import TASK_IDS, VARIANTS, TaskSpec, default_cost, make_task

FORMAT_VERSION = 1
DEFAULT_SEEDS = [0, 1, 2, 3, 4, 5]
DEFAULT_SWEEP = [2.0, 4.0, 8.0, 12.0, 16.0, 20.0]

Scalar = Union[bool, int, float, str, list]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PlannerSection(_Strict):
    kind: Literal["ilqg", "sampling"] = "ilqg"
    horizon: float = 0.35
    iterations: int = 2
    reg_init: float = 1e-6
    reg_scale: float = 10.0
    reg_min: float = 1e-6
    reg_max: float = 1e10
    linesearch_steps: int = 11
    feedback: bool = True
    candidates: int = 32
    noise_scale: float = 0.01
    knots: int = 5

    @model_validator(mode="after")
    def _valid(self):
        self.build()
        return self

    def build(self) -> PlannerConfig:
        try:
            return PlannerConfig(**self.model_dump())
        except ContractViolation as exc:
            raise ValueError(str(exc)) from None


class SweepSection(_Strict):
    lengths: list[float] = Field(default_factory=lambda: list(DEFAULT_SWEEP))
    reuse_prefix: bool = False

    @field_validator("lengths")
    @classmethod
    def _ascending(cls, v):
        if not v or any(b <= a for a, b in zip(v, v[1:])) or v[0] <= 0:
            raise ValueError("lengths must be positive and strictly ascending")
        return v


class BenchSection(_Strict):
    tasks: list[Literal["stand", "walk", "push"]] = Field(default_factory=lambda: ["stand", "walk", "push"])
    planners: list[PlannerSection] = Field(default_factory=lambda: [PlannerSection()])
    variant: Literal["ours", "hb"] = "ours"

    @field_validator("tasks", "planners")
    @classmethod
    def _non_empty(cls, v):
        if not v:
            raise ValueError("must not be empty")
        return v


class ExperimentConfig(_Strict):
    version: Literal[1]
    task: Literal["stand", "walk", "push"] = "stand"
    variant: Literal["ours", "hb"] = "ours"
    episode_length: float = 8.0
    seeds: list[int] = Field(default_factory=lambda: list(DEFAULT_SEEDS))
    out: str = "results"
    planner: PlannerSection = Field(default_factory=PlannerSection)
    overrides: dict[str, Scalar] = Field(default_factory=dict)
    sweep: SweepSection | None = None
    bench: BenchSection | None = None

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v):
        if not v or len(set(v)) != len(v) or min(v) < 0:
            raise ValueError("seeds must be a non-empty list of distinct non-negative integers")
        return v

    @field_validator("episode_length")
    @classmethod
    def _length(cls, v):
        if not v > 0:
            raise ValueError("episode_length must be positive")
        return v

    @model_validator(mode="after")
    def _resolvable(self):
        tasks = self.bench.tasks if self.bench is not None else [self.task]
        variant = self.bench.variant if self.bench is not None else self.variant
        for t in dict.fromkeys([self.task, *tasks]):
            try:
                resolve_task(t, variant, self.overrides)
            except ContractViolation as exc:
                raise ValueError(str(exc)) from None
        return self


# -- overrides ------------------------------------------------------------------

_COST_FIELDS = ("weight", "p", "norm")


@dataclass(frozen=True)
class SplitOverrides:
    task: dict
    model: dict
    cost: dict  # residual -> {field: value}


def split_overrides(overrides: dict[str, Any]) -> SplitOverrides:
    task, model, cost = {}, {}, {}
    for key, value in overrides.items():
        parts = key.split(".")
        if parts[0] == "task" and len(parts) == 2:
            task[parts[1]] = value
        elif parts[0] == "model" and len(parts) == 2:
            model[parts[1]] = value
        elif parts[0] == "cost" and len(parts) == 3 and parts[2] in _COST_FIELDS:
            cost.setdefault(parts[1], {})[parts[2]] = value
        else:
            raise ContractViolation(
                f"override key {key!r} must be task.<param>, model.<param> or cost.<residual>.(weight|p|norm)"
            )
    return SplitOverrides(task, model, cost)


def apply_cost_overrides(spec: CostSpec, cost: dict) -> CostSpec:
    d = spec.to_dict()
    by_id = {t["residual"]: t for t in d["terms"]}
    for residual, fields in cost.items():
        if residual not in by_id:
            raise ContractViolation(f"cost {spec.name!r} has no term {residual!r}")
        by_id[residual].update(fields)
    return CostSpec.from_dict(d)


def resolve_task(task_id: str, variant: str, overrides: dict[str, Any]) -> TaskSpec:
    if task_id not in TASK_IDS or variant not in VARIANTS:
        raise ContractViolation(f"unknown task/variant {task_id!r}/{variant!r}")
    ov = split_overrides(overrides)
    cost = apply_cost_overrides(default_cost(task_id, variant), ov.cost)
    return make_task(task_id, variant, ov.task, ov.model, cost)


# -- loading --------------------------------------------------------------------


def parse_value(text: str) -> Any:
    """A ``--set`` value: any TOML value, else the raw string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_set(data: dict, assignment: str) -> dict:
    """Apply ``key.path=value``. Keys under ``overrides.`` keep their dots."""
    if "=" not in assignment:
        raise ConfigError(f"--set expects KEY=VALUE, got {assignment!r}")
    key, text = assignment.split("=", 1)
    key = key.strip()
    value = parse_value(text.strip())
    if key.startswith("overrides."):
        data.setdefault("overrides", {})[key[len("overrides."):]] = value
        return data
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"--set {key}: {p!r} is not a table")
        node = nxt
    node[parts[-1]] = value
    return data


def _format_errors(exc: ValidationError, source: str) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"]
        if err["type"] == "extra_forbidden":
            msg = "unknown key"
        lines.append(f"{source}: {loc}: {msg}")
    return "\n".join(lines)


def config_from_dict(data: dict, source: str = "<config>") -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, source)) from None


def load_config(path: str | Path | None, sets: list[str] | None = None) -> ExperimentConfig:
    data: dict = {}
    source = "<defaults>"
    if path is not None:
        source = str(path)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"{source}: cannot read: {exc.strerror}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{source}: {exc}") from None
    else:
        data = {"version": FORMAT_VERSION}
    for s in sets or []:
        apply_set(data, s)
    return config_from_dict(data, source)


def resolved(cfg: ExperimentConfig) -> dict:
    """The fully resolved config as plain data (embedded in every output)."""
    return cfg.model_dump(mode="json")


def shipped_config(name: str) -> Path:
    """Path of a config file shipped with the package, e.g. ``stand_ours``."""
    from importlib import resources

    p = resources.files("horizon_bench") / "configs" / f"{name}.toml"
    if not p.is_file():
        raise ConfigError(f"no shipped config named {name!r}")
    return Path(str(p))


def shipped_config_names() -> list[str]:
    from importlib import resources

    root = resources.files("horizon_bench") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


__all__ = [
    "BenchSection",
    "ExperimentConfig",
    "PlannerSection",
    "SweepSection",
    "apply_set",
    "load_config",
    "resolve_task",
    "resolved",
    "shipped_config",
    "shipped_config_names",
    "split_overrides",
]
