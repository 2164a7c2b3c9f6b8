"""Control plans, planner settings and open-loop rollouts."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from horizon_bench.errors import ContractViolation
from horizon_bench.sim import dynamics as dyn

ILQG = "ilqg"
SAMPLING = "sampling"
PLANNER_KINDS = (ILQG, SAMPLING)


@dataclass(frozen=True)
class PlannerConfig:
    kind: str = ILQG
    horizon: float = 0.35  # [s]
    iterations: int = 2
    # iLQG
    reg_init: float = 1e-6
    reg_scale: float = 10.0
    reg_min: float = 1e-6
    reg_max: float = 1e10
    linesearch_steps: int = 11  # step sizes 1, 1/2, ..., 2**-(steps-1)
    feedback: bool = True
    # predictive sampling
    candidates: int = 16
    noise_scale: float = 0.05  # std as a fraction of the actuator range
    knots: int = 5

    def __post_init__(self):
        if self.kind not in PLANNER_KINDS:
            raise ContractViolation(f"unknown planner {self.kind!r}")
        if not self.horizon > 0:
            raise ContractViolation("horizon must be positive")
        if self.iterations < 1:
            raise ContractViolation("iterations must be at least 1")
        if self.candidates < 2:
            raise ContractViolation("need at least 2 candidates")
        if self.knots < 2:
            raise ContractViolation("need at least 2 knots")
        if not (0 < self.reg_min <= self.reg_init <= self.reg_max and self.reg_scale > 1):
            raise ContractViolation("inconsistent regularization schedule")
        if self.linesearch_steps < 1 or self.noise_scale < 0:
            raise ContractViolation("invalid line search or noise settings")

    def steps(self, control_dt: float) -> int:
        T = int(round(self.horizon / control_dt))
        if T < 1:
            raise ContractViolation("horizon is shorter than one control step")
        return T

    def knot_times(self, control_dt: float) -> np.ndarray:
        T = self.steps(control_dt)
        if self.kind == ILQG:
            return np.arange(T + 1) * control_dt
        return np.linspace(0.0, T * control_dt, self.knots)

    def alphas(self) -> np.ndarray:
        return 0.5 ** np.arange(self.linesearch_steps)

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


@dataclass(frozen=True)
class Plan:
    """Piecewise-linear control knots over [0, horizon]; iLQG plans also carry
    the nominal state trajectory and per-step feedback gains."""

    times: np.ndarray  # (K,)
    knots: np.ndarray  # (K, nu)
    gains: np.ndarray | None = None  # (T, nu, nx)
    states: np.ndarray | None = None  # (T+1, nx)
    degraded: bool = False
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, float)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0) or t[0] != 0.0:
            raise ContractViolation("knot times must start at 0 and increase strictly")
        if self.knots.shape[0] != len(t):
            raise ContractViolation("one control knot per knot time")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def controls(self, t) -> np.ndarray:
        """Interpolated controls at time(s) t, held constant beyond the ends."""
        t = np.atleast_1d(np.asarray(t, float))
        out = np.empty((len(t), self.knots.shape[1]))
        for j in range(self.knots.shape[1]):
            out[:, j] = np.interp(t, self.times, self.knots[:, j])
        return out

    def sample(self, control_dt: float, T: int) -> np.ndarray:
        """Controls at the first T step times (same arithmetic as the planners' batched rollouts)."""
        return interpolation_matrix(self.times, control_dt, T) @ self.knots

    def shifted(self, dt: float) -> "Plan":
        """The plan advanced by dt; the tail repeats the last knot."""
        knots = self.controls(self.times + dt)
        gains = states = None
        if self.gains is not None:
            gains = np.concatenate([self.gains[1:], self.gains[-1:]], axis=0)
        if self.states is not None:
            states = np.concatenate([self.states[1:], self.states[-1:]], axis=0)
        return Plan(self.times.copy(), knots, gains, states, False)

    def with_flag(self, degraded: bool, **info) -> "Plan":
        return replace(self, degraded=degraded, info=dict(info))


def zero_plan(config: PlannerConfig, model) -> Plan:
    times = config.knot_times(model.control_dt)
    return Plan(times, np.zeros((len(times), model.nu)))


def constant_plan(config: PlannerConfig, model, u) -> Plan:
    times = config.knot_times(model.control_dt)
    return Plan(times, np.tile(np.asarray(u, float), (len(times), 1)))


def interpolation_matrix(times: np.ndarray, control_dt: float, T: int) -> np.ndarray:
    """W with W @ knots == controls at the T step times (linear interpolation)."""
    K = len(times)
    W = np.zeros((T, K))
    eye = np.eye(K)
    ts = np.arange(T) * control_dt
    for k in range(K):
        W[:, k] = np.interp(ts, times, eye[k])
    return W


class Rollout(NamedTuple):
    states: np.ndarray  # (T+1, nx); NaN after divergence
    controls: np.ndarray  # (T, nu)
    cost: float  # +inf when diverged
    diverged_at: int  # -1 when finite


def rollout(model, objective, state, plan: Plan, T: int | None = None) -> Rollout:
    """Open-loop rollout of the interpolated plan and its total cost."""
    if T is None:
        T = int(round(plan.horizon / model.control_dt))
    if T < 1:
        raise ContractViolation("plan horizon is shorter than one control step")
    U = dyn.clamp_controls(model, plan.sample(model.control_dt, T))
    X, status = dyn.rollout_batch(model, state.q, state.v, U[None])
    if status[0] >= 0:
        return Rollout(X[0], U, float("inf"), int(status[0]))
    return Rollout(X[0], U, float(objective.total_cost(X[0], U)), -1)
