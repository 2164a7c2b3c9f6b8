"""Receding-horizon agent: replan from every new state, warm-started."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from horizon_bench.cost import CostSpec
from horizon_bench.planners.ilqg import ilqg_plan
from horizon_bench.planners.plan import ILQG, Plan, PlannerConfig, zero_plan
from horizon_bench.planners.sampling import sampling_plan
from horizon_bench.sim import dynamics as dyn


@dataclass
class Agent:
    model: object
    objective: object
    config: PlannerConfig
    plan: Plan
    rng: np.random.Generator
    fresh: bool = True  # next call plans from ``plan`` without shifting
    calls: int = 0
    iterations: int = 0
    degraded: list = field(default_factory=list)  # call indices

    def retarget(self, objective) -> None:
        """Swap the objective (e.g. after a goal respawn); keeps the warm start."""
        self.objective = objective


def make_agent(model, objective, config: PlannerConfig, seed: int = 0, plan: Plan | None = None) -> Agent:
    return Agent(model, objective, config, plan or zero_plan(config, model), np.random.default_rng(seed))


def task_agent(task, config: PlannerConfig, seed: int = 0, goal=None, cost: CostSpec | None = None) -> Agent:
    return make_agent(task.model, task.objective(goal or task.initial_goal(), cost), config, seed)


def agent_step(agent: Agent, state) -> tuple[np.ndarray, Agent]:
    """One receding-horizon step: shift the plan, replan, emit a clamped control."""
    model, cfg = agent.model, agent.config
    warm = agent.plan if agent.fresh else agent.plan.shifted(model.control_dt)
    if cfg.kind == ILQG:
        plan = ilqg_plan(model, agent.objective, state, warm, cfg)
    else:
        plan = sampling_plan(model, agent.objective, state, warm, cfg, agent.rng)
    agent.calls += 1
    agent.iterations += int(plan.info.get("iterations", 0))
    if plan.degraded:
        agent.degraded.append(agent.calls - 1)
    agent.plan = plan
    agent.fresh = False
    u = plan.knots[0].copy()
    if cfg.kind == ILQG and cfg.feedback and plan.gains is not None and plan.states is not None:
        u = u + plan.gains[0] @ (state.x - plan.states[0])
    return dyn.clamp_controls(model, u), agent
