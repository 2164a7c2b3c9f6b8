from horizon_bench.planners.agent import Agent, agent_step, make_agent, task_agent
from horizon_bench.planners.ilqg import backward_pass, ilqg_plan
from horizon_bench.planners.objective import Objective
from horizon_bench.planners.plan import ILQG, SAMPLING, Plan, PlannerConfig, Rollout, rollout, zero_plan
from horizon_bench.planners.sampling import sampling_plan

__all__ = [
    "Agent",
    "ILQG",
    "Objective",
    "Plan",
    "PlannerConfig",
    "Rollout",
    "SAMPLING",
    "agent_step",
    "backward_pass",
    "ilqg_plan",
    "make_agent",
    "rollout",
    "sampling_plan",
    "task_agent",
    "zero_plan",
]
