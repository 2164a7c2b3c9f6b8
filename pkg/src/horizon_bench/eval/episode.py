"""Closed-loop episodes: agent, simulator, benchmark reward, task rules."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from horizon_bench.errors import ContractViolation, SimulationDiverged
from horizon_bench.planners.agent import Agent, agent_step
from horizon_bench.sim import dynamics as dyn
from horizon_bench.tasks.task import TaskSpec, check_termination_and_respawn, hb_reward, initial_state


@dataclass(frozen=True)
class RespawnEvent:
    step: int
    box_target: float


@dataclass
class EpisodeRecord:
    task_id: str
    variant: str
    planner: str
    seed: int
    length_s: float
    control_dt: float
    iterations: int  # configured per planning call
    horizon_s: float
    states: np.ndarray  # (n, nx) state after each step
    controls: np.ndarray  # (n, nu)
    rewards: np.ndarray  # (n,)
    plan_times: np.ndarray  # (n,) wall-time of each planning call [s]
    actuated: tuple[int, ...] = ()
    termination_step: int | None = None
    respawns: list[RespawnEvent] = field(default_factory=list)
    diverged_step: int | None = None
    call_iterations: np.ndarray | None = None  # (calls,) iterations run per planning call
    call_degraded: np.ndarray | None = None  # (calls,) degraded-plan flags

    @property
    def steps(self) -> int:
        return len(self.rewards)

    @property
    def scheduled_steps(self) -> int:
        return int(round(self.length_s / self.control_dt))

    @property
    def diverged(self) -> bool:
        return self.diverged_step is not None

    @property
    def planner_calls(self) -> int:
        return len(self.plan_times)

    @property
    def planner_iterations(self) -> int:
        return int(np.sum(self.call_iterations)) if self.call_iterations is not None else 0

    @property
    def degraded_calls(self) -> int:
        return int(np.sum(self.call_degraded)) if self.call_degraded is not None else 0

    def prefix(self, length_s: float) -> "EpisodeRecord":
        """The record truncated to its first ``length_s`` seconds."""
        n = int(round(length_s / self.control_dt))
        if n < 1 or n > self.scheduled_steps:
            raise ContractViolation("prefix length outside the episode")
        term = self.termination_step if self.termination_step is not None and self.termination_step <= n else None
        div = self.diverged_step if self.diverged_step is not None and self.diverged_step < n else None
        m = min(n, self.steps)
        c = min(n, self.planner_calls)
        it = None if self.call_iterations is None else self.call_iterations[:c]
        dg = None if self.call_degraded is None else self.call_degraded[:c]
        return EpisodeRecord(
            self.task_id, self.variant, self.planner, self.seed, float(length_s), self.control_dt,
            self.iterations, self.horizon_s, self.states[:m], self.controls[:m], self.rewards[:m],
            self.plan_times[:c], self.actuated, term, [e for e in self.respawns if e.step < n], div, it, dg,
        )


def _check_length(length_s: float, dt: float) -> int:
    n = length_s / dt
    if not length_s > 0 or abs(n - round(n)) > 1e-9:
        raise ContractViolation("episode length must be a positive multiple of the control timestep")
    return int(round(n))


def run_episode(task: TaskSpec, agent: Agent, length_s: float, seed: int, clock=time.perf_counter) -> EpisodeRecord:
    """Roll the agent out for ``length_s`` seconds.

    The seed drives both the initial-state noise and the respawn draws.
    Planning wall-time is measured around ``agent_step`` only. A diverged
    simulation truncates the record; missing steps score nothing.
    """
    model = task.model
    n = _check_length(length_s, model.control_dt)
    init_rng, respawn_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    state = initial_state(task, init_rng)
    goal = task.initial_goal()
    spec = agent.objective.spec
    agent.retarget(task.objective(goal, spec))
    states, controls, rewards, times = [], [], [], []
    respawns: list[RespawnEvent] = []
    term = div = None
    iters, degraded = [], []
    for k in range(n):
        t0 = clock()
        u, agent = agent_step(agent, state)
        times.append(clock() - t0)
        iters.append(int(agent.plan.info.get("iterations", 0)))
        degraded.append(bool(agent.plan.degraded))
        try:
            state = dyn.step(model, state, u)
        except SimulationDiverged:
            div = k
            break
        r = hb_reward(state, u, task, goal)
        states.append(state.x)
        controls.append(u)
        rewards.append(r)
        done, new_goal = check_termination_and_respawn(state, task, goal, respawn_rng)
        if new_goal != goal:
            goal = new_goal
            respawns.append(RespawnEvent(k, float(goal.box_target)))
            agent.retarget(task.objective(goal, spec))
        if done:
            term = k + 1
            break
    nx, nu = model.nx, model.nu
    return EpisodeRecord(
        task_id=task.task_id,
        variant=task.variant,
        planner=agent.config.kind,
        seed=int(seed),
        length_s=float(length_s),
        control_dt=model.control_dt,
        iterations=agent.config.iterations,
        horizon_s=agent.config.horizon,
        states=np.array(states).reshape(-1, nx),
        controls=np.array(controls).reshape(-1, nu),
        rewards=np.array(rewards, dtype=float),
        plan_times=np.array(times, dtype=float),
        actuated=tuple(int(i) for i in model.actuated_dofs),
        termination_step=term,
        respawns=respawns,
        diverged_step=div,
        call_iterations=np.array(iters, dtype=np.int64),
        call_degraded=np.array(degraded, dtype=bool),
    )
