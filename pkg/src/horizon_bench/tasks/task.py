"""Task definitions: constants, cost variants, goals, resets and respawns."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from scipy.optimize import fsolve

from horizon_bench.cost import SMOOTH_ABS, CostSpec, spec_from_terms
from horizon_bench.errors import ContractViolation
from horizon_bench.planners.objective import Objective
from horizon_bench.sim.dynamics import State
from horizon_bench.sim.model import BipedParams, ModelSpec, make_biped, static_penetration
from horizon_bench.tasks.residuals import HB_REWARDS, REGISTRY, Frame

TASK_IDS = ("stand", "walk", "push")
VARIANTS = ("ours", "hb")
TERMINATION_RULES = ("none", "box_at_target")
RESPAWN_RULES = ("none", "respawn_on_success")

Q = "quadratic"
S = SMOOTH_ABS

# (residual, norm, p, weight)
_STAND_TERMS = [
    ("head_height", S, 0.1, 100.0),
    ("pelvis_feet", S, 0.1, 20.0),
    ("com_velocity", Q, 0.1, 10.0),
    ("balance", S, 0.1, 50.0),
    ("posture", Q, 0.1, 5.0),
    ("facing", Q, 0.1, 10.0),
    ("control", Q, 0.1, 1e-3),
]
_WALK_TERMS = [
    ("head_height", S, 0.1, 100.0),
    ("pelvis_feet", S, 0.1, 20.0),
    ("com_velocity", Q, 0.1, 150.0),
    ("balance", S, 0.1, 50.0),
    ("posture", Q, 0.1, 1.0),
    ("facing", Q, 0.1, 10.0),
    ("control", Q, 0.1, 1e-3),
]
_PUSH_TERMS = _STAND_TERMS + [
    ("box_target", S, 0.1, 50.0),
    ("left_hand_box", S, 0.1, 20.0),
    ("right_hand_box", S, 0.1, 20.0),
]
_HB_TERMS = [("hb_reward", S, 0.01, 1.0)]

DEFAULT_COSTS = {
    ("stand", "ours"): _STAND_TERMS,
    ("walk", "ours"): _WALK_TERMS,
    ("push", "ours"): _PUSH_TERMS,
    ("stand", "hb"): _HB_TERMS,
    ("walk", "hb"): _HB_TERMS,
    ("push", "hb"): _HB_TERMS,
}


def default_cost(task_id: str, variant: str) -> CostSpec:
    try:
        terms = DEFAULT_COSTS[(task_id, variant)]
    except KeyError:
        raise ContractViolation(f"no cost for task {task_id!r}, variant {variant!r}") from None
    return spec_from_terms(f"{variant}-{task_id}", terms)


@dataclass(frozen=True)
class Goal:
    box_target: float | None = None  # [m]
    walk_speed: float | None = None  # [m/s]


@dataclass(frozen=True)
class TaskParams:
    """Tunable task constants; every field may be overridden from config."""

    episode_length: float = 8.0
    termination: str = "none"
    respawn: str = "none"
    workspace: tuple[float, float] = (0.4, 1.2)
    success_threshold: float = 0.05
    init_noise: float = 0.02
    walk_speed: float = 1.0
    stance_width: float = 0.3
    knee_bend: float = 0.35
    posture: tuple[float, ...] | None = None  # explicit canonical joint angles; calibrated when None
    head_min_fraction: float = 0.9
    head_margin: float = 0.4
    push_sigma: float = 0.3
    hand_tolerance: float = 0.05
    hand_margin: float = 0.5
    box_start: float = 0.55
    box_target: float = 0.8
    r_max: float = 1.0

    def replace(self, overrides: Mapping[str, Any]) -> "TaskParams":
        known = {f.name for f in dataclasses.fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ContractViolation(f"unknown task parameter(s): {', '.join(unknown)}")
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
        return dataclasses.replace(self, **values)


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    variant: str
    model: ModelSpec
    cost: CostSpec
    params: TaskParams
    posture: tuple[float, float, float, float]
    root_height: float  # canonical root height [m]
    target_head_height: float
    target_pelvis_feet: float

    def __post_init__(self):
        p = self.params
        if self.task_id not in TASK_IDS:
            raise ContractViolation(f"unknown task {self.task_id!r}")
        if self.variant not in VARIANTS:
            raise ContractViolation(f"unknown cost variant {self.variant!r}")
        steps = p.episode_length / self.model.control_dt
        if not p.episode_length > 0 or abs(steps - round(steps)) > 1e-6:
            raise ContractViolation("episode length must be a positive multiple of the control timestep")
        if p.termination not in TERMINATION_RULES:
            raise ContractViolation(f"unknown termination rule {p.termination!r}")
        if p.respawn not in RESPAWN_RULES:
            raise ContractViolation(f"unknown respawn rule {p.respawn!r}")
        lo, hi = p.workspace
        if not hi > lo:
            raise ContractViolation("workspace bounds are degenerate")
        if not p.success_threshold > 0:
            raise ContractViolation("success threshold must be positive")
        if self.task_id == "push":
            if self.model.box_dof is None:
                raise ContractViolation("push task needs a model with a box")
            if not lo <= p.box_target <= hi:
                raise ContractViolation("push target lies outside the workspace")
        for t in self.cost.terms:
            if t.residual not in REGISTRY:
                raise ContractViolation(f"residual {t.residual!r} is not registered")

    # convenience views used by residuals and rewards
    @property
    def walk_speed(self) -> float:
        return self.params.walk_speed if self.task_id == "walk" else 0.0

    @property
    def head_min(self) -> float:
        return self.params.head_min_fraction * self.target_head_height

    @property
    def head_margin(self) -> float:
        return self.params.head_margin

    @property
    def push_sigma(self) -> float:
        return self.params.push_sigma

    @property
    def hand_tolerance(self) -> float:
        return self.params.hand_tolerance

    @property
    def hand_margin(self) -> float:
        return self.params.hand_margin

    @property
    def r_max(self) -> float:
        return self.params.r_max

    @property
    def hb_reward(self) -> str:
        return self.task_id

    @property
    def episode_length(self) -> float:
        return self.params.episode_length

    @property
    def steps(self) -> int:
        return int(round(self.params.episode_length / self.model.control_dt))

    def initial_goal(self) -> Goal:
        if self.task_id == "push":
            return Goal(box_target=self.params.box_target)
        if self.task_id == "walk":
            return Goal(walk_speed=self.params.walk_speed)
        return Goal()

    def canonical_state(self) -> State:
        q = np.zeros(self.model.nq)
        q[1] = self.root_height
        q[3:7] = self.posture
        if self.model.box_dof is not None:
            q[self.model.box_dof] = self.params.box_start
        return State(q, np.zeros(self.model.nq), 0.0)

    def objective(self, goal: Goal, cost: CostSpec | None = None) -> Objective:
        spec = cost or self.cost
        sizes = {t.residual: REGISTRY[t.residual][0] for t in spec.terms}
        fns = [REGISTRY[t.residual][1] for t in spec.terms]
        model = self.model

        def residual_fn(Qb, Vb, Ub):
            fr = Frame(model, Qb, Vb, Ub)
            return np.concatenate([f(fr, self, goal) for f in fns], axis=1)

        return Objective(model, spec, sizes, residual_fn)


def _leg_sites(model: ModelSpec, joints: np.ndarray):
    q = np.zeros(model.nq)
    q[1] = 1.0
    q[3:7] = joints
    st = State(q, np.zeros(model.nq))
    fr = Frame.from_state(model, st)
    return fr


def calibrate_posture(model: ModelSpec, knee: float, stance: float) -> tuple[float, float, float, float]:
    """Joint angles with the left foot ``stance`` ahead of the right, both feet
    level, and the center of mass over the feet midpoint (torso upright)."""

    def eqs(z):
        hip_l, hip_r, knee_r = z
        fr = _leg_sites(model, np.array([hip_l, knee, hip_r, knee_r]))
        lf, rf = fr.pos["left_foot"][0], fr.pos["right_foot"][0]
        return [lf[1] - rf[1], lf[0] - rf[0] - stance, fr.com[0, 0] - 0.5 * (lf[0] + rf[0])]

    sol, info, ier, msg = fsolve(eqs, [-0.35, 0.0, knee], full_output=True, xtol=1e-13)
    if ier != 1 or np.max(np.abs(eqs(sol))) > 1e-9:
        raise ContractViolation(f"posture calibration failed: {msg}")
    return (float(sol[0]), float(knee), float(sol[1]), float(sol[2]))


def make_task(
    task_id: str,
    variant: str = "ours",
    task_overrides: Mapping[str, Any] | None = None,
    model_overrides: Mapping[str, Any] | None = None,
    cost: CostSpec | Mapping | None = None,
) -> TaskSpec:
    if task_id not in TASK_IDS:
        raise ContractViolation(f"unknown task {task_id!r}")
    params = TaskParams().replace(task_overrides or {})
    if task_id == "push":
        params = dataclasses.replace(params, **{k: v for k, v in _PUSH_DEFAULTS.items()
                                                if k not in (task_overrides or {})})
    mp = BipedParams(box=(task_id == "push")).replace(model_overrides or {})
    model = make_biped(mp)
    if params.posture is not None:
        if len(params.posture) != 4:
            raise ContractViolation("posture needs four joint angles")
        posture = tuple(float(a) for a in params.posture)
    else:
        posture = calibrate_posture(model, params.knee_bend, params.stance_width)
    fr = _leg_sites(model, np.array(posture))
    feet_z = 0.5 * (fr.pos["left_foot"][0, 1] + fr.pos["right_foot"][0, 1])
    root_height = 1.0 - feet_z - static_penetration(model, 2)
    fr0 = fr  # root at 1.0; shift everything by the same offset
    shift = root_height - 1.0
    head = fr0.pos["head"][0, 1] + shift
    gap = fr0.pos["pelvis"][0, 1] - feet_z
    if isinstance(cost, Mapping):
        cost = CostSpec.from_dict(cost)
    spec = cost or default_cost(task_id, variant)
    return TaskSpec(task_id, variant, model, spec, params, posture, float(root_height), float(head), float(gap))


_PUSH_DEFAULTS = {"respawn": "respawn_on_success"}


def hb_reward(state: State, control, task: TaskSpec, goal: Goal) -> float:
    fr = Frame.from_state(task.model, state, control)
    return float(HB_REWARDS[task.hb_reward](fr, task, goal)[0])


def residual(name: str, state: State, task: TaskSpec, goal: Goal | None = None, control=None) -> np.ndarray:
    """Evaluate one registered residual at a single state."""
    if name not in REGISTRY:
        raise ContractViolation(f"unknown residual {name!r}")
    fr = Frame.from_state(task.model, state, control)
    return REGISTRY[name][1](fr, task, goal or task.initial_goal())[0]


def check_termination_and_respawn(state: State, task: TaskSpec, goal: Goal, rng: np.random.Generator):
    """Returns (terminate, goal). Only the push task has box rules."""
    if task.task_id != "push" or goal.box_target is None:
        return False, goal
    p = task.params
    box = float(state.q[task.model.box_dof])
    if abs(box - goal.box_target) >= p.success_threshold:
        return False, goal
    if p.termination == "box_at_target":
        return True, goal
    if p.respawn == "respawn_on_success":
        lo, hi = p.workspace
        gap = 2.0 * p.success_threshold
        for _ in range(10_000):
            target = float(rng.uniform(lo, hi))
            if abs(target - box) >= gap:
                return False, dataclasses.replace(goal, box_target=target)
        raise ContractViolation("workspace too small to respawn a target away from the box")
    return False, goal


def initial_state(task: TaskSpec, rng: np.random.Generator) -> State:
    st = task.canonical_state()
    q = st.q.copy()
    amp = task.params.init_noise
    if amp > 0:
        q[3:7] += rng.uniform(-amp, amp, size=4)
    return State(q, st.v, 0.0)

