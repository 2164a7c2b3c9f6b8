"""Residual functions for the stand/walk/push tasks.

All registry functions take a :class:`Frame` (kinematics for a batch of
state/control samples) plus the task and goal, and return an array of shape
(batch, dim). Single-state helpers wrap them for direct use.
"""

from __future__ import annotations

import numpy as np

from horizon_bench.errors import ContractViolation
from horizon_bench.sim import dynamics as dyn
from horizon_bench.tasks.rewards import small_control, tolerance

FRAME_SITES = ("head", "pelvis", "left_foot", "right_foot", "left_hand", "right_hand")
PITCH = 2
LEG_DOFS = slice(3, 7)


class Frame:
    """Site and center-of-mass kinematics for a batch of samples."""

    def __init__(self, model, Q, V, U):
        self.model = model
        self.q = np.atleast_2d(np.asarray(Q, float))
        self.v = np.atleast_2d(np.asarray(V, float))
        self.u = np.atleast_2d(np.asarray(U, float))
        P, Pd = dyn.sites(model, self.q, self.v, FRAME_SITES)
        self.pos = {name: P[:, i] for i, name in enumerate(FRAME_SITES)}
        self.vel = {name: Pd[:, i] for i, name in enumerate(FRAME_SITES)}
        self.com, self.com_vel = dyn.com_batch(model, self.q, self.v)

    @classmethod
    def from_state(cls, model, state, control=None):
        u = np.zeros(model.nu) if control is None else np.asarray(control, float)
        return cls(model, state.q[None], state.v[None], u[None])

    @property
    def feet_mid(self) -> np.ndarray:
        return 0.5 * (self.pos["left_foot"] + self.pos["right_foot"])

    def box_x(self) -> np.ndarray:
        dof = self.model.box_dof
        if dof is None:
            raise ContractViolation("task has no box")
        return self.q[:, dof]


def _col(x):
    return np.asarray(x)[:, None]


def head_height(fr: Frame, task, goal):
    return _col(fr.pos["head"][:, 1] - task.target_head_height)


def pelvis_feet(fr: Frame, task, goal):
    gap = fr.pos["pelvis"][:, 1] - fr.feet_mid[:, 1]
    return _col(gap - task.target_pelvis_feet)


def com_velocity(fr: Frame, task, goal):
    target = goal.walk_speed if goal.walk_speed is not None else 0.0
    return np.stack([fr.com_vel[:, 0] - target, fr.com_vel[:, 1]], axis=1)


def balance(fr: Frame, task, goal):
    return _col(fr.com[:, 0] - fr.feet_mid[:, 0])


def posture(fr: Frame, task, goal):
    return fr.q[:, LEG_DOFS] - np.asarray(task.posture)


def facing(fr: Frame, task, goal):
    return _col(fr.q[:, PITCH])


def control(fr: Frame, task, goal):
    return fr.u.copy()


def box_target(fr: Frame, task, goal):
    if goal.box_target is None:
        raise ContractViolation("goal has no box target")
    return _col(fr.box_x() - goal.box_target)


def _face_point(fr: Frame, hand: np.ndarray) -> np.ndarray:
    box = fr.model.box
    face_x = fr.box_x() - box.half_width
    face_z = np.clip(hand[:, 1], 0.0, 2.0 * box.half_height)
    return np.stack([face_x, face_z], axis=1)


def hand_box(fr: Frame, side: str) -> np.ndarray:
    hand = fr.pos[f"{side}_hand"]
    return hand - _face_point(fr, hand)


def left_hand_box(fr: Frame, task, goal):
    return hand_box(fr, "left")


def right_hand_box(fr: Frame, task, goal):
    return hand_box(fr, "right")


# -- benchmark-style rewards ------------------------------------------------


def stand_reward(fr: Frame, task, goal):
    upright = tolerance(fr.pos["head"][:, 1], (task.head_min, np.inf), task.head_margin)
    return upright * small_control(fr.u, fr.model.actuator_limits)


def walk_reward(fr: Frame, task, goal):
    speed = goal.walk_speed if goal.walk_speed is not None else task.walk_speed
    move = tolerance(fr.com_vel[:, 0], (speed, np.inf), speed) if speed > 0 else 1.0
    return stand_reward(fr, task, goal) * move


def push_reward(fr: Frame, task, goal):
    d = fr.box_x() - goal.box_target
    reach = np.exp(-(d**2) / task.push_sigma**2)
    gap = np.minimum(np.linalg.norm(hand_box(fr, "left"), axis=1), np.linalg.norm(hand_box(fr, "right"), axis=1))
    proximity = 0.5 * (1.0 + tolerance(gap, (0.0, task.hand_tolerance), task.hand_margin))
    return reach * proximity


HB_REWARDS = {"stand": stand_reward, "walk": walk_reward, "push": push_reward}


def hb_gap(fr: Frame, task, goal):
    return _col(task.r_max - HB_REWARDS[task.hb_reward](fr, task, goal))


# residual id -> (dimension, function)
REGISTRY = {
    "head_height": (1, head_height),
    "pelvis_feet": (1, pelvis_feet),
    "com_velocity": (2, com_velocity),
    "balance": (1, balance),
    "posture": (4, posture),
    "facing": (1, facing),
    "control": (4, control),
    "box_target": (1, box_target),
    "left_hand_box": (2, left_hand_box),
    "right_hand_box": (2, right_hand_box),
    "hb_reward": (1, hb_gap),
}
STABILITY_TERMS = ("head_height", "pelvis_feet", "com_velocity", "balance", "posture", "facing", "control")
DENSE_TERMS = ("box_target", "left_hand_box", "right_hand_box")
