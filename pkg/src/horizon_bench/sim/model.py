"""Planar articulated model description and the default biped."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping

import numpy as np

from horizon_bench.errors import ContractViolation

SLIDE = "slide"
HINGE = "hinge"


@dataclass(frozen=True)
class Joint:
    """One degree of freedom. Slides translate along ``axis`` in the current
    frame, hinges rotate the frame about its current origin."""

    name: str
    kind: str
    axis: tuple[float, float] = (1.0, 0.0)


@dataclass(frozen=True)
class Body:
    name: str
    parent: int  # -1 for the world
    pos: tuple[float, float]  # origin in the parent frame [m]
    joints: tuple[Joint, ...]
    mass: float  # [kg]
    inertia: float  # about the center of mass [kg m^2]
    com: tuple[float, float] = (0.0, 0.0)  # in the body frame [m]
    length: float = 1.0  # nominal link length [m], used only for validation


@dataclass(frozen=True)
class Site:
    name: str
    body: int
    pos: tuple[float, float]


@dataclass(frozen=True)
class Actuator:
    joint: str
    limit: float  # symmetric bound on torque [N m] or force [N]


@dataclass(frozen=True)
class ContactParams:
    stiffness: float = 2.0e4  # [N/m]
    damping: float = 400.0  # [N s/m]
    friction: float = 1.0
    smoothing_velocity: float = 0.05  # [m/s]


@dataclass(frozen=True)
class BoxParams:
    mass: float = 5.0  # [kg]
    half_width: float = 0.2  # [m]
    half_height: float = 0.65  # [m]
    friction: float = 0.4  # box-ground friction coefficient
    hand_stiffness: float = 5.0e3  # [N/m]
    hand_damping: float = 100.0  # [N s/m]


@dataclass(frozen=True)
class ModelSpec:
    bodies: tuple[Body, ...]
    sites: tuple[Site, ...]
    actuators: tuple[Actuator, ...]
    contact_sites: tuple[str, ...] = ()
    contact: ContactParams = field(default_factory=ContactParams)
    gravity: float = 9.81  # [m/s^2], acts along -z
    box: BoxParams | None = None
    box_joint: str | None = None
    hand_sites: tuple[str, ...] = ()
    physics_dt: float = 0.005
    control_dt: float = 0.02
    joint_damping: Mapping[str, float] = field(default_factory=dict)
    armature: Mapping[str, float] = field(default_factory=dict)
    robot_bodies: tuple[int, ...] | None = None  # bodies counted in the CoM; default all but the box
    joint_ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    limit_stiffness: float = 1.0e3  # soft joint-range spring [N*m/rad]
    limit_damping: float = 10.0
    divergence_bound: float = 1.0e4  # any |q| or |v| beyond this counts as diverged

    def __post_init__(self):
        for i, b in enumerate(self.bodies):
            if not (b.mass > 0 and b.inertia > 0 and b.length > 0):
                raise ContractViolation(f"body {b.name!r}: mass, inertia and length must be positive")
            if not -1 <= b.parent < i:
                raise ContractViolation(f"body {b.name!r}: parent must precede it")
            for j in b.joints:
                if j.kind not in (SLIDE, HINGE):
                    raise ContractViolation(f"joint {j.name!r}: unknown kind {j.kind!r}")
        names = self.joint_names
        if len(set(names)) != len(names):
            raise ContractViolation("joint names must be unique")
        for a in self.actuators:
            if a.joint not in names:
                raise ContractViolation(f"actuator on unknown joint {a.joint!r}")
            if not a.limit > 0:
                raise ContractViolation(f"actuator {a.joint!r}: limit must be positive")
        site_names = [s.name for s in self.sites]
        for s in self.sites:
            if not 0 <= s.body < len(self.bodies):
                raise ContractViolation(f"site {s.name!r} on unknown body")
        for n in (*self.contact_sites, *self.hand_sites):
            if n not in site_names:
                raise ContractViolation(f"unknown site {n!r}")
        c = self.contact
        if not (c.stiffness > 0 and c.damping >= 0 and c.friction >= 0 and c.smoothing_velocity > 0):
            raise ContractViolation("contact stiffness and smoothing velocity must be positive")
        if (self.box is None) != (self.box_joint is None):
            raise ContractViolation("box parameters and box joint go together")
        if self.box is not None:
            if self.box_joint not in names:
                raise ContractViolation(f"unknown box joint {self.box_joint!r}")
            bx = self.box
            if not (bx.mass > 0 and bx.half_width > 0 and bx.half_height > 0):
                raise ContractViolation("box mass and size must be positive")
        for n, (lo, hi) in self.joint_ranges.items():
            if n not in names or not lo < hi:
                raise ContractViolation(f"invalid range for joint {n!r}")
        if not (self.limit_stiffness >= 0 and self.limit_damping >= 0 and self.divergence_bound > 0):
            raise ContractViolation("joint-range gains must be non-negative and the divergence bound positive")
        if not (self.physics_dt > 0 and self.control_dt > 0):
            raise ContractViolation("timesteps must be positive")
        ratio = self.control_dt / self.physics_dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ContractViolation("control timestep must be an integer multiple of the physics timestep")

    @cached_property
    def joint_names(self) -> tuple[str, ...]:
        return tuple(j.name for b in self.bodies for j in b.joints)

    @property
    def nq(self) -> int:
        return len(self.joint_names)

    @property
    def nu(self) -> int:
        return len(self.actuators)

    @property
    def nx(self) -> int:
        return 2 * self.nq

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.physics_dt))

    @cached_property
    def actuator_limits(self) -> np.ndarray:
        return np.array([a.limit for a in self.actuators], dtype=float)

    @cached_property
    def actuated_dofs(self) -> np.ndarray:
        return np.array([self.joint_index(a.joint) for a in self.actuators], dtype=np.int64)

    def joint_index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise ContractViolation(f"unknown joint {name!r}") from None

    def site_index(self, name: str) -> int:
        for i, s in enumerate(self.sites):
            if s.name == name:
                return i
        raise ContractViolation(f"unknown site {name!r}")

    @property
    def box_dof(self) -> int | None:
        return None if self.box_joint is None else self.joint_index(self.box_joint)

    @cached_property
    def com_bodies(self) -> tuple[int, ...]:
        if self.robot_bodies is not None:
            return self.robot_bodies
        box_body = None
        if self.box_joint is not None:
            box_body = next(i for i, b in enumerate(self.bodies) if any(j.name == self.box_joint for j in b.joints))
        return tuple(i for i in range(len(self.bodies)) if i != box_body)

    @property
    def robot_mass(self) -> float:
        return float(sum(self.bodies[i].mass for i in self.com_bodies))

    @cached_property
    def kernel(self):
        from horizon_bench.sim._kernels import build_kernel

        return build_kernel(self)


# -- default planar biped ---------------------------------------------------

BIPED_JOINTS = ("root_x", "root_z", "root_pitch", "left_hip", "left_knee", "right_hip", "right_knee")
LEG_JOINTS = BIPED_JOINTS[3:]


@dataclass(frozen=True)
class BipedParams:
    """Configuration defaults for the desk-scale biped.

    Angles follow one convention everywhere: positive rotation tips a link's
    upward axis toward +x. Root pitch > 0 leans the torso forward, hip < 0
    swings the thigh forward, knee > 0 flexes the knee.
    """

    torso_mass: float = 14.0
    torso_length: float = 0.6
    torso_com: float = 0.2
    head_offset: float = 0.4
    thigh_mass: float = 4.5
    thigh_length: float = 0.5
    shank_mass: float = 3.5
    shank_length: float = 0.5
    left_hand: tuple[float, float] = (0.3, 0.15)
    right_hand: tuple[float, float] = (0.3, 0.05)
    torque_limit: float = 150.0
    joint_damping: float = 0.0
    armature: float = 0.02
    gravity: float = 9.81
    contact_stiffness: float = 2.0e4
    contact_damping: float = 400.0
    friction: float = 1.0
    friction_smoothing: float = 0.05
    box: bool = False
    box_mass: float = 5.0
    box_half_width: float = 0.2
    box_half_height: float = 0.65
    box_friction: float = 0.4
    hand_stiffness: float = 5.0e3
    hand_damping: float = 100.0
    hip_range: tuple[float, float] = (-2.2, 1.0)
    knee_range: tuple[float, float] = (0.0, 2.6)
    limit_stiffness: float = 1.0e3
    limit_damping: float = 10.0
    physics_dt: float = 0.005
    control_dt: float = 0.02

    def replace(self, overrides: Mapping[str, Any]) -> "BipedParams":
        known = {f.name for f in dataclasses.fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ContractViolation(f"unknown model parameter(s): {', '.join(unknown)}")
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
        return dataclasses.replace(self, **values)


def _rod_inertia(mass: float, length: float) -> float:
    return mass * length**2 / 12.0


def make_biped(params: BipedParams | None = None) -> ModelSpec:
    p = params or BipedParams()
    bodies = [
        Body(
            "torso",
            -1,
            (0.0, 0.0),
            (Joint("root_x", SLIDE, (1.0, 0.0)), Joint("root_z", SLIDE, (0.0, 1.0)), Joint("root_pitch", HINGE)),
            p.torso_mass,
            _rod_inertia(p.torso_mass, p.torso_length),
            (0.0, p.torso_com),
            p.torso_length,
        )
    ]
    for side in ("left", "right"):
        thigh = len(bodies)
        bodies.append(
            Body(
                f"{side}_thigh",
                0,
                (0.0, 0.0),
                (Joint(f"{side}_hip", HINGE),),
                p.thigh_mass,
                _rod_inertia(p.thigh_mass, p.thigh_length),
                (0.0, -p.thigh_length / 2),
                p.thigh_length,
            )
        )
        bodies.append(
            Body(
                f"{side}_shank",
                thigh,
                (0.0, -p.thigh_length),
                (Joint(f"{side}_knee", HINGE),),
                p.shank_mass,
                _rod_inertia(p.shank_mass, p.shank_length),
                (0.0, -p.shank_length / 2),
                p.shank_length,
            )
        )
    sites = [
        Site("head", 0, (0.0, p.head_offset)),
        Site("pelvis", 0, (0.0, 0.0)),
        Site("left_foot", 2, (0.0, -p.shank_length)),
        Site("right_foot", 4, (0.0, -p.shank_length)),
        Site("left_knee", 1, (0.0, -p.thigh_length)),
        Site("right_knee", 3, (0.0, -p.thigh_length)),
        Site("left_hand", 0, tuple(p.left_hand)),
        Site("right_hand", 0, tuple(p.right_hand)),
    ]
    box = None
    box_joint = None
    hand_sites: tuple[str, ...] = ()
    if p.box:
        box = BoxParams(
            p.box_mass, p.box_half_width, p.box_half_height, p.box_friction, p.hand_stiffness, p.hand_damping
        )
        box_joint = "box_x"
        hand_sites = ("left_hand", "right_hand")
        side = 2 * p.box_half_width
        bodies.append(
            Body(
                "box",
                -1,
                (0.0, p.box_half_height),
                (Joint("box_x", SLIDE, (1.0, 0.0)),),
                p.box_mass,
                p.box_mass * (side**2 + (2 * p.box_half_height) ** 2) / 12.0,
                (0.0, 0.0),
                side,
            )
        )
    leg = {name: p.joint_damping for name in LEG_JOINTS}
    arm = {name: p.armature for name in LEG_JOINTS}
    return ModelSpec(
        bodies=tuple(bodies),
        sites=tuple(sites),
        actuators=tuple(Actuator(name, p.torque_limit) for name in LEG_JOINTS),
        contact_sites=("left_foot", "right_foot", "left_knee", "right_knee", "pelvis", "head"),
        contact=ContactParams(p.contact_stiffness, p.contact_damping, p.friction, p.friction_smoothing),
        gravity=p.gravity,
        box=box,
        box_joint=box_joint,
        hand_sites=hand_sites,
        physics_dt=p.physics_dt,
        control_dt=p.control_dt,
        joint_damping=leg,
        armature=arm,
        joint_ranges={
            name: tuple(p.hip_range if name.endswith("hip") else p.knee_range) for name in LEG_JOINTS
        },
        limit_stiffness=p.limit_stiffness,
        limit_damping=p.limit_damping,
    )


# -- small test models --------------------------------------------------------


def make_double_integrator(mass: float = 1.0, control_dt: float = 0.02, substeps: int = 1, limit: float = 1e3):
    """A single actuated slider along x; no gravity effect, no contact."""
    body = Body("cart", -1, (0.0, 0.0), (Joint("x", SLIDE, (1.0, 0.0)),), mass, 1.0)
    return ModelSpec(
        bodies=(body,),
        sites=(Site("cart", 0, (0.0, 0.0)),),
        actuators=(Actuator("x", limit),),
        gravity=9.81,
        physics_dt=control_dt / substeps,
        control_dt=control_dt,
    )


def make_pendulum(mass: float = 1.0, length: float = 1.0, control_dt: float = 0.02, substeps: int = 4,
                  limit: float = 10.0, pivot_height: float = 2.0) -> ModelSpec:
    """Frictionless pendulum hanging from a pivot; angle 0 points straight down."""
    body = Body(
        "bob",
        -1,
        (0.0, pivot_height),
        (Joint("swing", HINGE),),
        mass,
        1e-3 * mass * length**2,
        (0.0, -length),
        length,
    )
    return ModelSpec(
        bodies=(body,),
        sites=(Site("tip", 0, (0.0, -length)),),
        actuators=(Actuator("swing", limit),),
        physics_dt=control_dt / substeps,
        control_dt=control_dt,
    )


def make_point_mass(mass: float = 1.0, stiffness: float = 2.0e4, damping: float = 200.0,
                    physics_dt: float = 0.005, control_dt: float = 0.02) -> ModelSpec:
    """A free point mass in the plane with one ground contact site."""
    body = Body(
        "ball",
        -1,
        (0.0, 0.0),
        (Joint("x", SLIDE, (1.0, 0.0)), Joint("z", SLIDE, (0.0, 1.0))),
        mass,
        1e-3,
    )
    return ModelSpec(
        bodies=(body,),
        sites=(Site("ball", 0, (0.0, 0.0)),),
        actuators=(Actuator("x", 100.0),),
        contact_sites=("ball",),
        contact=ContactParams(stiffness, damping, 1.0, 0.05),
        physics_dt=physics_dt,
        control_dt=control_dt,
    )


def static_penetration(model: ModelSpec, n_contacts: int = 1) -> float:
    """Spring compression that balances the robot weight over ``n_contacts`` equal contacts."""
    return model.robot_mass * model.gravity / (n_contacts * model.contact.stiffness)
