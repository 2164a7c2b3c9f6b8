from horizon_bench.sim.dynamics import (
    SitePose,
    State,
    com,
    contact_normal_forces,
    energy,
    linearize,
    site_pose,
    step,
)
from horizon_bench.sim.model import BipedParams, ModelSpec, make_biped

__all__ = [
    "BipedParams",
    "ModelSpec",
    "SitePose",
    "State",
    "com",
    "contact_normal_forces",
    "energy",
    "linearize",
    "make_biped",
    "site_pose",
    "step",
]
