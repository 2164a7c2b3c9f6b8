"""Stepping, kinematics queries and finite-difference linearization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from horizon_bench.errors import ContractViolation, SimulationDiverged
from horizon_bench.sim import _kernels as kern
from horizon_bench.sim.model import ModelSpec

FD_EPS = 1e-6


@dataclass(frozen=True)
class State:
    q: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).copy())
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).copy())

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.q, self.v])

    @classmethod
    def from_x(cls, x: np.ndarray, t: float = 0.0) -> "State":
        n = len(x) // 2
        return cls(x[:n], x[n:], t)

    def replace(self, **kw) -> "State":
        d = {"q": self.q, "v": self.v, "t": self.t}
        d.update(kw)
        return State(**d)


@dataclass(frozen=True)
class SitePose:
    position: np.ndarray  # (x, z) [m]
    velocity: np.ndarray  # (vx, vz) [m/s]


def check_state(model: ModelSpec, state: State) -> None:
    if state.q.shape != (model.nq,) or state.v.shape != (model.nq,):
        raise ContractViolation(
            f"state has q{state.q.shape}, v{state.v.shape}; model expects ({model.nq},)"
        )
    if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(state.v))):
        raise ContractViolation("state contains non-finite entries")


def _check_control(model: ModelSpec, control) -> np.ndarray:
    u = np.asarray(control, dtype=float)
    if u.shape != (model.nu,):
        raise ContractViolation(f"control has shape {u.shape}; model expects ({model.nu},)")
    if not np.all(np.isfinite(u)):
        raise ContractViolation("control contains non-finite entries")
    return u


def clamp_controls(model: ModelSpec, u: np.ndarray) -> np.ndarray:
    lim = model.actuator_limits
    return np.clip(u, -lim, lim)


def step(model: ModelSpec, state: State, control) -> State:
    """Advance one control timestep (several semi-implicit Euler substeps)."""
    check_state(model, state)
    u = _check_control(model, control)
    q, v, status = kern.step_one(model.kernel, state.q.copy(), state.v.copy(), u)
    if status != kern.OK:
        raise SimulationDiverged(int(status), "non-finite state in physics substep")
    return State(q, v, state.t + model.control_dt)


def step_batch(model: ModelSpec, Q: np.ndarray, V: np.ndarray, U: np.ndarray):
    """Vectorized :func:`step` on arrays; returns (Q, V, ok mask)."""
    Qn, Vn, status = kern.step_batch(
        model.kernel, np.ascontiguousarray(Q, float), np.ascontiguousarray(V, float), np.ascontiguousarray(U, float)
    )
    return Qn, Vn, status == kern.OK


def rollout_batch(model: ModelSpec, q0: np.ndarray, v0: np.ndarray, U: np.ndarray):
    """Open-loop rollouts of U (N, T, nu). Returns states (N, T+1, nx) and the
    step index of divergence per candidate (-1 when finite)."""
    Qs, Vs, status = kern.rollout_batch(
        model.kernel, np.asarray(q0, float).copy(), np.asarray(v0, float).copy(), np.ascontiguousarray(U, float)
    )
    return np.concatenate([Qs, Vs], axis=-1), status


def site_pose(model: ModelSpec, state: State, site: str) -> SitePose:
    idx = model.site_index(site)
    check_state(model, state)
    P, Pd = kern.sites_batch(model.kernel, state.q[None], state.v[None], np.array([idx], dtype=np.int64))
    return SitePose(P[0, 0].copy(), Pd[0, 0].copy())


def sites(model: ModelSpec, Q: np.ndarray, V: np.ndarray, names) -> tuple[np.ndarray, np.ndarray]:
    """Positions and velocities of named sites for a batch; shapes (B, S, 2)."""
    idx = np.array([model.site_index(n) for n in names], dtype=np.int64)
    return kern.sites_batch(model.kernel, np.ascontiguousarray(Q, float), np.ascontiguousarray(V, float), idx)


def com(model: ModelSpec, state: State) -> SitePose:
    """Center of mass of the robot links (the box is excluded)."""
    check_state(model, state)
    C, Cd = kern.com_batch(model.kernel, state.q[None], state.v[None])
    return SitePose(C[0], Cd[0])


def com_batch(model: ModelSpec, Q: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return kern.com_batch(model.kernel, np.ascontiguousarray(Q, float), np.ascontiguousarray(V, float))


def energy(model: ModelSpec, state: State) -> float:
    return float(kern.energy(model.kernel, state.q, state.v))


def mass_matrix(model: ModelSpec, q: np.ndarray) -> np.ndarray:
    return kern.mass_matrix(model.kernel, np.asarray(q, float))


def contact_normal_forces(model: ModelSpec, state: State) -> np.ndarray:
    return kern.contact_normals(model.kernel, state.q, state.v)


def site_jacobian(model: ModelSpec, q: np.ndarray, site: str) -> np.ndarray:
    return kern.site_jacobian(model.kernel, np.asarray(q, float), model.site_index(site))


def _fd_steps(x: np.ndarray, scale: float = 1.0) -> np.ndarray:
    return scale * FD_EPS * np.maximum(1.0, np.abs(x))


def linearize_batch(model: ModelSpec, X: np.ndarray, U: np.ndarray, scale: float = 1.0):
    """Central-difference Jacobians of the one-control-step map at each (x, u).

    X is (T, nx) and U is (T, nu); returns A (T, nx, nx) and B (T, nx, nu).
    """
    X = np.atleast_2d(np.asarray(X, float))
    U = np.atleast_2d(np.asarray(U, float))
    T, nx = X.shape
    nu = U.shape[1]
    nz = nx + nu
    Z = np.concatenate([X, U], axis=1)
    h = _fd_steps(Z, scale)  # (T, nz)
    eye = np.eye(nz)
    plus = Z[:, None, :] + h[:, :, None] * eye[None]
    minus = Z[:, None, :] - h[:, :, None] * eye[None]
    P = np.concatenate([plus, minus], axis=1).reshape(-1, nz)
    n = nx // 2
    Qn, Vn, ok = step_batch(model, P[:, :n], P[:, n:nx], P[:, nx:])
    if not ok.all():
        raise SimulationDiverged(int(np.argmin(ok) // (2 * nz)), "diverged during linearization")
    Xn = np.concatenate([Qn, Vn], axis=1).reshape(T, 2, nz, nx)
    J = (Xn[:, 0] - Xn[:, 1]) / (2.0 * h[:, :, None])  # (T, nz, nx): row i is d step / d z_i
    J = np.swapaxes(J, 1, 2)
    return J[:, :, :nx], J[:, :, nx:]


def linearize(model: ModelSpec, state: State, control) -> tuple[np.ndarray, np.ndarray]:
    """A = d step / d x, B = d step / d u with x = (q, v)."""
    check_state(model, state)
    u = _check_control(model, control)
    step(model, state, u)
    A, B = linearize_batch(model, state.x[None], u[None])
    return A[0], B[0]
