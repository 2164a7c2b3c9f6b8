"""Trajectory cost evaluation shared by the planners."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from horizon_bench.cost import CostSpec, ResidualLayout, cost_derivatives, cost_eval

ResidualFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

FD_EPS = 1e-6


class Objective:
    """Binds a cost spec to a batched residual function of (Q, V, U).

    Trajectory costs sum the running cost over T steps plus a terminal cost
    evaluated at the final state with zero control.
    """

    def __init__(self, model, spec: CostSpec, sizes: Mapping[str, int], residual_fn: ResidualFn):
        self.model = model
        self.spec = spec
        self.layout = ResidualLayout(spec, sizes)
        self._fn = residual_fn

    def residuals(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        U = np.atleast_2d(U)
        n = X.shape[-1] // 2
        r = self._fn(X[:, :n], X[:, n:], U)
        return self.layout.check(r)

    def cost(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        return cost_eval(self.spec, self.residuals(X, U), self.layout)

    def step_costs(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        """Per-step costs (..., T+1) for states (..., T+1, nx) and controls (..., T, nu)."""
        lead = X.shape[:-2]
        T = U.shape[-2]
        nx, nu = X.shape[-1], U.shape[-1]
        Uf = np.concatenate([U, np.zeros(lead + (1, nu))], axis=-2)
        flatX = X.reshape(-1, nx)
        flatU = Uf.reshape(-1, nu)
        c = np.full(flatX.shape[0], np.inf)
        ok = np.all(np.isfinite(flatX), axis=1)
        if ok.any():
            c[ok] = self.cost(flatX[ok], flatU[ok])
        return c.reshape(lead + (T + 1,))

    def total_cost(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        return self.step_costs(X, U).sum(axis=-1)

    def residual_jacobians(self, X: np.ndarray, U: np.ndarray):
        """Central-difference residual Jacobians along a trajectory.

        Returns running residuals (T, R), their Jacobians over (x, u)
        (T, R, nx+nu), and the terminal residual (R,) with its Jacobian (R, nx).
        """
        T, nu = U.shape
        nx = X.shape[1]
        nz = nx + nu
        Z = np.concatenate([X[:T], U], axis=1)
        zT = np.concatenate([X[T], np.zeros(nu)])
        h = FD_EPS * np.maximum(1.0, np.abs(Z))
        hT = FD_EPS * np.maximum(1.0, np.abs(zT[:nx]))
        eye = np.eye(nz)
        run = np.concatenate([Z[:, None] + h[:, :, None] * eye, Z[:, None] - h[:, :, None] * eye], axis=1)
        term = np.concatenate(
            [zT + hT[:, None] * eye[:nx], zT - hT[:, None] * eye[:nx]], axis=0
        )
        batch = np.concatenate([Z, zT[None], run.reshape(-1, nz), term], axis=0)
        r = self.residuals(batch[:, :nx], batch[:, nx:])
        R = r.shape[1]
        r_run = r[:T]
        r_T = r[T]
        off = T + 1
        rp = r[off : off + T * 2 * nz].reshape(T, 2, nz, R)
        off += T * 2 * nz
        Jrun = np.swapaxes((rp[:, 0] - rp[:, 1]) / (2.0 * h[:, :, None]), 1, 2)
        rt = r[off:].reshape(2, nx, R)
        JT = ((rt[0] - rt[1]) / (2.0 * hT[:, None])).T
        return r_run, Jrun, r_T, JT

    def quadratize(self, X: np.ndarray, U: np.ndarray):
        """Gauss-Newton cost expansion: (lx, lu, lxx, luu, lux) with a terminal
        row appended to lx/lxx (shapes (T+1, nx) and (T+1, nx, nx))."""
        T, nu = U.shape
        nx = X.shape[1]
        r_run, Jrun, r_T, JT = self.residual_jacobians(X, U)
        g, H = cost_derivatives(self.spec, r_run, Jrun, self.layout)
        gT, HT = cost_derivatives(self.spec, r_T, JT, self.layout)
        lx = np.concatenate([g[:, :nx], gT[None]], axis=0)
        lxx = np.concatenate([H[:, :nx, :nx], HT[None]], axis=0)
        return lx, g[:, nx:], lxx, H[:, nx:, nx:], H[:, nx:, :nx]
