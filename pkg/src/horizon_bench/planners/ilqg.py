"""Iterative LQG with Levenberg-Marquardt regularization and backtracking."""

from __future__ import annotations

import numpy as np

from horizon_bench.errors import ContractViolation, SimulationDiverged
from horizon_bench.planners.plan import ILQG, Plan, PlannerConfig
from horizon_bench.sim import _kernels as kern
from horizon_bench.sim import dynamics as dyn


def backward_pass(A, B, lx, lu, lxx, luu, lux, reg: float):
    """Riccati sweep with (Quu + reg I). Returns (k, K) or None when Quu + reg I
    is not positive definite or anything turns non-finite."""
    T, nx, nu = B.shape
    Vx = lx[T].copy()
    Vxx = lxx[T].copy()
    k = np.zeros((T, nu))
    K = np.zeros((T, nu, nx))
    eye = np.eye(nu)
    for t in range(T - 1, -1, -1):
        At, Bt = A[t], B[t]
        Qx = lx[t] + At.T @ Vx
        Qu = lu[t] + Bt.T @ Vx
        VA = Vxx @ At
        Qxx = lxx[t] + At.T @ VA
        Quu = luu[t] + Bt.T @ Vxx @ Bt
        Qux = lux[t] + Bt.T @ VA
        try:
            L = np.linalg.cholesky(Quu + reg * eye)
        except np.linalg.LinAlgError:
            return None
        rhs = np.concatenate([Qu[:, None], Qux], axis=1)
        sol = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
        kt = -sol[:, 0]
        Kt = -sol[:, 1:]
        Vx = Qx + Kt.T @ Quu @ kt + Kt.T @ Qu + Qux.T @ kt
        Vxx = Qxx + Kt.T @ Quu @ Kt + Kt.T @ Qux + Qux.T @ Kt
        Vxx = 0.5 * (Vxx + Vxx.T)
        if not (np.all(np.isfinite(Vx)) and np.all(np.isfinite(Vxx))):
            return None
        k[t] = kt
        K[t] = Kt
    return k, K


def ilqg_plan(model, objective, state, warm: Plan, config: PlannerConfig) -> Plan:
    """Runs exactly ``config.iterations`` outer iterations from the warm start.

    Each iteration linearizes along the incumbent, runs a regularized backward
    pass and a backtracking line search; a step is accepted only on a strict
    decrease of the total cost. ``plan.info`` records the accepted costs.
    """
    dt = model.control_dt
    T = config.steps(dt)
    if warm.knots.shape[0] != T + 1:
        raise ContractViolation("warm start does not match the iLQG horizon")
    times = warm.times
    U = dyn.clamp_controls(model, warm.knots[:T].copy())
    X, status = dyn.rollout_batch(model, state.q, state.v, U[None])
    if status[0] >= 0:
        return warm.with_flag(True, reason="warm start diverged", iterations=0, costs=[])
    X = X[0]
    J = float(objective.total_cost(X, U))
    costs = [J]
    reg = config.reg_init
    gains = None
    expansion = None
    alphas = config.alphas()
    iterations = 0
    for _ in range(config.iterations):
        iterations += 1
        if expansion is None:
            try:
                A, B = dyn.linearize_batch(model, X[:T], U)
            except SimulationDiverged:
                return warm.with_flag(True, reason="linearization diverged", iterations=iterations, costs=costs)
            expansion = (A, B, *objective.quadratize(X, U))
        sweep = None
        while sweep is None:
            sweep = backward_pass(*expansion, reg)
            if sweep is None:
                reg *= config.reg_scale
                if reg > config.reg_max:
                    return warm.with_flag(True, reason="regularization limit", iterations=iterations, costs=costs)
        k, K = sweep
        if gains is None:
            gains = K
        Xs, Us, st = kern.rollout_feedback(model.kernel, state.x, U, X, k, K, alphas)
        trial = np.full(len(alphas), np.inf)
        finite = st < 0
        if finite.any():
            trial[finite] = objective.total_cost(Xs[finite], Us[finite])
        better = np.nonzero(trial < J)[0]
        if len(better):
            i = better[0]
            X, U, J = Xs[i], Us[i], float(trial[i])
            costs.append(J)
            gains = K
            expansion = None
            reg = max(reg / config.reg_scale, config.reg_min)
        else:
            reg = min(reg * config.reg_scale, config.reg_max)
    knots = np.concatenate([U, U[-1:]], axis=0)
    plan = Plan(times.copy(), knots, gains, X, False)
    return plan.with_flag(False, iterations=iterations, costs=costs, regularization=reg)

