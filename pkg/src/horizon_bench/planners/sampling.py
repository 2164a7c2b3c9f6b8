"""Predictive sampling over piecewise-linear control knots."""

from __future__ import annotations

import numpy as np

from horizon_bench.errors import ContractViolation
from horizon_bench.planners.plan import Plan, PlannerConfig, interpolation_matrix
from horizon_bench.sim import dynamics as dyn


def candidate_costs(model, objective, state, knots: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Total rollout cost of each knot set in ``knots`` (N, K, nu); +inf if diverged.

    Controls are interpolated first and clamped after, exactly as in :func:`rollout`.
    """
    U = dyn.clamp_controls(model, W @ knots)
    X, status = dyn.rollout_batch(model, state.q, state.v, U)
    costs = np.full(len(knots), np.inf)
    ok = status < 0
    if ok.any():
        costs[ok] = objective.total_cost(X[ok], U[ok])
    return costs


def sampling_plan(model, objective, state, nominal: Plan, config: PlannerConfig, rng: np.random.Generator) -> Plan:
    """Perturb-and-select for exactly ``config.iterations`` rounds.

    Candidate 0 is always the incumbent, so the returned cost never exceeds
    the nominal's. Ties go to the lowest candidate index.
    """
    dt = model.control_dt
    T = config.steps(dt)
    times = config.knot_times(dt)
    if nominal.knots.shape[0] != len(times) or not np.allclose(nominal.times, times):
        raise ContractViolation("nominal does not match the sampling knots/horizon")
    W = interpolation_matrix(times, dt, T)
    lim = model.actuator_limits
    std = config.noise_scale * 2.0 * lim
    best = np.asarray(nominal.knots, float)
    best_cost = np.inf
    costs = []
    for _ in range(config.iterations):
        noise = rng.normal(size=(config.candidates - 1,) + best.shape) * std
        cands = np.concatenate([best[None], np.clip(best + noise, -lim, lim)], axis=0)
        c = candidate_costs(model, objective, state, cands, W)
        i = int(np.argmin(c))  # first index among ties
        best, best_cost = cands[i], float(c[i])
        costs.append(best_cost)
    if not np.isfinite(best_cost):
        return nominal.with_flag(True, reason="all candidates diverged", iterations=config.iterations, costs=costs)
    return Plan(times.copy(), best).with_flag(False, iterations=config.iterations, costs=costs)
