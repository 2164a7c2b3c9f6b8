import numpy as np
import pytest

from horizon_bench.cost import spec_from_terms
from horizon_bench.errors import ContractViolation
from horizon_bench.planners import (
    ILQG,
    SAMPLING,
    Objective,
    Plan,
    PlannerConfig,
    agent_step,
    ilqg_plan,
    make_agent,
    rollout,
    sampling_plan,
    task_agent,
    zero_plan,
)
from horizon_bench.planners.plan import constant_plan, interpolation_matrix
from horizon_bench.sim import dynamics as dyn
from horizon_bench.sim.dynamics import State
from horizon_bench.sim.model import make_double_integrator
from oracles import riccati_finite, riccati_infinite, simulate_linear
from problems import bowl_objective, lq_problem, pendulum_problem


@pytest.fixture(scope="module")
def lq():
    return lq_problem()


def lq_config(p, **kw):
    return PlannerConfig(horizon=p.T * p.model.control_dt, **kw)


def test_ilqg_matches_riccati(lq):
    cfg = lq_config(lq, iterations=1)
    x0 = State([0.1], [-0.05])
    plan = ilqg_plan(lq.model, lq.objective, x0, zero_plan(cfg, lq.model), cfg)
    gains, _ = riccati_finite(lq.A, lq.B, lq.Q, lq.R, lq.Q, lq.T)
    _, us = simulate_linear(lq.A, lq.B, gains, x0.x)
    assert not plan.degraded
    np.testing.assert_allclose(plan.knots[: lq.T], us, rtol=0, atol=1e-6)
    np.testing.assert_allclose(plan.gains, gains, rtol=0, atol=1e-6)


def test_ilqg_zero_cost_is_stationary():
    m = make_double_integrator()
    spec = spec_from_terms("u", [("pos", "quadratic", 0.1, 0.0), ("u", "quadratic", 0.1, 1.0)])
    obj = Objective(m, spec, {"pos": 1, "u": 1}, lambda Q, V, U: np.concatenate([Q, U], axis=1))
    cfg = PlannerConfig(horizon=0.2, iterations=3)
    plan = ilqg_plan(m, obj, State([0.4], [0.2]), zero_plan(cfg, m), cfg)
    assert not plan.degraded
    np.testing.assert_array_equal(plan.knots, 0.0)
    assert plan.info["costs"] == [0.0]


def test_ilqg_pendulum_costs_strictly_decrease():
    m, obj = pendulum_problem()
    cfg = PlannerConfig(horizon=1.0, iterations=15)
    plan = ilqg_plan(m, obj, State([0.1], [0.0]), zero_plan(cfg, m), cfg)
    costs = plan.info["costs"]
    assert plan.info["iterations"] == 15
    assert len(costs) >= 3
    assert all(b < a for a, b in zip(costs, costs[1:]))
    assert rollout(m, obj, State([0.1], [0.0]), plan).cost == pytest.approx(costs[-1], rel=1e-12)
    assert np.all(np.abs(plan.knots) <= m.actuator_limits)


def test_ilqg_degrades_on_diverged_warm_start():
    m = make_double_integrator(limit=1e12)
    spec = spec_from_terms("u", [("u", "quadratic", 0.1, 1.0)])
    obj = Objective(m, spec, {"u": 1}, lambda Q, V, U: U)
    cfg = PlannerConfig(horizon=0.1, iterations=2)
    warm = constant_plan(cfg, m, [1e12])
    plan = ilqg_plan(m, obj, State([0.0], [0.0]), warm, cfg)
    assert plan.degraded
    np.testing.assert_array_equal(plan.knots, warm.knots)


def test_ilqg_rejects_mismatched_warm_start(lq):
    cfg = lq_config(lq)
    other = zero_plan(PlannerConfig(horizon=0.5), lq.model)
    with pytest.raises(ContractViolation):
        ilqg_plan(lq.model, lq.objective, State([0.0], [0.0]), other, cfg)


def test_rollout_single_step(lq):
    cfg = PlannerConfig(horizon=lq.model.control_dt)
    s = State([0.3], [0.1])
    plan = constant_plan(cfg, lq.model, [2.0])
    r = rollout(lq.model, lq.objective, s, plan)
    x1 = dyn.step(lq.model, s, [2.0]).x
    expected = lq.objective.cost(s.x[None], np.array([[2.0]]))[0] + lq.objective.cost(x1[None], np.zeros((1, 1)))[0]
    assert r.cost == pytest.approx(expected, rel=1e-14)


def test_rollout_zero_weights_cost_nothing(stand_task):
    spec = stand_task.cost.scaled(0.0)
    obj = stand_task.objective(stand_task.initial_goal(), spec)
    cfg = PlannerConfig(kind=SAMPLING, horizon=0.2)
    plan = constant_plan(cfg, stand_task.model, [30.0, -20.0, 10.0, 5.0])
    assert rollout(stand_task.model, obj, stand_task.canonical_state(), plan).cost == 0.0


def test_rollout_recomposes(stand_task, rng):
    m = stand_task.model
    obj = stand_task.objective(stand_task.initial_goal())
    cfg = PlannerConfig(kind=SAMPLING, horizon=0.2, knots=4)
    plan = Plan(cfg.knot_times(m.control_dt), rng.uniform(-40, 40, size=(4, 4)))
    s = stand_task.canonical_state()
    r = rollout(m, obj, s, plan)
    total = 0.0
    for u in plan.sample(m.control_dt, 10):
        total += obj.cost(s.x[None], u[None])[0]
        s = dyn.step(m, s, u)
    total += obj.cost(s.x[None], np.zeros((1, 4)))[0]
    assert r.cost == pytest.approx(total, rel=1e-12)


def test_rollout_divergence_sentinel():
    m = make_double_integrator(limit=1e12)
    obj = Objective(m, spec_from_terms("u", [("u", "quadratic", 0.1, 1.0)]), {"u": 1}, lambda Q, V, U: U)
    cfg = PlannerConfig(horizon=0.1)
    r = rollout(m, obj, State([0.0], [0.0]), constant_plan(cfg, m, [1e12]))
    assert r.cost == np.inf and r.diverged_at >= 0


# -- sampling ------------------------------------------------------------------


def sampling_setup(task, **kw):
    cfg = PlannerConfig(kind=SAMPLING, horizon=0.2, **kw)
    return cfg, task.objective(task.initial_goal())


def test_sampling_zero_noise_returns_nominal(stand_task, rng):
    cfg, obj = sampling_setup(stand_task, noise_scale=0.0, candidates=4, iterations=3)
    nominal = Plan(cfg.knot_times(0.02), rng.uniform(-10, 10, size=(cfg.knots, 4)))
    plan = sampling_plan(stand_task.model, obj, stand_task.canonical_state(), nominal, cfg, rng)
    np.testing.assert_array_equal(plan.knots, nominal.knots)


def test_sampling_deterministic(stand_task):
    cfg, obj = sampling_setup(stand_task, candidates=2, iterations=2)
    s = stand_task.canonical_state()
    nominal = zero_plan(cfg, stand_task.model)
    a = sampling_plan(stand_task.model, obj, s, nominal, cfg, np.random.default_rng(9))
    b = sampling_plan(stand_task.model, obj, s, nominal, cfg, np.random.default_rng(9))
    np.testing.assert_array_equal(a.knots, b.knots)
    assert a.info["costs"] == b.info["costs"]


def test_sampling_bowl_non_increasing():
    m = make_double_integrator(limit=10.0)
    obj = bowl_objective(m, [3.0])
    cfg = PlannerConfig(kind=SAMPLING, horizon=0.2, iterations=10, candidates=8, noise_scale=0.1)
    nominal = zero_plan(cfg, m)
    s = State([0.0], [0.0])
    plan = sampling_plan(m, obj, s, nominal, cfg, np.random.default_rng(0))
    costs = plan.info["costs"]
    assert len(costs) == 10
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert costs[-1] <= rollout(m, obj, s, nominal).cost
    assert costs[-1] < rollout(m, obj, s, nominal).cost  # something improved


def test_sampling_never_worse_than_nominal(push_task):
    m = push_task.model
    cfg, obj = sampling_setup(push_task, candidates=6, iterations=1)
    rng = np.random.default_rng(3)
    base = push_task.canonical_state()
    for _ in range(30):
        s = State(base.q + np.concatenate([[0, 0], rng.normal(scale=0.05, size=m.nq - 2)]), base.v)
        nominal = Plan(cfg.knot_times(m.control_dt), rng.uniform(-1, 1, (cfg.knots, 4)) * m.actuator_limits)
        plan = sampling_plan(m, obj, s, nominal, cfg, rng)
        assert rollout(m, obj, s, plan).cost <= rollout(m, obj, s, nominal).cost


def test_sampling_all_diverged_is_degraded():
    m = make_double_integrator(limit=1e12)
    obj = bowl_objective(m, [0.0])
    cfg = PlannerConfig(kind=SAMPLING, horizon=0.1, noise_scale=0.0, candidates=3)
    nominal = constant_plan(cfg, m, [1e12])
    plan = sampling_plan(m, obj, State([0.0], [0.0]), nominal, cfg, np.random.default_rng(0))
    assert plan.degraded
    np.testing.assert_array_equal(plan.knots, nominal.knots)


def test_sampling_rejects_mismatched_nominal(stand_task, rng):
    cfg, obj = sampling_setup(stand_task)
    bad = zero_plan(PlannerConfig(kind=SAMPLING, horizon=0.2, knots=3), stand_task.model)
    with pytest.raises(ContractViolation):
        sampling_plan(stand_task.model, obj, stand_task.canonical_state(), bad, cfg, rng)


# -- plans and config --------------------------------------------------------------


def test_shift_samples_ahead(rng):
    cfg = PlannerConfig(kind=SAMPLING, horizon=0.4, knots=5)
    plan = Plan(cfg.knot_times(0.02), rng.normal(size=(5, 2)))
    sh = plan.shifted(0.02)
    t = sh.times[:-1]  # interior knots
    np.testing.assert_allclose(sh.controls(t), plan.controls(t + 0.02), atol=1e-12)
    np.testing.assert_array_equal(sh.knots[-1], plan.knots[-1])


def test_shift_moves_gains_and_states(rng):
    cfg = PlannerConfig(horizon=0.06)
    T = 3
    plan = Plan(cfg.knot_times(0.02), rng.normal(size=(4, 1)), rng.normal(size=(T, 1, 2)), rng.normal(size=(T + 1, 2)))
    sh = plan.shifted(0.02)
    np.testing.assert_array_equal(sh.gains[:-1], plan.gains[1:])
    np.testing.assert_array_equal(sh.states[:-1], plan.states[1:])


def test_interpolation_matrix_reproduces_controls(rng):
    cfg = PlannerConfig(kind=SAMPLING, horizon=0.3, knots=4)
    times = cfg.knot_times(0.02)
    plan = Plan(times, rng.normal(size=(4, 3)))
    W = interpolation_matrix(times, 0.02, 15)
    np.testing.assert_allclose(W @ plan.knots, plan.sample(0.02, 15), atol=1e-14)


def test_plan_invariants():
    with pytest.raises(ContractViolation):
        Plan(np.array([0.0, 0.1, 0.1]), np.zeros((3, 1)))
    with pytest.raises(ContractViolation):
        Plan(np.array([0.05, 0.1]), np.zeros((2, 1)))
    with pytest.raises(ContractViolation):
        Plan(np.array([0.0, 0.1]), np.zeros((3, 1)))


@pytest.mark.parametrize("kw", [dict(kind="cem"), dict(horizon=0.0), dict(iterations=0), dict(candidates=1),
                                dict(knots=1), dict(reg_init=1e12), dict(noise_scale=-0.1)])
def test_config_validation(kw):
    with pytest.raises(ContractViolation):
        PlannerConfig(**kw)


def test_line_search_schedule():
    np.testing.assert_array_equal(PlannerConfig().alphas(), 0.5 ** np.arange(11))
    assert PlannerConfig().alphas()[-1] == 2.0**-10


# -- agent ---------------------------------------------------------------------


def test_agent_lq_closed_loop_matches_lqr():
    p = lq_problem(T=400)  # long enough for the first finite-horizon gain to converge
    cfg = lq_config(p, iterations=1)
    agent = make_agent(p.model, p.objective, cfg)
    K, _ = riccati_infinite(p.A, p.B, p.Q, p.R)
    s = State([0.1], [-0.05])
    x = s.x
    for _ in range(100):
        u, agent = agent_step(agent, s)
        s = dyn.step(p.model, s, u)
        x = p.A @ x + p.B @ (K @ x)
    np.testing.assert_allclose(s.x, x, atol=1e-3)


@pytest.mark.parametrize("kind", [ILQG, SAMPLING])
def test_agent_first_call_on_stand(stand_task, kind):
    cfg = PlannerConfig(kind=kind, horizon=0.2, iterations=1, candidates=4)
    agent = task_agent(stand_task, cfg, seed=0)
    u, agent = agent_step(agent, stand_task.canonical_state())
    assert u.shape == (4,) and np.all(np.isfinite(u))
    assert np.all(np.abs(u) <= stand_task.model.actuator_limits)
    assert agent.calls == 1 and agent.iterations == 1


@pytest.mark.parametrize("kind", [ILQG, SAMPLING])
def test_agent_controls_saturate_at_limits(kind):
    m = make_double_integrator(limit=2.0)
    obj = bowl_objective(m, [50.0])  # optimum far outside the limits
    cfg = PlannerConfig(kind=kind, horizon=0.1, iterations=2, candidates=4, noise_scale=1.0)
    agent = make_agent(m, obj, cfg, seed=1)
    s = State([0.0], [0.0])
    for _ in range(10):
        u, agent = agent_step(agent, s)
        assert np.all(np.abs(u) <= 2.0)
        s = dyn.step(m, s, u)
    if kind == ILQG:
        assert u[0] == pytest.approx(2.0)


def test_agent_without_feedback_emits_first_knot(lq):
    cfg = lq_config(lq, iterations=1, feedback=False)
    agent = make_agent(lq.model, lq.objective, cfg)
    u, agent = agent_step(agent, State([0.1], [0.0]))
    np.testing.assert_array_equal(u, agent.plan.knots[0])


def test_agent_is_reproducible(stand_task):
    cfg = PlannerConfig(kind=SAMPLING, horizon=0.2, iterations=1, candidates=4)
    runs = []
    for _ in range(2):
        agent = task_agent(stand_task, cfg, seed=4)
        s = stand_task.canonical_state()
        us = []
        for _ in range(5):
            u, agent = agent_step(agent, s)
            s = dyn.step(stand_task.model, s, u)
            us.append(u)
        runs.append(np.array(us))
    np.testing.assert_array_equal(runs[0], runs[1])
