import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from horizon_bench.cost import (
    QUADRATIC,
    SMOOTH_ABS,
    CostSpec,
    Norm,
    ResidualLayout,
    cost_derivatives,
    cost_eval,
    norm_eval,
    reward_to_cost,
    spec_from_terms,
)
from horizon_bench.errors import ContractViolation
from oracles import central_diff


def test_smooth_abs_at_zero():
    v, d1, d2 = norm_eval(Norm(SMOOTH_ABS, 0.1), 0.0)
    assert v == 0.0 and d1 == 0.0
    assert d2 == pytest.approx(10.0)


def test_smooth_abs_value():
    assert norm_eval(Norm(SMOOTH_ABS, 4.0), 3.0)[0] == pytest.approx(1.0)


def test_quadratic_values():
    v, d1, d2 = norm_eval(Norm(QUADRATIC), -2.0)
    assert (v, d1, d2) == (2.0, -2.0, 1.0)


def test_norm_rejects_bad_p():
    with pytest.raises(ContractViolation):
        Norm(SMOOTH_ABS, 0.0)
    with pytest.raises(ContractViolation):
        Norm("huber")


def test_cost_eval_examples():
    spec = spec_from_terms("t", [("a", QUADRATIC, 0.1, 1.0), ("b", SMOOTH_ABS, 0.2, 3.0)])
    assert cost_eval(spec, np.zeros(2)) == 0.0
    single = spec_from_terms("s", [("a", QUADRATIC, 0.1, 2.0)])
    assert cost_eval(single, np.array([3.0])) == pytest.approx(9.0)


def test_cost_eval_layout_mismatch():
    spec = spec_from_terms("t", [("a", QUADRATIC, 0.1, 1.0)])
    with pytest.raises(ContractViolation):
        cost_eval(spec, np.zeros(2))


def test_cost_derivatives_identity_jacobian():
    spec = spec_from_terms("t", [("a", QUADRATIC, 0.1, 1.0)])
    layout = ResidualLayout(spec, {"a": 3})
    r = np.array([0.5, -1.0, 2.0])
    g, H = cost_derivatives(spec, r, np.eye(3), layout)
    np.testing.assert_allclose(g, r)
    np.testing.assert_allclose(H, np.eye(3))


def test_cost_derivatives_zero_jacobian():
    spec = spec_from_terms("t", [("a", SMOOTH_ABS, 0.1, 2.0)])
    layout = ResidualLayout(spec, {"a": 2})
    g, H = cost_derivatives(spec, np.array([1.0, -3.0]), np.zeros((2, 5)), layout)
    assert not g.any() and not H.any()


def test_cost_derivatives_shape_check():
    spec = spec_from_terms("t", [("a", QUADRATIC, 0.1, 1.0)])
    with pytest.raises(ContractViolation):
        cost_derivatives(spec, np.zeros(1), np.zeros((2, 3)))


@pytest.mark.parametrize(
    "r_hb, r_max, p, expected",
    [(1.0, 1.0, 0.5, 0.0), (1.0, 1.0, 3.0, 0.0), (0.0, 1.0, 0.1, 0.904988), (-3.0, 1.0, 4.0, 1.656854)],
)
def test_reward_to_cost_examples(r_hb, r_max, p, expected):
    assert reward_to_cost(r_hb, r_max, p) == pytest.approx(expected, abs=1e-6)


def test_reward_to_cost_rejects_bad_p():
    with pytest.raises(ContractViolation):
        reward_to_cost(0.5, 1.0, -1.0)


def test_layout_is_stable():
    spec = spec_from_terms("t", [("a", QUADRATIC, 0.1, 1.0), ("b", SMOOTH_ABS, 0.2, 3.0)])
    a = ResidualLayout(spec, {"a": 2, "b": 3})
    b = ResidualLayout(spec, {"b": 3, "a": 2})
    assert a.slices == b.slices == {"a": slice(0, 2), "b": slice(2, 5)}
    np.testing.assert_array_equal(a.weights, [1, 1, 3, 3, 3])


def test_spec_round_trip_and_validation():
    spec = spec_from_terms("t", [("a", QUADRATIC, 0.1, 1.0), ("b", SMOOTH_ABS, 0.2, 3.0)])
    assert CostSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ContractViolation):
        spec_from_terms("t", [("a", QUADRATIC, 0.1, 1.0), ("a", QUADRATIC, 0.1, 1.0)])
    with pytest.raises(ContractViolation):
        spec_from_terms("t", [("a", QUADRATIC, 0.1, -1.0)])
    with pytest.raises(ContractViolation):
        CostSpec.from_dict({"terms": [{"residual": "a", "weight": 1.0, "scale": 2}]})


finite = st.floats(-10, 10, allow_nan=False)


@given(finite, st.floats(0.01, 5.0), st.sampled_from([QUADRATIC, SMOOTH_ABS]))
def test_norm_nonnegative_and_zero_at_origin(x, p, kind):
    n = Norm(kind, p)
    assert norm_eval(n, x)[0] >= 0.0
    assert norm_eval(n, 0.0)[0] == 0.0


@given(st.lists(finite, min_size=3, max_size=3), st.floats(0.0, 10.0))
def test_cost_linear_in_weights(r, k):
    spec = spec_from_terms("t", [("a", QUADRATIC, 0.1, 1.5), ("b", SMOOTH_ABS, 0.3, 0.7), ("c", SMOOTH_ABS, 1.0, 2.0)])
    r = np.array(r)
    assert cost_eval(spec.scaled(k), r) == pytest.approx(k * cost_eval(spec, r), rel=1e-12, abs=1e-12)


def test_gauss_newton_hessian_is_psd():
    rng = np.random.default_rng(0)
    spec = spec_from_terms("t", [("a", QUADRATIC, 0.1, 1.5), ("b", SMOOTH_ABS, 0.3, 0.7)])
    layout = ResidualLayout(spec, {"a": 2, "b": 3})
    for _ in range(100):
        _, H = cost_derivatives(spec, rng.normal(size=5), rng.normal(size=(5, 6)), layout)
        assert np.linalg.eigvalsh(0.5 * (H + H.T)).min() > -1e-10


def test_norm_derivatives_match_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = Norm(rng.choice([QUADRATIC, SMOOTH_ABS]), rng.uniform(0.05, 2.0))
        x = rng.uniform(-3, 3)
        _, d1, d2 = norm_eval(n, x)
        assert d1 == pytest.approx(central_diff(lambda y: norm_eval(n, y[0])[0], [x]).item(), rel=1e-4, abs=1e-8)
        assert d2 == pytest.approx(central_diff(lambda y: norm_eval(n, y[0])[1], [x]).item(), rel=1e-4, abs=1e-8)


def test_cost_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    spec = spec_from_terms("t", [("a", QUADRATIC, 0.1, 1.5), ("b", SMOOTH_ABS, 0.3, 0.7)])
    layout = ResidualLayout(spec, {"a": 2, "b": 3})
    for _ in range(100):
        A = rng.normal(size=(5, 4))
        c = rng.normal(size=5)
        z = rng.normal(size=4)
        g, _ = cost_derivatives(spec, A @ z + c, A, layout)
        fd = central_diff(lambda y: float(cost_eval(spec, A @ y + c, layout)), z)[0]
        np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-8)
