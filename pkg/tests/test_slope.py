import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import prox_brute_force, prox_objective, sorted_l1_naive
from sparse_recover.model import ParameterError
from sparse_recover.slope import (A_PRACTICAL, A_THEORY, LambdaWeights, SolverConfig, SqrtSlope,
                                  lambda_weights, power_iteration, prox_sorted_l1, slope_solve,
                                  sorted_l1_norm, sqrt_slope_objective, sqrt_slope_solve)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def _lam(draw_vals):
    return np.sort(np.abs(np.asarray(draw_vals, dtype=float)))[::-1]


def test_lambda_weights_values():
    lam = lambda_weights(4, 9, A=3.0)
    expected = 3.0 * np.sqrt(np.log(8.0 / np.arange(1, 5)) / 9)
    np.testing.assert_allclose(lam.weights, expected, rtol=1e-15)
    assert len(lam) == 4 and lam.weights[-1] > 0


def test_lambda_weights_rejects_increasing():
    with pytest.raises(ParameterError):
        LambdaWeights([1.0, 2.0], 1.0)
    with pytest.raises(ParameterError):
        lambda_weights(3, 0)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(1, 6), elements=finite), st.data())
def test_sorted_norm_matches_permutation_max(x, data):
    lam = _lam(data.draw(arrays(float, x.shape, elements=st.floats(0, 5))))
    assert sorted_l1_norm(x, lam) == pytest.approx(sorted_l1_naive(x, lam), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("v, lam, scale, expected", [
    ([3.0, -1.0], [1.0, 1.0], 1.0, [2.0, 0.0]),          # soft threshold when weights are equal
    ([2.0, 2.0], [1.5, 0.5], 1.0, [1.0, 1.0]),           # tie pooled at mean shrinkage
    ([0.1, -0.2, 0.05], [1.0, 0.5, 0.1], 1.0, [0.0, 0.0, 0.0]),
    ([4.0, 1.0], [2.0, 1.0], 0.5, [3.0, 0.5]),
])
def test_prox_hand_examples(v, lam, scale, expected):
    np.testing.assert_allclose(prox_sorted_l1(np.array(v), np.array(lam), scale), expected, atol=1e-14)


@pytest.mark.parametrize("seed", range(25))
def test_prox_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 6))
    v = rng.normal(scale=2.0, size=p)
    lam = np.sort(rng.uniform(0, 1.5, p))[::-1]
    scale = rng.uniform(0.1, 2.0)
    x = prox_sorted_l1(v, lam, scale)
    _, f_oracle = prox_brute_force(v, lam, scale)
    assert prox_objective(x, v, lam, scale) <= f_oracle + 1e-9


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(1, 40), elements=finite), st.data())
def test_prox_properties(v, data):
    lam = _lam(data.draw(arrays(float, v.shape, elements=st.floats(0, 10))))
    x = prox_sorted_l1(v, lam)
    # sign preservation, shrinkage, order preservation of magnitudes
    assert np.all(x * v >= 0)
    assert np.all(np.abs(x) <= np.abs(v) + 1e-12)
    order = np.argsort(-np.abs(v), kind="stable")
    assert np.all(np.diff(np.abs(x)[order]) <= 1e-12)
    # first-order optimality: x minimises the prox objective against random perturbations
    rng = np.random.default_rng(0)
    f0 = prox_objective(x, v, lam, 1.0)
    for _ in range(5):
        d = rng.normal(size=v.size) * 1e-3
        assert prox_objective(x + d, v, lam, 1.0) >= f0 - 1e-9


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.integers(1, 20), elements=finite), arrays(float, st.integers(1, 20), elements=finite))
def test_prox_is_firmly_nonexpansive(v, w):
    m = min(v.size, w.size)
    v, w = v[:m], w[:m]
    lam = np.linspace(2.0, 0.1, m)
    dx = prox_sorted_l1(v, lam) - prox_sorted_l1(w, lam)
    assert dx @ dx <= dx @ (v - w) + 1e-9


def test_prox_zero_weights_is_identity():
    v = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(prox_sorted_l1(v, np.zeros(3)), v)


def test_power_iteration_top_eigenvalue():
    X = np.random.default_rng(1).normal(size=(60, 8))
    assert power_iteration(X, 200) == pytest.approx(np.linalg.eigvalsh(X.T @ X)[-1], rel=1e-6)


def _problem(n=120, p=30, s=3, sigma=0.5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[:s] = 2.0
    return X, X @ beta + sigma * rng.normal(size=n), beta


@pytest.mark.parametrize("step_rule", ["fixed", "backtracking"])
def test_slope_solve_matches_generic_optimizer(step_rule):
    cvxpy = pytest.importorskip("cvxpy")
    X, Y, _ = _problem()
    lam = lambda_weights(30, 120, A_PRACTICAL).weights
    res = slope_solve(X, Y, lam, 0.7, SolverConfig(step_rule=step_rule, tolerance=1e-12))
    b = cvxpy.Variable(30)
    dl = 0.7 * (lam - np.append(lam[1:], 0.0))
    pen = sum(dl[k] * cvxpy.sum_largest(cvxpy.abs(b), k + 1) for k in range(30))
    cvxpy.Problem(cvxpy.Minimize(cvxpy.sum_squares(Y - X @ b) / 240 + pen)).solve()
    ref = np.sum((Y - X @ b.value) ** 2) / 240 + 0.7 * sorted_l1_norm(b.value, lam)
    assert res.converged
    assert res.objective <= ref + 1e-7
    # the generic solver stops at a looser tolerance, so coefficients agree less tightly
    np.testing.assert_allclose(res.coef, b.value, atol=1e-3)


def test_sqrt_slope_matches_generic_optimizer():
    cvxpy = pytest.importorskip("cvxpy")
    X, Y, _ = _problem(seed=4)
    lam = lambda_weights(30, 120, A_PRACTICAL)
    res = sqrt_slope_solve(X, Y, lam, SolverConfig(tolerance=1e-12))
    w = lam.weights
    b = cvxpy.Variable(30)
    dl = w - np.append(w[1:], 0.0)
    pen = sum(dl[k] * cvxpy.sum_largest(cvxpy.abs(b), k + 1) for k in range(30))
    cvxpy.Problem(cvxpy.Minimize(cvxpy.norm(Y - X @ b) / np.sqrt(120) + 2 * pen)).solve()
    ref = sqrt_slope_objective(X, Y, b.value, w)
    assert res.objective <= ref + 1e-7
    assert res.objective >= ref - 1e-5


def test_sqrt_slope_trace_is_monotone():
    X, Y, _ = _problem(seed=2)
    res = sqrt_slope_solve(X, Y, lambda_weights(30, 120, A_PRACTICAL))
    assert np.all(np.diff(res.objective_trace) <= 1e-12)
    assert res.objective == pytest.approx(min(res.objective_trace))


def test_sqrt_slope_noiseless_exits_at_floor():
    X, _, beta = _problem(n=200, sigma=0.0)
    Y = X @ beta
    res = sqrt_slope_solve(X, Y, lambda_weights(30, 200, A=0.01))
    assert res.converged
    assert np.linalg.norm(res.coef - beta) < 0.05


def test_pilot_error_scales_with_noise():
    X, Y, beta = _problem(n=300, p=100, s=4, sigma=1.0, seed=7)
    est = SqrtSlope(A=A_PRACTICAL).fit(X, Y)
    assert np.linalg.norm(est.coef_ - beta) < 1.0
    assert est.sigma_ == pytest.approx(np.linalg.norm(Y - X @ est.coef_) / np.sqrt(300))
    np.testing.assert_allclose(est.predict(X[:3]), X[:3] @ est.coef_)
    assert est.get_params()["A"] == A_PRACTICAL


def test_theoretical_constant_is_default_and_conservative():
    X, Y, _ = _problem(n=300, p=100, s=4, sigma=1.0, seed=7)
    est = SqrtSlope().fit(X, Y)
    assert est.get_params()["A"] == A_THEORY
    # the guaranteed constant shrinks everything to zero at this sample size
    assert np.count_nonzero(est.coef_) == 0


def test_solver_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(step_rule="newton")
    with pytest.raises(ParameterError):
        SolverConfig(max_iterations=0)
