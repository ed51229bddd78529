import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (psi_quadrature, student_tail_exact, weak_signal_lower_formula,
                     weak_signal_upper_formula)
from sparse_recover.bounds import (MonteCarloConfig, bounds_report, chi2_tail_bound, chi2_tail_mc,
                                   lower_bound_prop3, lower_bound_thm1, lower_bound_thm3,
                                   ml_decoder_bound, phase_table_regime, psi_mc, psi_plus_mc,
                                   student_tail_envelope, student_tail_mc, sufficient_n,
                                   upper_bound_cor2, upper_bound_thm2, upper_bound_thm4)
from sparse_recover.model import ParameterError, make_problem

MC = MonteCarloConfig(trials=20_000, seed=11)


@pytest.mark.parametrize("clamp, fn", [(False, psi_plus_mc), (True, psi_mc)])
@pytest.mark.parametrize("n, p, s, a, sigma", [
    (50, 100, 10, 1.0, 1.0),
    (5, 100, 10, 1.0, 1.0),
    (20, 1000, 10, 0.5, 1.0),
    (3, 40, 5, 0.3, 2.0),
])
def test_psi_agrees_with_quadrature(clamp, fn, n, p, s, a, sigma):
    est = fn(n, p, s, a, sigma, MC)
    ref, tail = psi_quadrature(n, p, s, a, sigma, clamp)
    assert abs(est.value - ref) <= 3 * est.se + tail + 1e-12


def test_psi_large_signal_vanishes_and_is_bounded():
    assert psi_plus_mc(100, 50, 5, 1e6, 1.0, MC).value < 1e-12
    v = psi_plus_mc(1, 50, 5, 1e-6, 1.0, MC).value
    assert 0 <= v <= 50


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 80), st.integers(3, 400), st.floats(0.05, 4), st.floats(0.2, 3), st.data())
def test_psi_below_psi_plus(n, p, a, sigma, data):
    s = data.draw(st.integers(1, (p - 1) // 2))
    mc = MonteCarloConfig(trials=2000, seed=1)
    lo, hi = psi_mc(n, p, s, a, sigma, mc), psi_plus_mc(n, p, s, a, sigma, mc)
    assert lo.value <= hi.value + 3 * math.hypot(lo.se, hi.se) + 1e-12
    assert 0 <= lo.value <= p


def test_antithetic_reduces_error():
    plain = psi_plus_mc(30, 200, 10, 0.8, 1.0, MonteCarloConfig(20_000, 3, antithetic=False))
    anti = psi_plus_mc(30, 200, 10, 0.8, 1.0, MonteCarloConfig(20_000, 3, antithetic=True))
    assert anti.se < plain.se


def test_psi_rejects_dense_support():
    with pytest.raises(ParameterError, match="p/2"):
        psi_mc(10, 10, 5, 1.0, 1.0)


def test_monte_carlo_config_validation():
    with pytest.raises(ParameterError):
        MonteCarloConfig(trials=0)


def test_averaged_lower_bound_substitutions():
    pp = psi_plus_mc(40, 200, 8, 0.7, 1.0, MC).value
    assert lower_bound_thm1(40, 200, 8, 0.7, 1.0, 8, MC) == pytest.approx(pp - 32.0)
    assert lower_bound_thm1(40, 200, 8, 0.7, 1.0, 4, MC) == pytest.approx(0.5 * (pp - 32 * math.exp(-1.0)))
    assert lower_bound_thm1(100, 200, 8, 50.0, 1.0, 4, MC) < 0
    with pytest.raises(ParameterError):
        lower_bound_thm1(40, 200, 8, 0.7, 1.0, 9, MC)


@pytest.mark.parametrize("s, expected", [(16, 2 * (1 - 16 * math.exp(-2))), (80, 10 * (1 - 16 * math.exp(-10)))])
def test_small_sample_lower_bound_values(s, expected):
    b = lower_bound_prop3(4, 1000, s, 1.0, 1.0)
    assert b.value == pytest.approx(expected, rel=1e-12)
    assert b.informative is (expected > 0)


def test_small_sample_lower_bound_numeric():
    assert lower_bound_prop3(4, 1000, 16, 1.0, 1.0).value == pytest.approx(-2.33, abs=0.01)
    # 10 (1 - 16 e^-10) = 10 - 0.00726...
    assert lower_bound_prop3(4, 1000, 80, 1.0, 1.0).value == pytest.approx(9.99274, abs=1e-5)


@pytest.mark.parametrize("n, s, why", [(1000, 16, "n ≤"), (4, 5, "s ≥ 6")])
def test_small_sample_lower_bound_inapplicable(n, s, why):
    b = lower_bound_prop3(n, 1000, s, 1.0, 1.0)
    assert b.value is None and why in b.reason


def test_weak_signal_lower_bound_matches_formula():
    b = lower_bound_thm3(200, 1000, 10, 0.5, 1.0, c=1.0)
    assert b.value == pytest.approx(weak_signal_lower_formula(200, 1000, 10, 0.5, 1.0, 1.0), rel=1e-12)
    assert b.constants == {"c": 1.0}


def test_weak_signal_lower_bound_applicability_and_monotonicity():
    assert "√2σ" in lower_bound_thm3(200, 1000, 10, 1.5, 1.0).reason
    assert lower_bound_thm3(10, 1000, 10, 0.5, 1.0).value is None
    vals = [lower_bound_thm3(n, 1000, 10, 0.5, 1.0, c=1e6).value for n in (40, 60, 100, 200)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_psi_based_upper_bounds():
    h, pr = upper_bound_thm2(100, 100, 300, 5, 1.0, 1.0, delta=1.0, C1=1.0, C2=1.0, mc=MC)
    psi = psi_mc(100, 300, 5, 1.0, math.sqrt(2.0), MC).value
    assert h == pytest.approx(2 * psi + 300 * (5 / 600) ** 5, rel=1e-12)
    assert pr == pytest.approx(2 * psi + (5 / 600) ** 5, rel=1e-12)
    assert pr <= h
    h_big, _ = upper_bound_thm2(100, 100, 300, 5, 1.0, 1.0, C2=20.0, mc=MC)
    assert h_big == pytest.approx(2 * psi, rel=1e-12)


def test_weak_signal_upper_bound_matches_formula():
    h, p_ = upper_bound_thm4(2000, 2000, 1000, 10, 0.5, 1.0, 1.0, 1.0, 1.0)
    eh, ep = weak_signal_upper_formula(2000, 1000, 10, 0.5, 1.0, 1.0, 1.0, 1.0)
    assert h.value == pytest.approx(eh, rel=1e-12)
    assert p_.value == pytest.approx(ep, rel=1e-12)


def test_weak_signal_upper_bound_monotone_limit_and_applicability():
    vals = [upper_bound_thm4(n, n, 1000, 10, 0.5, 1.0)[0].value for n in (200, 500, 1000, 5000, 100_000)]
    assert all(x >= y for x, y in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(1000 * (10 / 2000) ** 10, rel=1e-9)
    assert upper_bound_thm4(2000, 2000, 1000, 10, 1.5, 1.0)[0].value is None
    assert "n2" in upper_bound_thm4(10, 10, 1000, 10, 0.5, 1.0)[0].reason


@pytest.mark.parametrize("n2", [200, 400, 800])
def test_weak_signal_upper_bound_dominates_twice_psi(n2):
    h = upper_bound_thm4(n2, n2, 1000, 10, 0.5, 1.0, delta=1.0)[0].value
    est = psi_mc(n2, 1000, 10, 0.5, math.sqrt(2.0), MC)
    assert h >= 2 * (est.value - 3 * est.se)


def test_polynomial_upper_bound_values():
    assert upper_bound_cor2(100, 1000, 10, 3.0) == pytest.approx(3 / 9900 + 0.005**10, rel=1e-12)
    with pytest.raises(ParameterError):
        upper_bound_cor2(100, 1000, 10, 1.0)
    assert upper_bound_cor2(100, 1000, 10, 4.0) < upper_bound_cor2(100, 1000, 10, 3.0)


def test_ml_decoder_bound():
    s, p, B = 5, 100, 1.0
    expected = s * ((math.e * s * (p - s)) ** -B + (s / (math.e * (p - s))) ** (B * s))
    assert ml_decoder_bound(p, s, B) == pytest.approx(expected)


def test_student_envelope_values():
    assert student_tail_envelope(5, 1.0) == pytest.approx(0.25 / math.sqrt(5), rel=1e-14)
    k = 20
    assert student_tail_envelope(k, 1 / math.sqrt(k)) == pytest.approx((1 + 1 / k) ** (-(k - 1) / 2))
    with pytest.raises(ParameterError):
        student_tail_envelope(20, 0.1)


@pytest.mark.parametrize("k, b", [(5, 1.0), (20, 2.0), (100, 3.0), (100, 0.1)])
def test_student_tail_mc_matches_exact(k, b):
    est = student_tail_mc(k, b, samples=200_000, seed=2)
    assert abs(est.value - student_tail_exact(k, b)) <= 4 * est.se


def test_chi2_tail_bound_values():
    assert chi2_tail_bound(24, 0.5) == pytest.approx(2 * math.exp(-1), rel=1e-14)
    assert chi2_tail_bound(10, 1e-9) == pytest.approx(2.0)


@pytest.mark.parametrize("N, t", [(5, 0.3), (50, 0.2), (200, 0.5)])
def test_chi2_tail_mc_below_bound(N, t):
    assert chi2_tail_mc(N, t, 50_000, seed=N).value <= chi2_tail_bound(N, t)


def test_sufficient_n_known_a_formula():
    p, s, a, sigma = 1000, 10, 1.0, 1.0
    n1, n2 = sufficient_n(p, s, a, sigma, "KnownA", {"C0": 1.0})
    expected = 2 * max(s * math.log(math.e * p / s), 2 * math.log(p) / math.log(1 + a * a / 8) + 1)
    assert n1 + n2 == pytest.approx(expected, rel=1e-12)


def test_sufficient_n_known_sigma_value():
    n1, n2 = sufficient_n(1000, 10, 1.0, 1.0, "KnownSigma", {"C0": 1.0})
    # 2 log(1000) / log(9/8) = 117.296... dominates 10 log(100 e) = 56.05...
    assert n1 == n2 == pytest.approx(2 * math.log(1000) / math.log(1.125), rel=1e-12)


def test_sufficient_n_other_regimes():
    n1, n2 = sufficient_n(1000, 10, 1.0, 1.0, "FullyAdaptive")
    assert n1 + n2 == pytest.approx(4 * math.log(1000) / math.log(1 + 1 / 16))
    n1, n2 = sufficient_n(1000, 10, 1.0, 1.0, "KnownAll", {"C0": 2.0, "B": 1.5, "delta": 0.5})
    assert n1 == pytest.approx(2.0 / 0.25 * 10 * math.log(100 * math.e))
    assert n2 == pytest.approx(max(4 * math.log(99), 1.5 * math.log(990 * 10) / math.log(1 + 1 / 5)))
    n1, n2 = sufficient_n(1000, 10, 0.1, 1.0, "SubGaussian", {"C": 3.0})
    assert n1 + n2 == pytest.approx(3.0 * math.log(1000) / 0.01)


def test_sufficient_n_large_signal_uses_pilot_branch():
    n1, n2 = sufficient_n(1000, 10, 1e3, 1.0, "KnownSigma")
    assert n1 + n2 == pytest.approx(2 * 10 * math.log(100 * math.e))


@pytest.mark.parametrize("a, sigma, s, row", [(0.01, 1.0, 100, 1), (0.5, 1.0, 100, 2), (10.0, 1.0, 100, 3),
                                              (0.1, 1.0, 100, 1), (1.0, 1.0, 4, 3)])
def test_phase_table_rows(a, sigma, s, row):
    assert phase_table_regime(a, sigma, s).row == row


def test_phase_table_formulas():
    r1 = phase_table_regime(0.01, 1.0, 100)
    assert r1.upper(1000) == pytest.approx(math.log(900) / 1e-4)
    r2 = phase_table_regime(0.5, 1.0, 100)
    assert r2.upper(1000) == pytest.approx(max(100 * math.log(10) / math.log(26), math.log(900) / math.log(1.25)))
    r3 = phase_table_regime(10.0, 1.0, 100)
    assert r3.upper(1000) == pytest.approx(100 * math.log(10))
    assert r3.lower(1000) == pytest.approx(100 * math.log(10) / math.log(1 + 100 * 100))


def test_bounds_report_serialises_reasons():
    rep = bounds_report(make_problem(200, 1000, 10, 0.5, 1.0), MonteCarloConfig(2000, 0)).to_dict()
    assert rep["psi"]["value"] <= rep["psi_plus"]["value"] + 3 * math.hypot(rep["psi"]["se"], rep["psi_plus"]["se"])
    assert rep["lower_prop3"]["value"] is None and rep["lower_prop3"]["reason"]
    assert rep["parameters"]["p"] == 1000 and rep["constants"]["C1"] == 1.0
    dense = bounds_report(make_problem(200, 10, 6, 0.5, 1.0), MonteCarloConfig(2000, 0)).to_dict()
    assert dense["psi"]["reason"] == "s ≥ p/2"
    assert np.isfinite(dense["upper_cor2"]["value"])
