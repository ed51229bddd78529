"""Numerical evaluation of risk functionals, minimax bounds and tail inequalities.

Quantities depending on unknown absolute constants take those constants as
explicit arguments (default 1). Bounds that only hold under applicability
conditions return a :class:`Bound` whose ``value`` is ``None`` and whose
``reason`` says which condition failed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .model import ParameterError, ProblemInstance, make_problem
from .selector import Regime


@dataclass(frozen=True)
class MonteCarloConfig:
    trials: int = 20_000
    seed: int = 0
    antithetic: bool = True

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ParameterError("trials must be a positive integer")


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float


@dataclass(frozen=True)
class Bound:
    """A bound value, or ``None`` with the failing condition in ``reason``."""

    value: float | None
    reason: str | None = None
    constants: dict = field(default_factory=dict)

    @property
    def available(self):
        return self.value is not None

    @property
    def informative(self):
        return self.value is not None and self.value > 0

    def to_dict(self):
        return {"value": self.value, "reason": self.reason, "constants": dict(self.constants),
                "informative": self.informative}


def _check_psi_args(n, p, s, a, sigma):
    if n < 1 or p < 1 or s < 1:
        raise ParameterError("n, p and s must be positive")
    if not 2 * s < p:
        raise ParameterError("s ≥ p/2")
    if not a > 0 or not sigma > 0:
        raise ParameterError("a and sigma must be positive")


def _norm_zeta(n, mc):
    """Draws of ``||zeta||`` with ``||zeta||^2 ~ chi2(n)``, grouped for the standard error.

    With antithetic sampling every row holds a pair driven by ``U`` and
    ``1 - U``; otherwise rows hold single draws.
    """
    rng = np.random.default_rng(mc.seed)
    if not mc.antithetic:
        return np.sqrt(rng.chisquare(n, size=(mc.trials, 1)))
    m = (mc.trials + 1) // 2
    u = rng.random(m)
    sq = np.column_stack([stats.chi2.ppf(u, n), stats.chi2.isf(u, n)])
    return np.sqrt(sq)


def psi_integrand(u, p, s, a, sigma, clamp):
    """Expected Hamming loss of the oracle threshold rule given ``||zeta|| = u``.

    ``t(u) = a u / 2 + sigma^2 log(p/s - 1) / (a u)``; false positives
    contribute ``(p - s) P(sigma eps > t)`` and misses contribute
    ``s P(sigma eps >= a u - t)``, where ``clamp`` replaces ``a u - t`` by its
    positive part.
    """
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        t = a * u / 2.0 + sigma**2 * math.log(p / s - 1.0) / (a * u)
    gap = a * u - t
    if clamp:
        gap = np.maximum(gap, 0.0)
    return (p - s) * special.ndtr(-t / sigma) + s * special.ndtr(-gap / sigma)


def _psi(n, p, s, a, sigma, mc, clamp):
    _check_psi_args(n, p, s, a, sigma)
    mc = mc or MonteCarloConfig()
    vals = psi_integrand(_norm_zeta(n, mc), p, s, a, sigma, clamp).mean(axis=1)
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
    return Estimate(float(vals.mean()), se)


def psi_plus_mc(n, p, s, a, sigma, mc=None):
    """Monte Carlo estimate of the risk functional without positive-part clamp.

    Only ``||zeta||`` is sampled; the Gaussian tails given ``||zeta||`` are
    evaluated exactly.
    """
    return _psi(n, p, s, a, sigma, mc, clamp=False)


def psi_mc(n, p, s, a, sigma, mc=None):
    """As :func:`psi_plus_mc` with ``(a ||zeta|| - t)`` clamped at zero."""
    return _psi(n, p, s, a, sigma, mc, clamp=True)


def lower_bound_thm1(n, p, s, a, sigma, s_prime, mc=None):
    """``(s'/s) (psi_plus - 4 s exp(-(s - s')^2 / (2 s)))``; may be negative."""
    if not 0 < s_prime <= s:
        raise ParameterError("need 0 < s_prime <= s")
    pp = psi_plus_mc(n, p, s, a, sigma, mc).value
    return (s_prime / s) * (pp - 4.0 * s * math.exp(-((s - s_prime) ** 2) / (2.0 * s)))


def _cutoff(p, s, a, sigma):
    return 2.0 * sigma**2 * math.log(p / s - 1.0) / a**2


def lower_bound_prop3(n, p, s, a, sigma):
    """``(s/8)(1 - 16 exp(-s/8))`` when ``s >= 6`` and ``n`` is below the cutoff."""
    if s < 6:
        return Bound(None, "condition s ≥ 6 fails")
    if not 2 * s < p:
        return Bound(None, "s ≥ p/2")
    if n > _cutoff(p, s, a, sigma):
        return Bound(None, "condition n ≤ 2σ²log(p/s−1)/a² fails")
    return Bound(s / 8.0 * (1.0 - 16.0 * math.exp(-s / 8.0)))


def lower_bound_thm3(n, p, s, a, sigma, c=1.0):
    """Exponential lower bound above the cutoff, for weak signals.

    ``c sqrt(s^(7/4) (p-s)^(1/4) / (n L)) exp(-n L / 2) - 2 s exp(-s/8)`` with
    ``L = log(1 + a^2 / (4 sigma^2))``. ``c`` is an unknown absolute constant
    so the value is only meaningful up to scale.
    """
    consts = {"c": c}
    if not 2 * s < p:
        return Bound(None, "s ≥ p/2", consts)
    if not a < math.sqrt(2.0) * sigma:
        return Bound(None, "condition a < √2σ fails", consts)
    if not n > _cutoff(p, s, a, sigma):
        return Bound(None, "condition n > 2σ²log(p/s−1)/a² fails", consts)
    L = math.log1p(a**2 / (4.0 * sigma**2))
    lead = c * math.sqrt(s**1.75 * (p - s) ** 0.25 / (n * L)) * math.exp(-n * L / 2.0)
    return Bound(lead - 2.0 * s * math.exp(-s / 8.0), None, consts)


def _c1_term(C1, C2, s, p, extra_log=0.0):
    # C1 (s / 2p)^(C2 s) * exp(extra_log), in log space to avoid underflow
    return C1 * math.exp(C2 * s * math.log(s / (2.0 * p)) + extra_log)


def upper_bound_thm2(n1, n2, p, s, a, sigma, delta=1.0, C1=1.0, C2=1.0, mc=None):
    """Hamming and probability bounds for the known-parameters selector.

    Returns ``(2 psi + C1 (s/2)^(C2 s) p^(1 - C2 s), 2 psi + C1 (s/2)^(C2 s) p^(-C2 s))``
    with ``psi`` evaluated at the inflated scale ``sigma sqrt(1 + delta^2)``.
    """
    if not 0 < delta <= 1:
        raise ParameterError("delta must lie in (0, 1]")
    psi = psi_mc(n2, p, s, a, sigma * math.sqrt(1.0 + delta**2), mc).value
    prob_tail = _c1_term(C1, C2, s, p)
    return 2.0 * psi + p * prob_tail, 2.0 * psi + prob_tail


def upper_bound_thm4(n1, n2, p, s, a, sigma, delta=1.0, C1=1.0, C2=1.0):
    """Closed-form Hamming and probability bounds for weak signals.

    ``2 sqrt(s(p-s)) exp(-(n2/2) log(1 + a^2/(4 sigma^2 (1+delta^2)))) + s exp(-n2/24)``
    plus ``C1 p (s/2p)^(C2 s)`` (Hamming) or ``C1 (s/2p)^(C2 s)`` (probability).
    """
    consts = {"C1": C1, "C2": C2, "delta": delta}
    if not 2 * s <= p:
        return Bound(None, "s > p/2", consts), Bound(None, "s > p/2", consts)
    reason = None
    if a > sigma:
        reason = "condition a ≤ σ fails"
    elif n2 < 4.0 * sigma**2 * math.log(p / s - 1.0) / a**2:
        reason = "condition n2 ≥ 4σ²log(p/s−1)/a² fails"
    if reason:
        return Bound(None, reason, consts), Bound(None, reason, consts)
    L = math.log1p(a**2 / (4.0 * sigma**2 * (1.0 + delta**2)))
    head = 2.0 * math.sqrt(s * (p - s)) * math.exp(-n2 * L / 2.0) + s * math.exp(-n2 / 24.0)
    tail = _c1_term(C1, C2, s, p)
    return Bound(head + p * tail, None, consts), Bound(head + tail, None, consts)


def upper_bound_cor2(n2, p, s, B, C1=1.0, C2=1.0):
    """``3 (s(p-s))^((1-B)/2) + C1 (s/2p)^(C2 s)``.

    The signal and sample-size conditions are the caller's responsibility.
    """
    if not B > 1:
        raise ParameterError("B must exceed 1")
    return 3.0 * (s * (p - s)) ** ((1.0 - B) / 2.0) + _c1_term(C1, C2, s, p)


def ml_decoder_bound(p, s, B_star):
    """``s ((e s (p-s))^(-B*) + (s / (e (p-s)))^(B* s))`` for a caller-chosen ``B*``."""
    if not B_star > 0:
        raise ParameterError("B_star must be positive")
    return s * ((math.e * s * (p - s)) ** (-B_star) + (s / (math.e * (p - s))) ** (B_star * s))


def student_tail_envelope(k, b):
    """``(1 + b^2)^(-(k-1)/2) / (sqrt(k) b)``, valid for ``b >= 1/sqrt(k)``."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    if b * math.sqrt(k) < 1.0 - 1e-12:
        raise ParameterError(f"b={b} is below 1/sqrt(k)={1 / math.sqrt(k)}")
    return math.exp(-(k - 1) / 2.0 * math.log1p(b * b)) / (math.sqrt(k) * b)


def student_tail_mc(k, b, samples=1_000_000, seed=0):
    """Monte Carlo estimate of ``P(|T_k| >= sqrt(k) b)``.

    Writing ``T_k = sqrt(k) N / sqrt(W)`` with ``W ~ chi2(k)``, the event is
    ``|N| >= b sqrt(W)``. ``W`` is drawn from ``Gamma(k/2, 2/(1+b^2))`` and
    reweighted by the likelihood ratio; the Gaussian tail given ``W`` is exact.
    This keeps the relative error small even when the tail is ``1e-30``.
    """
    if k < 1 or not b > 0:
        raise ParameterError("need k >= 1 and b > 0")
    rng = np.random.default_rng(seed)
    w = rng.gamma(k / 2.0, 2.0 / (1.0 + b * b), size=samples)
    logw = -(k / 2.0) * math.log1p(b * b) + b * b * w / 2.0
    vals = np.exp(logw + math.log(2.0) + special.log_ndtr(-b * np.sqrt(w)))
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)))


def chi2_tail_bound(N, t):
    """``2 exp(-t^2 N / (4 (1 + t)))`` bounding ``P(|chi2(N)/N - 1| >= t)``."""
    if N < 1 or not t > 0:
        raise ParameterError("need N >= 1 and t > 0")
    return 2.0 * math.exp(-t * t * N / (4.0 * (1.0 + t)))


def chi2_tail_mc(N, t, samples=100_000, seed=0):
    """Empirical frequency of ``|chi2(N)/N - 1| >= t``."""
    x = np.random.default_rng(seed).chisquare(N, size=samples) / N
    freq = float(np.mean(np.abs(x - 1.0) >= t))
    return Estimate(freq, math.sqrt(freq * (1.0 - freq) / samples))


SUBGAUSSIAN = "SubGaussian"
DEFAULT_CONSTANTS = {"C0": 1.0, "C": 1.0, "B": 1.0, "delta": 1.0}


def sufficient_n(p, s, a, sigma, regime, constants=None):
    """Sufficient ``(n1, n2)`` for exact recovery under ``regime``.

    ``constants`` may set ``C0`` (pilot), ``C`` (sub-Gaussian), ``B`` and
    ``delta`` (known-parameters regime); missing keys default to 1. Regimes
    other than ``KnownAll`` split the sample in half. Values are real
    numbers; round up to obtain sample sizes.
    """
    k = {**DEFAULT_CONSTANTS, **(constants or {})}
    if regime != SUBGAUSSIAN:
        regime = Regime(regime)
    pilot = s * math.log(math.e * p / s)
    r2 = a**2 / sigma**2
    if regime is Regime.KNOWN_ALL:
        d2 = k["delta"] ** 2
        n1 = k["C0"] / d2 * pilot
        n2 = max(4.0 / r2 * math.log(p / s - 1.0),
                 k["B"] * (math.log(p - s) + math.log(s)) / math.log1p(r2 / (4.0 * (1.0 + d2))))
        return n1, n2
    if regime is Regime.KNOWN_A:
        n = 2.0 * max(k["C0"] * pilot, 2.0 * math.log(p) / math.log1p(r2 / 8.0) + 1.0)
    elif regime is Regime.KNOWN_SIGMA:
        n = 2.0 * max(k["C0"] * pilot, 2.0 * math.log(p) / math.log1p(r2 / 8.0))
    elif regime is Regime.FULLY_ADAPTIVE:
        n = 2.0 * max(k["C0"] * pilot, 2.0 * math.log(p) / math.log1p(r2 / 16.0))
    elif regime == SUBGAUSSIAN:
        n = k["C"] * max(pilot, math.log(p) / r2)
    else:  # pragma: no cover
        raise ParameterError(f"unknown regime {regime!r}")
    return n / 2.0, n / 2.0


@dataclass(frozen=True)
class PhaseRow:
    """Row of the sample-size phase table; ``upper``/``lower`` map ``p`` to a size."""

    row: int
    label: str
    upper: object
    lower: object


def phase_table_regime(a, sigma, s):
    """Classify the signal-to-noise ratio and return the row's sample-size orders.

    Row 1 when ``a/sigma <= 1/sqrt(s)``, row 3 when ``a/sigma >= 1``, row 2
    in between. Both closures take ``p`` and return an order of magnitude.
    """
    if not (a > 0 and sigma > 0 and s > 0):
        raise ParameterError("a, sigma and s must be positive")
    r = a / sigma
    r2 = r * r
    if r <= 1.0 / math.sqrt(s):
        f = lambda p: sigma**2 * math.log(p - s) / a**2  # noqa: E731
        return PhaseRow(1, "a/sigma = O(1/sqrt(s))", f, f)
    if r < 1.0:
        g = lambda p: max(s * math.log(p / s) / math.log1p(s * r2),  # noqa: E731
                          math.log(p - s) / math.log1p(r2))
        return PhaseRow(2, "a/sigma between 1/sqrt(s) and 1", g, g)
    return PhaseRow(3, "a/sigma = Omega(1)",
                    lambda p: s * math.log(p / s),
                    lambda p: s * math.log(p / s) / math.log1p(s * r2))


@dataclass(frozen=True)
class BoundsReport:
    psi_plus: Estimate | None
    psi: Estimate | None
    lower_thm1: Bound
    lower_prop3: Bound
    lower_thm3: Bound
    upper_thm2: Bound
    upper_thm4: Bound
    upper_cor2: Bound
    parameters: ProblemInstance
    constants: dict

    def to_dict(self):
        def est(e, why):
            return {"value": None, "se": None, "reason": why} if e is None else \
                {"value": e.value, "se": e.se, "reason": None}
        why = None if self.psi is not None else "s ≥ p/2"
        return {
            "psi_plus": est(self.psi_plus, why),
            "psi": est(self.psi, why),
            **{name: getattr(self, name).to_dict() for name in (
                "lower_thm1", "lower_prop3", "lower_thm3", "upper_thm2", "upper_thm4",
                "upper_cor2")},
            "parameters": self.parameters.to_dict(),
            "constants": dict(self.constants),
        }


def bounds_report(problem, mc=None, s_prime=None, delta=1.0, C1=1.0, C2=1.0, B=2.0, c=1.0):
    """Evaluate every bound at ``problem``; inapplicable ones carry a reason."""
    if isinstance(problem, dict):
        problem = make_problem(**problem)
    n, p, s, a, sigma = problem.n, problem.p, problem.s, problem.a, problem.sigma
    n1, n2 = problem.n1, problem.n2
    s_prime = s_prime if s_prime is not None else max(1, s // 2)
    consts = {"C1": C1, "C2": C2, "delta": delta, "s_prime": s_prime, "c": c, "B": B,
              "mc_trials": (mc or MonteCarloConfig()).trials, "mc_seed": (mc or MonteCarloConfig()).seed}
    if 2 * s < p and sigma > 0:
        pp, ps = psi_plus_mc(n, p, s, a, sigma, mc), psi_mc(n, p, s, a, sigma, mc)
        thm1 = Bound(lower_bound_thm1(n, p, s, a, sigma, s_prime, mc), None, {"s_prime": s_prime})
        h2, _ = upper_bound_thm2(n1, n2, p, s, a, sigma, delta, C1, C2, mc)
        thm2 = Bound(h2, None, {"C1": C1, "C2": C2, "delta": delta})
    else:
        why = "s ≥ p/2" if 2 * s >= p else "sigma must be positive"
        pp = ps = None
        thm1 = Bound(None, why)
        thm2 = Bound(None, why)
    if sigma > 0:
        prop3 = lower_bound_prop3(n, p, s, a, sigma)
        thm3 = lower_bound_thm3(n, p, s, a, sigma, c)
        thm4 = upper_bound_thm4(n1, n2, p, s, a, sigma, delta, C1, C2)[0]
    else:
        prop3 = thm3 = thm4 = Bound(None, "sigma must be positive")
    if s < p:
        cor2 = Bound(upper_bound_cor2(n2, p, s, B, C1, C2), None, {"B": B, "C1": C1, "C2": C2})
    else:
        cor2 = Bound(None, "s ≥ p")
    return BoundsReport(pp, ps, thm1, prop3, thm3, thm2, thm4, cor2, problem, consts)
