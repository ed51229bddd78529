"""Two-step selector: square-root SLOPE pilot, debiased statistics, thresholding."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .model import Dataset, ParameterError, SplitScheme, split_sample
from .slope import A_THEORY, SolverConfig, lambda_weights, sqrt_slope_solve


class Regime(str, Enum):
    """Which of ``a``, ``sigma`` and ``s`` the threshold may use."""

    KNOWN_ALL = "KnownAll"
    KNOWN_A = "KnownA"
    KNOWN_SIGMA = "KnownSigma"
    FULLY_ADAPTIVE = "FullyAdaptive"


@dataclass(frozen=True)
class DebiasedStats:
    alpha: np.ndarray
    column_norms: np.ndarray


@dataclass(frozen=True)
class ThresholdSpec:
    """Threshold regime and the parameters it is allowed to see.

    ``delta`` inflates the noise variance of the known-parameters threshold
    by ``1 + delta**2`` to absorb the pilot error; ``delta = 0`` gives the
    bare prototype.
    """

    regime: Regime
    p: int
    n2: int
    a: float | None = None
    sigma: float | None = None
    s: int | None = None
    delta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.p < 1 or self.n2 < 1:
            raise ParameterError("p and n2 must be positive")
        if not 0 <= self.delta <= 1:
            raise ParameterError(f"delta must lie in [0, 1], got {self.delta}")
        need = {
            Regime.KNOWN_ALL: ("a", "sigma", "s"),
            Regime.KNOWN_A: ("a",),
            Regime.KNOWN_SIGMA: ("sigma",),
            Regime.FULLY_ADAPTIVE: (),
        }[self.regime]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ParameterError(f"regime {self.regime.value} requires {', '.join(missing)}")
        if self.a is not None and not self.a > 0:
            raise ParameterError("a must be positive")
        if self.sigma is not None and self.sigma < 0:
            raise ParameterError("sigma must be non-negative")
        if self.regime is Regime.KNOWN_ALL and 2 * self.s > self.p:
            raise ParameterError(
                f"regime KnownAll requires s <= p/2 (got s={self.s}, p={self.p})")


def debiased_stats(X2, Y2, beta_hat):
    """``alpha_i = X_i^T (Y2 - sum_{j != i} X_j b_j) / ||X_i||`` for every column.

    Uses one residual ``R = Y2 - X2 b`` so that
    ``alpha_i = X_i^T (R + X_i b_i) / ||X_i||``.
    """
    X2 = np.asarray(X2, dtype=float)
    Y2 = np.asarray(Y2, dtype=float)
    beta_hat = np.asarray(beta_hat, dtype=float)
    norms = np.linalg.norm(X2, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ParameterError(f"column {int(zero[0])} of the second subsample is identically zero")
    resid = Y2 - X2 @ beta_hat
    alpha = (X2.T @ resid + norms**2 * beta_hat) / norms
    return DebiasedStats(alpha, norms)


def threshold_known(spec, norm_u):
    """``a u / 2 + sigma^2 (1 + delta^2) log(p/s - 1) / (a u)``."""
    if spec.regime is not Regime.KNOWN_ALL:
        raise ParameterError("threshold_known needs regime KnownAll")
    if 2 * spec.s > spec.p:
        raise ParameterError("threshold_known needs s <= p/2")
    u = np.asarray(norm_u, dtype=float)
    var = spec.sigma**2 * (1.0 + spec.delta**2)
    return spec.a * u / 2.0 + var * np.log(spec.p / spec.s - 1.0) / (spec.a * u)


def threshold_known_a(spec, norm_u):
    return spec.a * np.asarray(norm_u, dtype=float) / 2.0


def _adaptive_factor(p, n2):
    # sqrt(2 (p^(2/n2) - 1)); expm1 keeps precision when p^(2/n2) is close to 1
    return np.sqrt(2.0 * np.expm1(2.0 * np.log(p) / n2))


def threshold_known_sigma(spec, norm_u):
    """``sigma * sqrt(2 (p^(2/n2) - 1)) * u``."""
    return spec.sigma * _adaptive_factor(spec.p, spec.n2) * np.asarray(norm_u, dtype=float)


def threshold_fully_adaptive(sigma_hat, p, n2, norm_u):
    if sigma_hat < 0:
        raise ParameterError("sigma_hat must be non-negative")
    return sigma_hat * _adaptive_factor(p, n2) * np.asarray(norm_u, dtype=float)


def estimate_sigma_hat(X2, Y2, beta_hat):
    """Root mean squared residual of the pilot on the second subsample."""
    resid = np.asarray(Y2, dtype=float) - np.asarray(X2, dtype=float) @ np.asarray(beta_hat, dtype=float)
    return float(np.sqrt(np.mean(resid**2)))


def thresholds(spec, norm_u, sigma_hat=None):
    """Dispatch to the threshold of ``spec.regime``."""
    if spec.regime is Regime.KNOWN_ALL:
        return threshold_known(spec, norm_u)
    if spec.regime is Regime.KNOWN_A:
        return threshold_known_a(spec, norm_u)
    if spec.regime is Regime.KNOWN_SIGMA:
        return threshold_known_sigma(spec, norm_u)
    if sigma_hat is None:
        raise ParameterError("FullyAdaptive needs sigma_hat")
    return threshold_fully_adaptive(sigma_hat, spec.p, spec.n2, norm_u)


@dataclass
class Selection:
    """Output of the thresholding step, kept for diagnostics."""

    mask: np.ndarray
    alpha: np.ndarray
    thresholds: np.ndarray
    column_norms: np.ndarray
    sigma_hat: float | None


def threshold_stats(X2, Y2, beta_hat, spec):
    """Second step only: select ``i`` iff ``|alpha_i| > t(||X_i||)``."""
    stats = debiased_stats(X2, Y2, beta_hat)
    sigma_hat = None
    if spec.regime is Regime.FULLY_ADAPTIVE:
        sigma_hat = estimate_sigma_hat(X2, Y2, beta_hat)
    t = thresholds(spec, stats.column_norms, sigma_hat)
    mask = (np.abs(stats.alpha) > t).astype(np.int8)
    return Selection(mask, stats.alpha, t, stats.column_norms, sigma_hat)


def fit_pilot(X1, Y1, solver_cfg=None, A=A_THEORY, lambda_n=None):
    """Square-root SLOPE on the first subsample; ``lambda_n`` defaults to its size."""
    n1, p = np.shape(X1)
    lam = lambda_weights(p, lambda_n or n1, A)
    return sqrt_slope_solve(X1, Y1, lam, solver_cfg)


def select(dataset, problem, spec, solver_cfg=None, scheme=None, A=A_THEORY):
    """Run the two-step selector and return the estimated support mask."""
    return select_detailed(dataset, problem, spec, solver_cfg, scheme, A)[0]


def select_detailed(dataset, problem, spec, solver_cfg=None, scheme=None, A=A_THEORY):
    """Like :func:`select` but also returns the pilot result and the selection."""
    scheme = scheme or SplitScheme.for_problem(problem)
    if spec.p != dataset.p or spec.n2 != scheme.n2:
        raise ParameterError("threshold spec does not match the data or split")
    d1, d2 = split_sample(dataset, scheme)
    pilot = fit_pilot(d1.X, d1.Y, solver_cfg, A)
    sel = threshold_stats(d2.X, d2.Y, pilot.coef, spec)
    return sel.mask, pilot, sel


class TwoStepSelector(SelectorMixin, BaseEstimator):
    """Support selector thresholding debiased statistics of a pilot fit.

    The first ``n1`` rows fit a square-root SLOPE pilot; the remaining rows
    produce one debiased statistic per feature which is compared with a
    regime-dependent threshold.

    Parameters
    ----------
    regime : {"KnownAll", "KnownA", "KnownSigma", "FullyAdaptive"}
    a, sigma, s : optional
        Minimal signal, noise scale and sparsity; required per regime.
    delta : float, default=1.0
    n1 : int, optional
        Pilot subsample size; half of the rows by default.
    A : float, default=A_THEORY
    tol, max_iter : solver settings.

    Attributes
    ----------
    pilot_coef_ : ndarray of shape (n_features,)
    alpha_ : ndarray of shape (n_features,)
    thresholds_ : ndarray of shape (n_features,)
    sigma_hat_ : float or None
    converged_ : bool
    """

    def __init__(self, regime="FullyAdaptive", a=None, sigma=None, s=None, delta=1.0,
                 n1=None, A=A_THEORY, tol=1e-8, max_iter=10_000):
        self.regime = regime
        self.a = a
        self.sigma = sigma
        self.s = s
        self.delta = delta
        self.n1 = n1
        self.A = A
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        n, p = X.shape
        n1 = self.n1 if self.n1 is not None else n // 2
        scheme = SplitScheme.leading(n, n1)
        spec = ThresholdSpec(self.regime, p=p, n2=scheme.n2, a=self.a, sigma=self.sigma,
                             s=self.s, delta=self.delta)
        cfg = SolverConfig(max_iterations=self.max_iter, tolerance=self.tol)
        d1, d2 = split_sample(Dataset(X, y), scheme)
        pilot = fit_pilot(d1.X, d1.Y, cfg, self.A)
        sel = threshold_stats(d2.X, d2.Y, pilot.coef, spec)
        self.pilot_coef_ = pilot.coef
        self.converged_ = pilot.converged
        self.alpha_ = sel.alpha
        self.thresholds_ = sel.thresholds
        self.sigma_hat_ = sel.sigma_hat
        self.support_mask_ = sel.mask.astype(bool)
        return self

    def _get_support_mask(self):
        check_is_fitted(self)
        return self.support_mask_
