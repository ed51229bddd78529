"""Median-of-means selector for heavy-tailed noise and outliers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .model import Dataset, ParameterError, SplitScheme, split_sample
from .slope import A_THEORY, SolverConfig, lambda_weights, prox_sorted_l1, sqrt_slope_solve


class Pilot(str, Enum):
    SQRT_SLOPE = "SqrtSlope"
    MOM_PILOT = "MomPilot"


def default_n_blocks(p, n2, c3=10.0):
    """``min(floor(c3 log p), floor(n2 / 4))``."""
    return max(2, min(int(math.floor(c3 * math.log(p))), n2 // 4))


@dataclass(frozen=True)
class MomConfig:
    """Settings of the median-of-means selector.

    ``K`` is the number of blocks; when omitted it is
    :func:`default_n_blocks` of ``(p, n2, c3)``. The threshold is
    ``c4 * sigma * sqrt(log p / n2)``.
    """

    sigma: float
    K: int | None = None
    c3: float = 10.0
    c4: float = 4.0
    pilot: Pilot = Pilot.SQRT_SLOPE

    def __post_init__(self):
        object.__setattr__(self, "pilot", Pilot(self.pilot))
        if not self.sigma >= 0:
            raise ParameterError("sigma must be non-negative")
        if not self.c3 > 0 or not self.c4 > 0:
            raise ParameterError("c3 and c4 must be positive")

    def n_blocks(self, p, n2):
        K = self.K if self.K is not None else default_n_blocks(p, n2, self.c3)
        if not 1 < K < n2:
            raise ParameterError(f"need 1 < K < n2, got K={K}, n2={n2}")
        return K


def partition_blocks(n2, K):
    """``K`` consecutive blocks of size ``floor(n2 / K)``; leftover rows are dropped."""
    if not 1 < K < n2:
        raise ParameterError(f"need 1 < K < n2, got K={K}, n2={n2}")
    q = n2 // K
    return [np.arange(i * q, (i + 1) * q) for i in range(K)]


def mom_debiased(X2, Y2, beta_star, blocks):
    """Rows ``Z_i = b + (1/q) X_i^T (Y_i - X_i b)`` for each block ``i``.

    Algebraically identical to ``(1/q) X_i^T Y_i - ((1/q) X_i^T X_i - I) b``.
    """
    X2 = np.asarray(X2, dtype=float)
    Y2 = np.asarray(Y2, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    resid = Y2 - X2 @ beta_star
    Z = np.empty((len(blocks), X2.shape[1]))
    for i, idx in enumerate(blocks):
        Z[i] = beta_star + X2[idx].T @ resid[idx] / len(idx)
    return Z


def componentwise_median(Z):
    """Column medians; an even number of rows averages the two middle values."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] < 1:
        raise ParameterError("Z must be a non-empty 2-d array")
    return np.median(Z, axis=0)


def mom_threshold(sigma, p, n2, c4=4.0):
    if p < 2 or n2 < 1:
        raise ParameterError("need p >= 2 and n2 >= 1")
    return c4 * sigma * math.sqrt(math.log(p) / n2)


def mom_pilot(X1, Y1, lam, n_blocks, cfg=None):
    """Robust pilot: proximal gradient with blockwise-median gradients.

    Each step replaces the least-squares gradient by the componentwise
    median of block gradients and the noise level by the median of block
    mean squared residuals, then applies the sorted-L1 prox with unit step
    (the population Hessian of an isotropic design is the identity). The
    iterate with the smallest median block loss is returned. No optimality
    guarantee is claimed.
    """
    cfg = cfg or SolverConfig(max_iterations=500, tolerance=1e-6)
    X1 = np.asarray(X1, dtype=float)
    Y1 = np.asarray(Y1, dtype=float)
    blocks = partition_blocks(X1.shape[0], n_blocks)
    rows = np.concatenate(blocks)
    q = len(blocks[0])
    Xb = X1[rows].reshape(n_blocks, q, -1)
    Yb = Y1[rows].reshape(n_blocks, q)
    beta = np.zeros(X1.shape[1])
    best, best_loss = beta, np.inf
    for _ in range(cfg.max_iterations):
        resid = Yb - np.einsum("kqp,p->kq", Xb, beta)
        block_loss = np.mean(resid**2, axis=1)
        loss = float(np.median(block_loss))
        if loss < best_loss:
            best, best_loss = beta, loss
        grad = -np.median(np.einsum("kqp,kq->kp", Xb, resid) / q, axis=0)
        sig = math.sqrt(loss)
        new = prox_sorted_l1(beta - grad, lam, 2.0 * sig)
        step = np.linalg.norm(new - beta)
        beta = new
        if step <= cfg.tolerance * max(1.0, float(np.linalg.norm(beta))):
            break
    resid = Yb - np.einsum("kqp,p->kq", Xb, beta)
    if float(np.median(np.mean(resid**2, axis=1))) < best_loss:
        best = beta
    return best


@dataclass
class MomSelection:
    mask: np.ndarray
    medians: np.ndarray
    threshold: float
    n_blocks: int
    pilot_coef: np.ndarray


def mom_select_detailed(dataset, problem, cfg, solver_cfg=None, scheme=None, A=A_THEORY,
                        pilot_coef=None):
    """Median-of-means selector; returns diagnostics alongside the mask.

    ``pilot_coef`` bypasses the pilot fit (used when a pilot computed on the
    same first subsample is shared with another selector).
    """
    scheme = scheme or SplitScheme.for_problem(problem)
    d1, d2 = split_sample(dataset, scheme)
    p = dataset.p
    if pilot_coef is None:
        pilot_coef = fit_mom_pilot(d1.X, d1.Y, cfg, solver_cfg, A)
    K = cfg.n_blocks(p, d2.n)
    blocks = partition_blocks(d2.n, K)
    Z = mom_debiased(d2.X, d2.Y, pilot_coef, blocks)
    med = componentwise_median(Z)
    t = mom_threshold(cfg.sigma, p, d2.n, cfg.c4)
    mask = (np.abs(med) > t).astype(np.int8)
    return MomSelection(mask, med, t, K, pilot_coef)


def fit_mom_pilot(X1, Y1, cfg, solver_cfg=None, A=A_THEORY):
    n1, p = X1.shape
    lam = lambda_weights(p, n1, A)
    if cfg.pilot is Pilot.SQRT_SLOPE:
        return sqrt_slope_solve(X1, Y1, lam, solver_cfg).coef
    K1 = cfg.K if cfg.K is not None and cfg.K < n1 else default_n_blocks(p, n1, cfg.c3)
    return mom_pilot(X1, Y1, lam, K1)


def mom_select(dataset, problem, cfg, solver_cfg=None, scheme=None, A=A_THEORY):
    return mom_select_detailed(dataset, problem, cfg, solver_cfg, scheme, A).mask


class MomSelector(SelectorMixin, BaseEstimator):
    """Median-of-means support selector.

    Parameters
    ----------
    sigma : float
        Noise scale entering the threshold.
    n_blocks : int, optional
        Number of blocks ``K`` on the second subsample.
    c3, c4 : float
    pilot : {"SqrtSlope", "MomPilot"}
    n1 : int, optional
        Pilot subsample size; half of the rows by default.
    A : float

    Attributes
    ----------
    medians_ : ndarray of shape (n_features,)
    threshold_ : float
    n_blocks_ : int
    pilot_coef_ : ndarray of shape (n_features,)
    """

    def __init__(self, sigma=1.0, n_blocks=None, c3=10.0, c4=4.0, pilot="SqrtSlope",
                 n1=None, A=A_THEORY):
        self.sigma = sigma
        self.n_blocks = n_blocks
        self.c3 = c3
        self.c4 = c4
        self.pilot = pilot
        self.n1 = n1
        self.A = A

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        n, p = X.shape
        n1 = self.n1 if self.n1 is not None else n // 2
        scheme = SplitScheme.leading(n, n1)
        cfg = MomConfig(sigma=self.sigma, K=self.n_blocks, c3=self.c3, c4=self.c4,
                        pilot=self.pilot)
        res = mom_select_detailed(Dataset(X, y), None, cfg, scheme=scheme, A=self.A)
        self.medians_ = res.medians
        self.threshold_ = res.threshold
        self.n_blocks_ = res.n_blocks
        self.pilot_coef_ = res.pilot_coef
        self.support_mask_ = res.mask.astype(bool)
        return self

    def _get_support_mask(self):
        check_is_fitted(self)
        return self.support_mask_
