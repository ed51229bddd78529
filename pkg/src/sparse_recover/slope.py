"""Sorted-L1 penalty, its proximal operator, and the square-root SLOPE pilot."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .model import ParameterError

#: Constant of the tuning sequence guaranteed to work for Gaussian noise.
A_THEORY = 16 + 4 * np.sqrt(2)
#: Preset for simulations: 2 * lambda_j then exceeds the sorted quantiles
#: sqrt(2 log(2p/j) / n) of the noise gradient by a factor 1.1.
A_PRACTICAL = 1.1 / np.sqrt(2)


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by the inner SLOPE solver and the square-root loop.

    Parameters
    ----------
    max_iterations : int
        Iteration cap for each FISTA run and for the outer square-root loop.
    tolerance : float
        Relative change of the objective at which iterations stop.
    step_rule : {"fixed", "backtracking"}
        ``fixed`` takes the step ``1/L`` with ``L`` from power iteration and
        doubles ``L`` only if the quadratic upper bound fails; ``backtracking``
        skips power iteration, starts from ``L = 1`` and doubles on failure.
    power_iterations : int
        Steps of power iteration for the Lipschitz constant.
    seed : int
        Seed of the power iteration start vector.
    """

    max_iterations: int = 10_000
    tolerance: float = 1e-8
    step_rule: str = "fixed"
    power_iterations: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ParameterError("tolerance must be positive")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ParameterError(f"unknown step_rule {self.step_rule!r}")


@dataclass(frozen=True)
class LambdaWeights:
    weights: np.ndarray
    A: float

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0) or np.any(np.diff(w) > 0):
            raise ParameterError("weights must be a non-negative, non-increasing vector")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size


@dataclass
class SolverResult:
    coef: np.ndarray
    objective: float
    n_iter: int
    converged: bool
    objective_trace: list | None = None


def lambda_weights(p, n, A=A_THEORY):
    """Weights ``A * sqrt(log(2p/j) / n)`` for ``j = 1..p``."""
    if p < 1 or n < 1 or not A > 0:
        raise ParameterError(f"need p >= 1, n >= 1, A > 0; got p={p}, n={n}, A={A}")
    j = np.arange(1, p + 1)
    return LambdaWeights(A * np.sqrt(np.log(2.0 * p / j) / n), float(A))


def _weights(lam):
    return lam.weights if isinstance(lam, LambdaWeights) else np.asarray(lam, dtype=float)


def sorted_l1_norm(beta, lam):
    """``sum_j lam_j * |beta|_(j)`` with ``|beta|_(1) >= |beta|_(2) >= ...``."""
    w = _weights(lam)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != w.shape:
        raise ParameterError(f"length mismatch: beta {beta.shape} vs lambda {w.shape}")
    return float(np.dot(w, np.sort(np.abs(beta))[::-1]))


@njit(cache=True)
def _pava_nonincreasing(y):
    """Non-increasing least-squares fit of ``y`` clipped at zero."""
    p = y.shape[0]
    sums = np.empty(p)
    starts = np.empty(p, np.int64)
    counts = np.empty(p, np.int64)
    k = 0
    for i in range(p):
        sums[k] = y[i]
        counts[k] = 1
        starts[k] = i
        # merge while the previous block mean is not larger than the current one
        while k > 0 and sums[k - 1] * counts[k] <= sums[k] * counts[k - 1]:
            sums[k - 1] += sums[k]
            counts[k - 1] += counts[k]
            k -= 1
        k += 1
    out = np.empty(p)
    for b in range(k):
        v = sums[b] / counts[b]
        if v < 0.0:
            v = 0.0
        for i in range(starts[b], starts[b] + counts[b]):
            out[i] = v
    return out


def prox_sorted_l1(v, lam, scale=1.0):
    """Proximal map of ``scale * |.|_*`` at ``v``.

    Sort ``|v|`` decreasingly, subtract the weights, project onto the cone of
    non-increasing non-negative sequences with a pool-adjacent-violators
    stack, then undo the sort and restore the signs.
    """
    v = np.asarray(v, dtype=float)
    w = _weights(lam)
    if v.shape != w.shape:
        raise ParameterError(f"length mismatch: v {v.shape} vs lambda {w.shape}")
    if scale < 0:
        raise ParameterError("scale must be non-negative")
    if scale == 0 or v.size == 0:
        return v.copy()
    mag = np.abs(v)
    order = np.argsort(-mag, kind="stable")
    fitted = _pava_nonincreasing(mag[order] - scale * w)
    out = np.empty_like(v)
    out[order] = fitted
    return np.sign(v) * out


def power_iteration(X, n_steps=50, seed=0):
    """Largest eigenvalue of ``X.T @ X`` by power iteration."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(X.shape[1])
    nrm = np.linalg.norm(x)
    if nrm == 0:
        return 0.0
    x /= nrm
    val = 0.0
    for _ in range(n_steps):
        y = X.T @ (X @ x)
        val = float(np.linalg.norm(y))
        if val == 0:
            return 0.0
        x = y / val
    return val


def _slope_objective(resid, beta, w, noise_scale, m):
    return 0.5 * float(resid @ resid) / m + noise_scale * float(np.dot(w, np.sort(np.abs(beta))[::-1]))


def slope_solve(X, Y, lam, noise_scale, cfg=None, beta0=None, lipschitz=None):
    """Minimise ``||Y - X b||^2 / (2m) + noise_scale * |b|_*`` by FISTA.

    Uses adaptive restart whenever the objective increases. The returned
    coefficient is the best iterate seen, so the objective at the output never
    exceeds the objective at ``beta0``.

    Parameters
    ----------
    X : ndarray of shape (m, p)
    Y : ndarray of shape (m,)
    lam : LambdaWeights or array of shape (p,)
    noise_scale : float
        Multiplier of the sorted-L1 penalty.
    cfg : SolverConfig, optional
    beta0 : ndarray of shape (p,), optional
        Warm start; zeros by default.
    lipschitz : float, optional
        Largest eigenvalue of ``X.T X / m``; computed by power iteration when
        omitted.

    Returns
    -------
    SolverResult
        ``converged`` is False when ``cfg.max_iterations`` was exhausted.
    """
    cfg = cfg or SolverConfig()
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    w = _weights(lam)
    m, p = X.shape
    if Y.shape != (m,) or w.shape != (p,):
        raise ParameterError("dimension mismatch between X, Y and lambda")
    if lipschitz is None:
        if cfg.step_rule == "backtracking":
            lipschitz = 1.0
        else:
            lipschitz = power_iteration(X, cfg.power_iterations, cfg.seed) / m
    # power iteration approaches the top eigenvalue from below
    L = max(1.02 * float(lipschitz), 1e-12)

    x = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    Xx = X @ x
    resid = Y - Xx
    obj = _slope_objective(resid, x, w, noise_scale, m)
    best_x, best_obj = x.copy(), obj
    y, Xy = x.copy(), Xx.copy()
    t = 1.0
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.max_iterations + 1):
        ry = Y - Xy
        grad = -(X.T @ ry) / m
        fy = 0.5 * float(ry @ ry) / m
        while True:
            x_new = prox_sorted_l1(y - grad / L, w, noise_scale / L)
            Xx_new = X @ x_new
            r_new = Y - Xx_new
            d = x_new - y
            f_new = 0.5 * float(r_new @ r_new) / m
            # quadratic upper bound; the slack absorbs rounding
            if f_new <= fy + float(grad @ d) + 0.5 * L * float(d @ d) + 1e-12 * max(1.0, fy):
                break
            L *= 2.0
        obj_new = f_new + noise_scale * float(np.dot(w, np.sort(np.abs(x_new))[::-1]))
        if obj_new < best_obj:
            best_x, best_obj = x_new.copy(), obj_new
        if obj_new > obj:
            # adaptive restart: drop momentum
            t = 1.0
            y, Xy = x.copy(), Xx.copy()
            if abs(obj_new - obj) <= cfg.tolerance * max(abs(obj), 1e-300):
                converged = True
                break
            continue
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_new
        y = x_new + mom * (x_new - x)
        Xy = Xx_new + mom * (Xx_new - Xx)
        change = abs(obj - obj_new)
        x, Xx, obj, t = x_new, Xx_new, obj_new, t_new
        if change <= cfg.tolerance * max(abs(obj), 1e-300):
            converged = True
            break
    return SolverResult(best_x, best_obj, n_iter, converged)


def sqrt_slope_objective(X, Y, beta, lam):
    m = X.shape[0]
    return float(np.linalg.norm(Y - X @ beta)) / np.sqrt(m) + 2.0 * sorted_l1_norm(beta, lam)


def sqrt_slope_solve(X1, Y1, lam, cfg=None):
    """Square-root SLOPE: minimise ``||Y1 - X1 b|| / sqrt(n1) + 2 |b|_*``.

    Alternates between the residual scale ``sig = ||Y1 - X1 b|| / sqrt(n1)``
    and a SLOPE solve with penalty multiplier ``2 * sig``. This is block
    coordinate descent on ``||r||^2 / (2 n1 sig) + sig / 2 + 2|b|_*``, whose
    minimum over ``sig`` is the square-root objective, so the objective never
    increases from one outer step to the next.
    """
    cfg = cfg or SolverConfig()
    X1 = np.asarray(X1, dtype=float)
    Y1 = np.asarray(Y1, dtype=float)
    m, p = X1.shape
    w = _weights(lam)
    if Y1.shape != (m,) or w.shape != (p,):
        raise ParameterError("dimension mismatch between X1, Y1 and lambda")
    floor = 1e-12 * float(np.linalg.norm(Y1)) / np.sqrt(m)
    L = None if cfg.step_rule == "backtracking" else power_iteration(X1, cfg.power_iterations, cfg.seed) / m

    beta = np.zeros(p)
    obj = sqrt_slope_objective(X1, Y1, beta, w)
    trace = [obj]
    best_beta, best_obj = beta, obj
    converged = False
    n_outer = 0
    for n_outer in range(1, cfg.max_iterations + 1):
        sig = float(np.linalg.norm(Y1 - X1 @ beta)) / np.sqrt(m)
        if sig <= floor:
            converged = True
            break
        inner = slope_solve(X1, Y1, w, 2.0 * sig, cfg, beta0=beta, lipschitz=L)
        beta = inner.coef
        new_obj = sqrt_slope_objective(X1, Y1, beta, w)
        trace.append(new_obj)
        if new_obj < best_obj:
            best_beta, best_obj = beta, new_obj
        if abs(obj - new_obj) <= cfg.tolerance * max(abs(obj), 1e-300):
            converged = inner.converged
            break
        obj = new_obj
    return SolverResult(best_beta, best_obj, n_outer, converged, trace)


class SqrtSlope(RegressorMixin, BaseEstimator):
    """Square-root SLOPE regression (no intercept).

    Parameters
    ----------
    A : float, default=A_THEORY
        Scale of the tuning sequence. ``A_THEORY`` (about 21.66) carries the
        guarantee for Gaussian noise but over-shrinks at moderate sample
        sizes; ``A_PRACTICAL`` (about 0.78) is the preset for simulations.
    lambda_n : int, optional
        Sample size used inside the tuning sequence; defaults to the number
        of rows passed to ``fit``.
    tol, max_iter, step_rule :
        Forwarded to :class:`SolverConfig`.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    sigma_ : float
        Residual scale ``||y - X coef_|| / sqrt(n)`` at the solution.
    objective_ : float
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, A=A_THEORY, lambda_n=None, tol=1e-8, max_iter=10_000,
                 step_rule="fixed"):
        self.A = A
        self.lambda_n = lambda_n
        self.tol = tol
        self.max_iter = max_iter
        self.step_rule = step_rule

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        n, p = X.shape
        lam = lambda_weights(p, self.lambda_n or n, self.A)
        cfg = SolverConfig(max_iterations=self.max_iter, tolerance=self.tol,
                           step_rule=self.step_rule)
        res = sqrt_slope_solve(X, y, lam, cfg)
        self.coef_ = res.coef
        self.objective_ = res.objective
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.sigma_ = float(np.linalg.norm(y - X @ res.coef)) / np.sqrt(n)
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False)
        return X @ self.coef_
