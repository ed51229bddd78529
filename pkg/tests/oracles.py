"""Reference computations used only by the tests.

Each oracle reaches its answer by a route that shares no code with the
package: brute force, generic optimisers, quadrature or a plain re-typing of
a closed-form expression.
"""
import functools
import itertools
import math

import numpy as np
from scipy import optimize, stats


def sorted_l1_naive(x, lam):
    # max over permutations of sum lam_j |x_pi(j)|; equal to the sorted pairing
    # by the rearrangement inequality
    a = np.abs(np.asarray(x, dtype=float))
    return max(float(np.dot(lam, a[list(perm)])) for perm in itertools.permutations(range(a.size)))


def prox_objective(x, v, lam, scale):
    x = np.asarray(x, dtype=float)
    a = np.sort(np.abs(x), axis=-1)[..., ::-1]
    return 0.5 * np.sum((x - v) ** 2, axis=-1) + scale * a @ lam


def prox_brute_force(v, lam, scale=1.0, grid_points=9):
    """Grid search followed by a local QP refinement of the sorted-L1 prox.

    The sorted-L1 norm with non-increasing ``lam`` equals
    ``sum_k (lam_k - lam_{k+1}) T_k(|x|)`` where ``T_k`` is the sum of the
    ``k`` largest entries, and ``T_k(u) = min_t k t + sum_i (u_i - t)_+``.
    With slack variables this makes the prox a smooth QP, which SLSQP solves
    from the best grid point.
    """
    v = np.asarray(v, dtype=float)
    lam = np.asarray(lam, dtype=float)
    p = v.size
    r = max(float(np.max(np.abs(v))), 1e-3)
    axis = np.linspace(-r, r, grid_points)
    grid = np.array(list(itertools.product(axis, repeat=p)))
    x0 = grid[np.argmin(prox_objective(grid, v, lam, scale))]

    dl = scale * (lam - np.append(lam[1:], 0.0))
    kk = np.arange(1, p + 1)
    # z = [x (p), u (p), t (p), e (p*p)] with e[k, i] >= u_i - t_k, e >= 0, |x| <= u

    def unpack(z):
        return z[:p], z[p:2 * p], z[2 * p:3 * p], z[3 * p:].reshape(p, p)

    def f(z):
        x, u, t, e = unpack(z)
        return 0.5 * np.sum((x - v) ** 2) + np.dot(dl, kk * t + e.sum(axis=1))

    def grad(z):
        x, u, t, e = unpack(z)
        g = np.zeros_like(z)
        g[:p] = x - v
        g[2 * p:3 * p] = dl * kk
        g[3 * p:] = np.repeat(dl, p)
        return g

    n = 3 * p + p * p
    rows = []
    # u - x >= 0, u + x >= 0, e_ki - u_i + t_k >= 0, e_ki >= 0
    for i in range(p):
        a = np.zeros(n); a[p + i] = 1; a[i] = -1; rows.append(a)
        a = np.zeros(n); a[p + i] = 1; a[i] = 1; rows.append(a)
    for k in range(p):
        for i in range(p):
            a = np.zeros(n); a[3 * p + k * p + i] = 1; a[p + i] = -1; a[2 * p + k] = 1; rows.append(a)
            a = np.zeros(n); a[3 * p + k * p + i] = 1; rows.append(a)
    G = np.array(rows)
    u0 = np.abs(x0)
    t0 = np.sort(u0)[::-1]
    e0 = np.maximum(u0[None, :] - t0[:, None], 0.0)
    z0 = np.concatenate([x0, u0, t0, e0.ravel()])
    res = optimize.minimize(f, z0, jac=grad, method="SLSQP",
                            constraints=[{"type": "ineq", "fun": lambda z: G @ z, "jac": lambda z: G}],
                            options={"ftol": 1e-14, "maxiter": 1000})
    x = res.x[:p]
    return x, float(prox_objective(x, v, lam, scale))


@functools.lru_cache(maxsize=None)
def _legendre(nodes):
    return np.polynomial.legendre.leggauss(nodes)


def psi_quadrature(n, p, s, a, sigma, clamp, nodes=2000):
    """Integral over the chi-squared(n) density by Gauss-Legendre on (0, n + 20 sqrt(n)).

    Returns the value and a bound on the truncated tail mass times ``p``.
    """
    hi = n + 20.0 * math.sqrt(n)
    x, w = _legendre(nodes)
    q = 0.5 * hi * (x + 1.0)
    w = 0.5 * hi * w
    u = np.sqrt(q)
    t = a * u / 2.0 + sigma**2 * math.log(p / s - 1.0) / (a * u)
    gap = a * u - t
    if clamp:
        gap = np.maximum(gap, 0.0)
    fp = (p - s) * stats.norm.sf(t / sigma)
    fn = s * stats.norm.sf(gap / sigma)
    val = float(np.sum(w * (fp + fn) * stats.chi2.pdf(q, n)))
    tail = p * float(stats.chi2.sf(hi, n))
    return val, tail


def weak_signal_lower_formula(n, p, s, a, sigma, c):
    ell = math.log(1 + a * a / (4 * sigma * sigma))
    return (c * (s ** (7 / 4) * (p - s) ** (1 / 4) / (n * ell)) ** 0.5 * math.exp(-n * ell / 2)
            - 2 * s * math.exp(-s / 8))


def weak_signal_upper_formula(n2, p, s, a, sigma, delta, C1, C2):
    ell = math.log(1 + a ** 2 / (4 * sigma ** 2 * (1 + delta ** 2)))
    common = 2 * (s * (p - s)) ** 0.5 * math.exp(-n2 * ell / 2) + s * math.exp(-n2 / 24)
    return common + C1 * p * (s / (2 * p)) ** (C2 * s), common + C1 * (s / (2 * p)) ** (C2 * s)


def student_tail_exact(k, b):
    return 2.0 * stats.t.sf(math.sqrt(k) * b, k)


def median_by_sorting(col):
    c = sorted(col)
    m = len(c)
    return c[m // 2] if m % 2 else 0.5 * (c[m // 2 - 1] + c[m // 2])

