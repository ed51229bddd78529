"""Problem parameters, datasets, supports and sample splitting.

Every other module works with the small value types defined here. They are
frozen dataclasses; arrays stored on them are marked read-only so instances
can be shared between workers without copying.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Raised when problem parameters violate their constraints."""


def _readonly(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProblemInstance:
    """Sizes and signal/noise levels of one support recovery problem.

    Attributes
    ----------
    n, p, s : int
        Sample size, dimension and sparsity.
    a : float
        Minimal magnitude of a nonzero coefficient.
    sigma : float
        Noise scale.
    n1, n2 : int
        Sizes of the pilot and selection subsamples, ``n1 + n2 == n``.
    """

    n: int
    p: int
    s: int
    a: float
    sigma: float
    n1: int
    n2: int

    def __post_init__(self):
        for name in ("n", "p", "s", "n1", "n2"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ParameterError(f"{name} must be a positive integer, got {v!r}")
        if not (self.a > 0):
            raise ParameterError(f"a must be positive, got {self.a!r}")
        if not (self.sigma >= 0):
            raise ParameterError(f"sigma must be non-negative, got {self.sigma!r}")
        if self.s > self.p:
            raise ParameterError(f"s={self.s} exceeds p={self.p}")
        if self.n1 + self.n2 != self.n:
            raise ParameterError(f"n1 + n2 = {self.n1 + self.n2} differs from n = {self.n}")

    def to_dict(self):
        return {k: getattr(self, k) for k in ("n", "p", "s", "a", "sigma", "n1", "n2")}


def make_problem(n, p, s, a, sigma, n1=None):
    """Validate parameters and build a :class:`ProblemInstance`.

    ``n1`` defaults to ``n // 2``. ``sigma = 0`` is accepted so that noiseless
    instances can be simulated; every other quantity must be positive.
    """
    if n1 is None:
        n1 = n // 2
    for name, v in (("n", n), ("p", p), ("s", s), ("n1", n1)):
        if v is None or int(v) != v or v < 1:
            raise ParameterError(f"{name} must be a positive integer, got {v!r}")
    if s > p:
        raise ParameterError(f"s={s} exceeds p={p}")
    if n1 >= n:
        raise ParameterError(f"n1={n1} must be smaller than n={n}")
    return ProblemInstance(int(n), int(p), int(s), float(a), float(sigma),
                           int(n1), int(n - n1))


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``X`` (n x p) and response ``Y`` (n,).

    ``outlier_rows`` lists the rows overwritten by a contamination step, if
    any; it is bookkeeping for simulations and never read by selectors.
    """

    X: np.ndarray
    Y: np.ndarray
    outlier_rows: tuple = field(default=())

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise ParameterError("X must be a 2-d array")
        if X.shape[0] != Y.shape[0]:
            raise ParameterError(f"X has {X.shape[0]} rows but Y has length {Y.shape[0]}")
        if X.flags.writeable:
            X = X.copy()
            X.setflags(write=False)
        if Y.flags.writeable:
            Y = Y.copy()
            Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "outlier_rows", tuple(int(i) for i in self.outlier_rows))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class SplitScheme:
    """Row indices (0-based) of the two subsamples."""

    first: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        first = _readonly(self.first, dtype=np.intp)
        second = _readonly(self.second, dtype=np.intp)
        if first.ndim != 1 or second.ndim != 1:
            raise ParameterError("split indices must be 1-d")
        if first.size == 0 or second.size == 0:
            raise ParameterError("both subsamples must be non-empty")
        if np.intersect1d(first, second).size:
            raise ParameterError("split index sets overlap")
        if np.unique(first).size != first.size or np.unique(second).size != second.size:
            raise ParameterError("split index sets contain duplicates")
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)

    @classmethod
    def leading(cls, n, n1):
        """First ``n1`` rows versus the remaining ``n - n1``."""
        if not 1 <= n1 < n:
            raise ParameterError(f"need 1 <= n1 < n, got n1={n1}, n={n}")
        return cls(np.arange(n1), np.arange(n1, n))

    @classmethod
    def random(cls, n, n1, seed):
        """Uniformly random split; both index sets are returned sorted."""
        if not 1 <= n1 < n:
            raise ParameterError(f"need 1 <= n1 < n, got n1={n1}, n={n}")
        perm = np.random.default_rng(seed).permutation(n)
        return cls(np.sort(perm[:n1]), np.sort(perm[n1:]))

    @classmethod
    def for_problem(cls, problem):
        return cls.leading(problem.n, problem.n1)

    @property
    def n1(self):
        return self.first.size

    @property
    def n2(self):
        return self.second.size


def membership_omega(beta, s, a):
    """True iff ``beta`` has at most ``s`` nonzeros, each of magnitude >= ``a``."""
    beta = np.asarray(beta, dtype=float)
    nz = beta[beta != 0]
    return bool(nz.size <= s and np.all(np.abs(nz) >= a))


def support_of(beta):
    """Binary support indicator; zero detection is exact."""
    return (np.asarray(beta) != 0).astype(np.int8)


def hamming_distance(eta1, eta2):
    eta1 = np.asarray(eta1)
    eta2 = np.asarray(eta2)
    if eta1.shape != eta2.shape:
        raise ParameterError(f"length mismatch: {eta1.shape} vs {eta2.shape}")
    return int(np.count_nonzero(eta1.astype(bool) != eta2.astype(bool)))


def split_sample(dataset, scheme):
    """Return the two row subsets ``(X1, Y1), (X2, Y2)`` selected by ``scheme``.

    Contiguous index ranges are returned as numpy views; arbitrary index sets
    require a gather and produce (read-only) copies.
    """
    n = dataset.n
    out = []
    for idx in (scheme.first, scheme.second):
        if idx.min() < 0 or idx.max() >= n:
            raise ParameterError(f"split indices out of range for n={n}")
        if idx.size == idx[-1] - idx[0] + 1 and np.all(np.diff(idx) == 1):
            sl = slice(int(idx[0]), int(idx[-1]) + 1)
            out.append(Dataset(dataset.X[sl], dataset.Y[sl]))
        else:
            out.append(Dataset(dataset.X[idx], dataset.Y[idx]))
    return out[0], out[1]
