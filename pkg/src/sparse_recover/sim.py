"""Synthetic instances, Monte Carlo risk estimation and phase-transition sweeps."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np
from joblib import Parallel, delayed

from .model import Dataset, ParameterError, SplitScheme, hamming_distance, make_problem, split_sample, support_of
from .mom import MomConfig, Pilot, fit_mom_pilot, mom_select_detailed
from .selector import Regime, ThresholdSpec, fit_pilot, threshold_stats
from .slope import A_PRACTICAL, SolverConfig


class DesignKind(str, Enum):
    GAUSSIAN = "GaussianIID"
    RADEMACHER = "RademacherIID"
    UNIFORM = "UniformScaledIID"


class NoiseKind(str, Enum):
    GAUSSIAN = "Gaussian"
    STUDENT_T = "StudentT"
    LAPLACE = "Laplace"


class SignalKind(str, Enum):
    ALL_EQUAL = "AllEqualA"
    RANDOM_SIGNS = "RandomSignsA"
    AT_LEAST_A = "MagnitudesAtLeastA"


class OutlierKind(str, Enum):
    ADVERSARIAL_LARGE_Y = "AdversarialLargeY"
    RANDOM_CORRUPT_ROW = "RandomCorruptRow"


@dataclass(frozen=True)
class ContaminationSpec:
    """Rows to overwrite after the clean draw.

    ``AdversarialLargeY`` sets ``Y_i = +-magnitude * max|Y_clean|`` and
    ``x_i = magnitude * N(0, I)``. ``RandomCorruptRow`` replaces ``x_i`` by
    ``magnitude * N(0, I)`` and ``Y_i`` by ``magnitude * std(Y_clean) * N(0, 1)``.
    Corrupted rows are drawn uniformly without replacement from all rows.
    """

    outlier_count: int
    outlier_kind: OutlierKind = OutlierKind.ADVERSARIAL_LARGE_Y
    magnitude: float = 1e3

    def __post_init__(self):
        object.__setattr__(self, "outlier_kind", OutlierKind(self.outlier_kind))
        if self.outlier_count < 0:
            raise ParameterError("outlier_count must be non-negative")
        if not self.magnitude > 0:
            raise ParameterError("magnitude must be positive")


@dataclass(frozen=True)
class GeneratorSpec:
    """Distribution of one synthetic instance.

    Designs have unit-variance entries; noise is scaled to unit standard
    deviation before multiplication by ``sigma``.
    """

    design: DesignKind = DesignKind.GAUSSIAN
    noise: NoiseKind = NoiseKind.GAUSSIAN
    df: float = 3.0
    signal: SignalKind = SignalKind.ALL_EQUAL
    max_ratio: float = 2.0
    contamination: ContaminationSpec | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "design", DesignKind(self.design))
        object.__setattr__(self, "noise", NoiseKind(self.noise))
        object.__setattr__(self, "signal", SignalKind(self.signal))
        if isinstance(self.contamination, dict):
            object.__setattr__(self, "contamination", ContaminationSpec(**self.contamination))
        if self.noise is NoiseKind.STUDENT_T and self.df < 3:
            raise ParameterError("Student-t noise needs df >= 3")
        if self.max_ratio < 1:
            raise ParameterError("max_ratio must be >= 1")

    def to_dict(self):
        d = asdict(self)
        for k in ("design", "noise", "signal"):
            d[k] = getattr(self, k).value
        if self.contamination is not None:
            d["contamination"]["outlier_kind"] = self.contamination.outlier_kind.value
        return d


def _design(rng, kind, shape):
    if kind is DesignKind.GAUSSIAN:
        return rng.standard_normal(shape)
    if kind is DesignKind.RADEMACHER:
        return 2.0 * rng.integers(0, 2, size=shape) - 1.0
    return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=shape)


def _noise(rng, spec, n):
    if spec.noise is NoiseKind.GAUSSIAN:
        return rng.standard_normal(n)
    if spec.noise is NoiseKind.STUDENT_T:
        return rng.standard_t(spec.df, n) * math.sqrt((spec.df - 2.0) / spec.df)
    return rng.laplace(0.0, 1.0 / math.sqrt(2.0), n)


def gen_instance(problem, spec):
    """Draw ``(Dataset, beta)`` with ``Y = X beta + sigma * xi``.

    The support is uniform of size ``s``. Contamination, when requested, is
    applied last so that clean rows coincide with the uncontaminated draw.
    """
    n, p, s, a = problem.n, problem.p, problem.s, problem.a
    cont = spec.contamination
    if cont is not None and cont.outlier_count >= n:
        raise ParameterError("outlier_count must be smaller than n")
    rng = np.random.default_rng(spec.seed)
    support = np.sort(rng.choice(p, size=s, replace=False))
    if spec.signal is SignalKind.ALL_EQUAL:
        values = np.full(s, a)
    elif spec.signal is SignalKind.RANDOM_SIGNS:
        values = a * rng.choice([-1.0, 1.0], size=s)
    else:
        values = rng.uniform(a, spec.max_ratio * a, size=s) * rng.choice([-1.0, 1.0], size=s)
    beta = np.zeros(p)
    beta[support] = values
    X = _design(rng, spec.design, (n, p))
    xi = _noise(rng, spec, n)
    Y = X @ beta + problem.sigma * xi
    rows = ()
    if cont is not None and cont.outlier_count > 0:
        rows = np.sort(rng.choice(n, size=cont.outlier_count, replace=False))
        k = rows.size
        X[rows] = cont.magnitude * rng.standard_normal((k, p))
        if cont.outlier_kind is OutlierKind.ADVERSARIAL_LARGE_Y:
            Y[rows] = cont.magnitude * np.max(np.abs(Y)) * rng.choice([-1.0, 1.0], size=k)
        else:
            Y[rows] = cont.magnitude * np.std(Y) * rng.standard_normal(k)
    return Dataset(X, Y, outlier_rows=tuple(rows)), beta


@dataclass(frozen=True)
class TwoStep:
    """Two-step selector; ``a``, ``sigma`` and ``s`` come from the problem."""

    regime: Regime = Regime.KNOWN_ALL
    delta: float = 1.0
    A: float = A_PRACTICAL
    solver: SolverConfig = field(default_factory=SolverConfig)

    name = "TwoStep"

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))

    @property
    def label(self):
        return self.regime.value

    def to_dict(self):
        return {"method": self.name, "regime": self.regime.value, "delta": self.delta,
                "A": self.A, "solver": asdict(self.solver)}


@dataclass(frozen=True)
class Mom:
    """Median-of-means selector; ``sigma`` comes from the problem."""

    K: int | None = None
    c3: float = 10.0
    c4: float = 4.0
    pilot: Pilot = Pilot.SQRT_SLOPE
    A: float = A_PRACTICAL
    solver: SolverConfig = field(default_factory=SolverConfig)

    name = "Mom"

    def __post_init__(self):
        object.__setattr__(self, "pilot", Pilot(self.pilot))

    @property
    def label(self):
        return self.pilot.value

    def config(self, sigma):
        return MomConfig(sigma=sigma, K=self.K, c3=self.c3, c4=self.c4, pilot=self.pilot)

    def to_dict(self):
        return {"method": self.name, "K": self.K, "c3": self.c3, "c4": self.c4,
                "pilot": self.pilot.value, "A": self.A, "solver": asdict(self.solver)}


@dataclass(frozen=True)
class RiskEstimate:
    """Empirical Hamming risk and exact recovery rate over ``trials`` draws.

    ``hamming_se`` and ``recovery_se`` are ``None`` for a single trial.
    ``failures`` counts trials where the selector raised (scored as an empty
    support); ``nonconverged`` counts trials whose pilot hit its iteration cap.
    """

    hamming_mean: float
    hamming_se: float | None
    exact_recovery_rate: float
    recovery_se: float | None
    trials: int
    failures: int
    nonconverged: int
    config_fingerprint: str


def fingerprint(obj):
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _trial(problem, gen, methods, seed):
    """Masks of every method on one draw; pilots on the same subsample are shared."""
    dataset, beta = gen_instance(problem, replace(gen, seed=seed))
    truth = support_of(beta)
    scheme = SplitScheme.for_problem(problem)
    d1, d2 = split_sample(dataset, scheme)
    pilots = {}
    out = []
    for m in methods:
        try:
            if isinstance(m, TwoStep) or m.pilot is Pilot.SQRT_SLOPE:
                key = ("sqrt", m.A, m.solver)
                if key not in pilots:
                    pilots[key] = fit_pilot(d1.X, d1.Y, m.solver, m.A)
                pilot = pilots[key]
                coef, converged = pilot.coef, pilot.converged
            else:
                key = ("mom", m.A, m.K, m.c3)
                if key not in pilots:
                    pilots[key] = fit_mom_pilot(d1.X, d1.Y, m.config(problem.sigma), m.solver, m.A)
                coef, converged = pilots[key], True
            if isinstance(m, TwoStep):
                spec = ThresholdSpec(m.regime, p=problem.p, n2=problem.n2, a=problem.a,
                                     sigma=problem.sigma, s=problem.s, delta=m.delta)
                mask = threshold_stats(d2.X, d2.Y, coef, spec).mask
            else:
                mask = mom_select_detailed(dataset, problem, m.config(problem.sigma), scheme=scheme,
                                           pilot_coef=coef).mask
            failed = False
        except (ParameterError, FloatingPointError, np.linalg.LinAlgError):
            mask, converged, failed = np.zeros(problem.p, dtype=np.int8), False, True
        h = hamming_distance(mask, truth)
        out.append((h, h == 0, failed, not converged))
    return out


def _summarise(rows, trials, fp):
    h = np.array([r[0] for r in rows], dtype=float)
    ok = np.array([r[1] for r in rows], dtype=float)
    se = (lambda x: float(np.std(x, ddof=1) / math.sqrt(trials))) if trials > 1 else (lambda x: None)
    return RiskEstimate(
        hamming_mean=float(h.mean()), hamming_se=se(h),
        exact_recovery_rate=float(ok.mean()), recovery_se=se(ok), trials=trials,
        failures=int(sum(r[2] for r in rows)), nonconverged=int(sum(r[3] for r in rows)),
        config_fingerprint=fp)


def mc_risk_many(problem, gen, methods, trials, base_seed, n_jobs=1):
    """Risk of several methods evaluated on the same draws.

    Trial ``k`` uses generator seed ``base_seed + k``; results do not depend
    on ``n_jobs``.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    methods = list(methods)
    seeds = [base_seed + k for k in range(trials)]
    if n_jobs == 1:
        per_trial = [_trial(problem, gen, methods, sd) for sd in seeds]
    else:
        per_trial = Parallel(n_jobs=n_jobs)(delayed(_trial)(problem, gen, methods, sd) for sd in seeds)
    out = []
    for j, m in enumerate(methods):
        fp = fingerprint({"problem": problem.to_dict(), "gen": gen.to_dict(), "method": m.to_dict(),
                          "trials": trials, "base_seed": base_seed})
        out.append(_summarise([t[j] for t in per_trial], trials, fp))
    return out


def mc_risk(problem, gen, method, trials, base_seed, n_jobs=1):
    return mc_risk_many(problem, gen, [method], trials, base_seed, n_jobs)[0]


GRID_PARAMS = ("n", "n2", "a", "s", "sigma")


def problem_at(fields, param, value):
    """Problem obtained from ``fields`` by setting ``param`` to ``value``.

    Sweeping ``n`` keeps ``n1`` if ``fields`` fixes it and otherwise splits
    in half; sweeping ``n2`` keeps ``n1`` and sets ``n = n1 + n2``.
    """
    if param not in GRID_PARAMS:
        raise ParameterError(f"cannot sweep over {param!r}; choose from {GRID_PARAMS}")
    f = dict(fields)
    if param in ("n", "n2", "s"):
        value = int(round(value))
    if param == "n2":
        n1 = f.get("n1") or f["n"] // 2
        f["n1"], f["n"] = n1, n1 + value
    else:
        f[param] = value
    return make_problem(f["n"], f["p"], f["s"], f["a"], f["sigma"], f.get("n1"))


def phase_sweep(param, values, fields, gen, methods, trials, base_seed, n_jobs=1):
    """One row per (grid value, method); a failing grid point yields an error row."""
    values = list(values)
    if not values:
        raise ParameterError("grid must be non-empty")
    rows = []
    for v in values:
        try:
            problem = problem_at(fields, param, v)
            risks = mc_risk_many(problem, gen, methods, trials, base_seed, n_jobs)
        except ParameterError as exc:
            for m in methods:
                rows.append({"grid_param": param, "grid_value": v, "method": m.name,
                             "regime": m.label, "status": f"error: {exc}", "problem": None,
                             "risk": None, "seed": base_seed})
            continue
        for m, r in zip(methods, risks):
            rows.append({"grid_param": param, "grid_value": v, "method": m.name, "regime": m.label,
                         "status": "ok", "problem": problem, "risk": r, "seed": base_seed})
    return rows
