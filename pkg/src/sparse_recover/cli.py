"""Command-line interface: ``sparse-recover {generate,select,risk,sweep,bounds}``.

Exit codes
----------
0  success
2  invalid configuration or parameters
3  unreadable or malformed input file
4  solver did not converge and ``--strict`` was given
"""
from __future__ import annotations

import argparse
import base64
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .bounds import MonteCarloConfig, bounds_report
from .model import Dataset, ParameterError, SplitScheme, make_problem, split_sample
from .mom import MomConfig, mom_select_detailed
from .selector import ThresholdSpec, fit_pilot, threshold_stats
from .sim import (ContaminationSpec, GeneratorSpec, Mom, TwoStep, gen_instance, mc_risk_many,
                  phase_sweep)
from .slope import A_PRACTICAL, SolverConfig

EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_NONCONVERGED = 0, 2, 3, 4
SCHEMA_VERSION = 1
CSV_COLUMNS = ["schema_version", "n", "p", "s", "a", "sigma", "method", "regime", "trials",
               "hamming_mean", "hamming_se", "recovery_rate", "seed"]
SWEEP_COLUMNS = CSV_COLUMNS + ["grid_param", "grid_value", "status"]
DATASET_MAGIC = "sparse-recover-dataset"

DEFAULTS = {
    "n": None, "p": None, "s": None, "a": None, "sigma": None, "n1": None,
    "design": "GaussianIID", "noise": "Gaussian", "df": 3.0, "signal": "AllEqualA",
    "max_ratio": 2.0, "outliers": 0, "outlier_kind": "AdversarialLargeY", "magnitude": 1e3,
    "method": "TwoStep", "regime": "KnownAll", "delta": 1.0, "A": A_PRACTICAL,
    "K": None, "c3": 10.0, "c4": 4.0, "pilot": "SqrtSlope",
    "max_iter": 10_000, "tol": 1e-8,
    "trials": 100, "seed": None, "threads": None,
    "data": None, "truth_out": None, "out": None, "format": None,
    "grid_param": "n", "start": None, "stop": None, "count": None, "scale": "linear",
    "C1": 1.0, "C2": 1.0, "B": 2.0, "c": 1.0, "s_prime": None, "mc_trials": 20_000,
}
# settings that cannot change results and are left out of embedded configs
_NOT_EMBEDDED = {"threads", "out", "format", "truth_out", "quiet", "strict", "config", "command"}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- dataset files
def write_dataset(path, dataset, seed=None, beta=None):
    """Header line of JSON, then base64 little-endian float64 ``X`` and ``Y`` lines."""
    X = np.ascontiguousarray(dataset.X, dtype="<f8")
    Y = np.ascontiguousarray(dataset.Y, dtype="<f8")
    header = {"format": DATASET_MAGIC, "version": 1, "n": int(X.shape[0]), "p": int(X.shape[1]),
              "dtype": "<f8", "layout": "row-major", "seed": seed,
              "outlier_rows": list(dataset.outlier_rows)}
    if beta is not None:
        header["support"] = [int(i) for i in np.flatnonzero(beta)]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write(base64.b64encode(X.tobytes()).decode("ascii") + "\n")
        fh.write(base64.b64encode(Y.tobytes()).decode("ascii") + "\n")


def read_dataset(path):
    try:
        with open(path, encoding="ascii") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read dataset {path}: {exc.strerror}") from exc
    except UnicodeDecodeError as exc:
        raise CliError(EXIT_PARSE, f"dataset {path} is not a sparse-recover dataset") from exc
    try:
        header = json.loads(lines[0])
        if header.get("format") != DATASET_MAGIC:
            raise ValueError("bad magic")
        n, p = int(header["n"]), int(header["p"])
        X = np.frombuffer(base64.b64decode(lines[1], validate=True), dtype="<f8")
        Y = np.frombuffer(base64.b64decode(lines[2], validate=True), dtype="<f8")
        if X.size != n * p or Y.size != n:
            raise ValueError("block sizes do not match the header")
        return Dataset(X.reshape(n, p), Y, header.get("outlier_rows", ())), header
    except (IndexError, KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"cannot parse dataset {path}: {exc}") from exc


# ---------------------------------------------------------------- formatting
def fmt(v):
    """CSV cell: shortest round-trip repr for floats, empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _risk_row(problem, method, risk, trials, seed):
    return {"schema_version": SCHEMA_VERSION, "n": problem.n, "p": problem.p, "s": problem.s,
            "a": problem.a, "sigma": problem.sigma, "method": method.name, "regime": method.label,
            "trials": trials, "hamming_mean": risk.hamming_mean, "hamming_se": risk.hamming_se,
            "recovery_rate": risk.exact_recovery_rate, "seed": seed}


def render(rows, columns, config, fmt_name):
    if fmt_name == "json":
        return json.dumps({"config": config, "rows": rows}, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    buf.write("# config=" + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- config
def resolve(args):
    """Defaults, then ``--config`` JSON, then explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise CliError(EXIT_PARSE, f"cannot read config {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_PARSE, f"cannot parse config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise CliError(EXIT_CONFIG, "config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise CliError(EXIT_CONFIG, f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None:
            cfg[k] = v
    return cfg


def embedded(cfg, command):
    out = {k: v for k, v in cfg.items() if k not in _NOT_EMBEDDED}
    out["command"] = command
    return out


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise CliError(EXIT_CONFIG, "missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _threads(cfg):
    if cfg.get("threads") is not None:
        t = int(cfg["threads"])
    elif os.environ.get("SPARSE_RECOVER_THREADS"):
        try:
            t = int(os.environ["SPARSE_RECOVER_THREADS"])
        except ValueError as exc:
            raise CliError(EXIT_CONFIG, "SPARSE_RECOVER_THREADS must be an integer") from exc
    else:
        t = os.cpu_count() or 1
    if t < 1:
        raise CliError(EXIT_CONFIG, "thread count must be >= 1")
    return t


def _problem(cfg, n=None):
    _require(cfg, "p", "s", "a", "sigma")
    if n is None:
        _require(cfg, "n")
    return make_problem(n if n is not None else cfg["n"], cfg["p"], cfg["s"], cfg["a"],
                        cfg["sigma"], cfg["n1"])


def _generator(cfg):
    cont = None
    if cfg["outliers"]:
        cont = ContaminationSpec(int(cfg["outliers"]), cfg["outlier_kind"], float(cfg["magnitude"]))
    return GeneratorSpec(design=cfg["design"], noise=cfg["noise"], df=float(cfg["df"]),
                         signal=cfg["signal"], max_ratio=float(cfg["max_ratio"]), contamination=cont)


def _solver(cfg):
    return SolverConfig(max_iterations=int(cfg["max_iter"]), tolerance=float(cfg["tol"]))


def _methods(cfg):
    names = [m.strip() for m in str(cfg["method"]).replace("both", "TwoStep,Mom").split(",") if m.strip()]
    out = []
    for name in names:
        if name == "TwoStep":
            out.append(TwoStep(regime=cfg["regime"], delta=float(cfg["delta"]), A=float(cfg["A"]),
                               solver=_solver(cfg)))
        elif name == "Mom":
            out.append(Mom(K=cfg["K"], c3=float(cfg["c3"]), c4=float(cfg["c4"]), pilot=cfg["pilot"],
                           A=float(cfg["A"]), solver=_solver(cfg)))
        else:
            raise CliError(EXIT_CONFIG, f"unknown method {name!r}; use TwoStep, Mom or both")
    if not out:
        raise CliError(EXIT_CONFIG, "no method given")
    return out


def _log(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


# ---------------------------------------------------------------- commands
def cmd_generate(args, cfg):
    _require(cfg, "seed", "out")
    problem = _problem(cfg)
    gen = _generator(cfg)
    from dataclasses import replace
    dataset, beta = gen_instance(problem, replace(gen, seed=int(cfg["seed"])))
    write_dataset(cfg["out"], dataset, seed=int(cfg["seed"]), beta=beta)
    if cfg["truth_out"]:
        emit(json.dumps([int(v) for v in (beta != 0)]) + "\n", cfg["truth_out"])
    _log(args, f"wrote {problem.n}x{problem.p} dataset to {cfg['out']}")
    return EXIT_OK


def cmd_select(args, cfg):
    _require(cfg, "data")
    dataset, _ = read_dataset(cfg["data"])
    n, p = dataset.X.shape
    n1 = cfg["n1"] if cfg["n1"] is not None else n // 2
    scheme = SplitScheme.leading(n, n1)
    method = _methods(cfg)
    if len(method) != 1:
        raise CliError(EXIT_CONFIG, "select runs exactly one method")
    method = method[0]
    meta = {"method": method.name, "n": n, "p": p, "n1": scheme.n1, "n2": scheme.n2}
    if isinstance(method, TwoStep):
        spec = ThresholdSpec(method.regime, p=p, n2=scheme.n2, a=cfg["a"], sigma=cfg["sigma"],
                             s=cfg["s"], delta=method.delta)
        d1, d2 = split_sample(dataset, scheme)
        pilot = fit_pilot(d1.X, d1.Y, method.solver, method.A)
        converged = pilot.converged
        sel = threshold_stats(d2.X, d2.Y, pilot.coef, spec)
        mask = sel.mask
        meta.update(regime=method.regime.value, sigma_hat=sel.sigma_hat,
                    thresholds={"min": float(sel.thresholds.min()), "max": float(sel.thresholds.max()),
                                "mean": float(sel.thresholds.mean())})
    else:
        _require(cfg, "sigma")
        mcfg = MomConfig(sigma=float(cfg["sigma"]), K=cfg["K"], c3=method.c3, c4=method.c4,
                         pilot=method.pilot)
        res = mom_select_detailed(dataset, None, mcfg, method.solver, scheme, method.A)
        mask, converged = res.mask, True
        meta.update(regime=method.label, n_blocks=res.n_blocks,
                    thresholds={"min": res.threshold, "max": res.threshold, "mean": res.threshold})
    meta["converged"] = bool(converged)
    if args.strict and not converged:
        raise CliError(EXIT_NONCONVERGED, "pilot solver did not converge")
    meta["config"] = embedded(cfg, "select")
    emit(json.dumps({"support": [int(v) for v in mask], "metadata": meta}, sort_keys=True) + "\n",
         cfg["out"])
    _log(args, f"selected {int(mask.sum())} of {p} features")
    return EXIT_OK


def cmd_risk(args, cfg):
    _require(cfg, "seed")
    problem = _problem(cfg)
    methods = _methods(cfg)
    trials, seed = int(cfg["trials"]), int(cfg["seed"])
    risks = mc_risk_many(problem, _generator(cfg), methods, trials, seed, _threads(cfg))
    rows = [_risk_row(problem, m, r, trials, seed) for m, r in zip(methods, risks)]
    emit(render(rows, CSV_COLUMNS, embedded(cfg, "risk"), cfg["format"] or "csv"), cfg["out"])
    return EXIT_OK


def grid_values(start, stop, count, scale):
    if count is None or int(count) < 1:
        raise CliError(EXIT_CONFIG, "grid must be non-empty (count >= 1)")
    count = int(count)
    if scale == "log":
        if not (start > 0 and stop > 0):
            raise CliError(EXIT_CONFIG, "log grid needs positive start and stop")
        vals = np.geomspace(start, stop, count)
    elif scale == "linear":
        vals = np.linspace(start, stop, count)
    else:
        raise CliError(EXIT_CONFIG, f"unknown grid scale {scale!r}")
    return [float(v) for v in vals]


def cmd_sweep(args, cfg):
    _require(cfg, "seed", "start", "stop", "count")
    methods = _methods(cfg)
    values = grid_values(float(cfg["start"]), float(cfg["stop"]), cfg["count"], cfg["scale"])
    param = cfg["grid_param"]
    fields = {k: cfg[k] for k in ("n", "p", "s", "a", "sigma", "n1")}
    if param != "n":
        _require(cfg, "n")
    _require(cfg, *[k for k in ("p", "s", "a", "sigma") if k != param])
    trials, seed = int(cfg["trials"]), int(cfg["seed"])
    out = phase_sweep(param, values, fields, _generator(cfg), methods, trials, seed, _threads(cfg))
    rows = []
    for r in out:
        pr, risk = r["problem"], r["risk"]
        row = {"schema_version": SCHEMA_VERSION, "method": r["method"], "regime": r["regime"],
               "trials": trials, "seed": seed, "grid_param": param, "grid_value": r["grid_value"],
               "status": r["status"]}
        if pr is not None:
            row.update(n=pr.n, p=pr.p, s=pr.s, a=pr.a, sigma=pr.sigma,
                       hamming_mean=risk.hamming_mean, hamming_se=risk.hamming_se,
                       recovery_rate=risk.exact_recovery_rate)
        rows.append(row)
        _log(args, f"{param}={r['grid_value']!r} {r['method']}: {r['status']}")
    emit(render(rows, SWEEP_COLUMNS, embedded(cfg, "sweep"), cfg["format"] or "csv"), cfg["out"])
    return EXIT_OK if any(r["status"] == "ok" for r in out) else EXIT_CONFIG


def cmd_bounds(args, cfg):
    problem = _problem(cfg)
    mc = MonteCarloConfig(trials=int(cfg["mc_trials"]), seed=int(cfg["seed"] or 0))
    rep = bounds_report(problem, mc, s_prime=cfg["s_prime"], delta=float(cfg["delta"]),
                        C1=float(cfg["C1"]), C2=float(cfg["C2"]), B=float(cfg["B"]), c=float(cfg["c"]))
    doc = rep.to_dict()
    doc["config"] = embedded(cfg, "bounds")
    emit(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n", cfg["out"])
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "select": cmd_select, "risk": cmd_risk,
            "sweep": cmd_sweep, "bounds": cmd_bounds}


# ---------------------------------------------------------------- parser
def _add_common(sp):
    g = sp.add_argument_group("problem")
    for name, typ in (("n", int), ("p", int), ("s", int), ("a", float), ("sigma", float),
                      ("n1", int)):
        g.add_argument(f"--{name}", type=typ)
    g = sp.add_argument_group("generator")
    g.add_argument("--design", choices=["GaussianIID", "RademacherIID", "UniformScaledIID"])
    g.add_argument("--noise", choices=["Gaussian", "StudentT", "Laplace"])
    g.add_argument("--df", type=float)
    g.add_argument("--signal", choices=["AllEqualA", "RandomSignsA", "MagnitudesAtLeastA"])
    g.add_argument("--max-ratio", dest="max_ratio", type=float)
    g.add_argument("--outliers", type=int)
    g.add_argument("--outlier-kind", dest="outlier_kind", choices=["AdversarialLargeY", "RandomCorruptRow"])
    g.add_argument("--magnitude", type=float)
    g = sp.add_argument_group("selector")
    g.add_argument("--method", help="TwoStep, Mom, or a comma list / 'both'")
    g.add_argument("--regime", choices=["KnownAll", "KnownA", "KnownSigma", "FullyAdaptive"])
    g.add_argument("--delta", type=float)
    g.add_argument("--A", type=float)
    g.add_argument("--K", type=int)
    g.add_argument("--c3", type=float)
    g.add_argument("--c4", type=float)
    g.add_argument("--pilot", choices=["SqrtSlope", "MomPilot"])
    g.add_argument("--max-iter", dest="max_iter", type=int)
    g.add_argument("--tol", type=float)
    g = sp.add_argument_group("run")
    g.add_argument("--config", help="JSON file of settings; flags override it")
    g.add_argument("--trials", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--out")
    g.add_argument("--format", choices=["csv", "json"])
    g.add_argument("--strict", action="store_true")
    g.add_argument("--quiet", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="sparse-recover",
                                     description="Exact support recovery in sparse linear regression.")
    sub = parser.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("generate", help="write a synthetic dataset file")
    _add_common(sp)
    sp.add_argument("--truth-out", dest="truth_out")
    sp = sub.add_parser("select", help="estimate the support of a dataset file")
    _add_common(sp)
    sp.add_argument("--data")
    sp = sub.add_parser("risk", help="Monte Carlo Hamming risk and exact recovery rate")
    _add_common(sp)
    sp = sub.add_parser("sweep", help="risk along a one-parameter grid")
    _add_common(sp)
    sp.add_argument("--grid-param", dest="grid_param", choices=["n", "n2", "a", "s", "sigma"])
    sp.add_argument("--start", type=float)
    sp.add_argument("--stop", type=float)
    sp.add_argument("--count", type=int)
    sp.add_argument("--scale", choices=["linear", "log"])
    sp = sub.add_parser("bounds", help="theoretical bounds as JSON")
    _add_common(sp)
    for name in ("C1", "C2", "B", "c"):
        sp.add_argument(f"--{name}", type=float)
    sp.add_argument("--s-prime", dest="s_prime", type=int)
    sp.add_argument("--mc-trials", dest="mc_trials", type=int)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](args, cfg)
    except CliError as exc:
        print(f"sparse-recover: error: {exc}", file=sys.stderr)
        return exc.code
    except (ParameterError, ValueError) as exc:
        print(f"sparse-recover: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
