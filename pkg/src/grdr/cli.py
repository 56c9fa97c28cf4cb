"""Command-line experiment runner.

Subcommands
-----------
estimate   GRDR vs cost-matched standard MC, one CSV row per method and d.
bounds     Variance bounds next to observed chain variances.
curves     Coupling covariance curves C(i).
selftest   Fixed-seed invariant suite; exit code 3 on failure.

Every config key can be given in a ``key = value`` file (``--config``) and
overridden by a flag of the same name, e.g. ``--d 16,64 --R 2000``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import analysis, config as cfgmod, estimator
from .errors import ConfigError, GrdrError, NotPSDError, ScheduleError
from .payoffs import CONSTANT, LINEAR
from .rng import CURVE_STREAM, MC_STREAM, PROBE_STREAM, STREAM_POLICY, RngStream

logger = logging.getLogger("grdr")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_SELFTEST = 0, 1, 2, 3

ESTIMATE_COLUMNS = [
    "method", "d", "family", "factor", "qkind", "R", "estimate", "stderr", "var_fn_hat",
    "mean_ops", "mean_depth", "seed", "n_iterations", "total_ops", "factor_ops",
    "variance_ratio", "cost_matched_ratio", "rng", "fingerprint", "config",
]
BOUNDS_COLUMNS = [
    "d", "qkind", "n_iterations", "kappa", "kappa_source", "sigma_bound", "factor_bound",
    "pca_bound", "harmonic_bound", "harmonic_cap", "eq6_bound", "n_var_bound", "curve_source",
    "var_fn_hat", "n_var_fn_hat", "var_rel_stderr", "exact_var_fn", "verdict", "seed", "config",
]
CURVE_COLUMNS = ["d", "i", "source", "C_hat", "stderr", "C_isotonic", "lemma41_bound", "seed",
                 "config"]


class NumericalFailure(GrdrError):
    pass


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in columns])
    return buf.getvalue()


def _numerical(fn):
    """Run ``fn``; numerical breakdowns become :class:`NumericalFailure`."""
    try:
        return fn()
    except (NotPSDError, ScheduleError, np.linalg.LinAlgError, FloatingPointError) as exc:
        raise NumericalFailure(str(exc)) from exc


def _sweep(cfg, worker):
    """Apply ``worker(cfg, d)`` across the sweep; keep going past numerical failures."""
    results, failures = [], []
    if cfg.jobs > 1 and len(cfg.d) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outs = list(pool.map(_safe_worker, [(worker, cfg, d) for d in cfg.d]))
    else:
        outs = [_safe_worker((worker, cfg, d)) for d in cfg.d]
    for d, (ok, payload) in zip(cfg.d, outs):
        if ok:
            results.append(payload)
        else:
            logger.error("d=%d: numerical failure: %s", d, payload)
            failures.append((d, payload))
    return results, failures


def _safe_worker(args):
    worker, cfg, d = args
    try:
        return True, _numerical(lambda: worker(cfg, d))
    except NumericalFailure as exc:
        return False, str(exc)


def resolve_kappa(cfg, prob):
    """``(kappa, source)``: supplied number, ``||a||`` for linear payoffs, or a probe."""
    if cfg.kappa not in ("auto", "probe"):
        return float(cfg.kappa), analysis.SUPPLIED
    g = prob.payoff
    if cfg.kappa == "auto" and g.kind == LINEAR:
        return float(np.linalg.norm(g.a)), analysis.SUPPLIED
    if cfg.kappa == "auto" and g.kind == CONSTANT:
        return 0.0, analysis.SUPPLIED
    k = analysis.probe_kappa(g, prob.spec, cfg.probes, RngStream(cfg.seed, PROBE_STREAM + prob.d))
    return k, analysis.PROBED


# ---------------------------------------------------------------- estimate

def _estimate_point(cfg, d):
    prob = cfgmod.build_problem(cfg, d)
    backend = None if cfg.backend == "auto" else cfg.backend
    grdr = estimator.replicate_grdr(prob.payoff, prob.fac, prob.sched, cfg.R, cfg.seed,
                                    spec=prob.spec, backend=backend, verify=cfg.debug_verify)
    if cfg.match == "ops":
        n_mc = estimator.matched_mc_samples(grdr.total_ops, d, prob.payoff.ops_per_eval)
    else:
        n_mc = cfg.R
    mc = estimator.standard_mc(prob.payoff, prob.fac, n_mc, RngStream(cfg.seed, MC_STREAM),
                               spec=prob.spec)
    if cfg.match == "ops" and abs(mc.total_ops - grdr.total_ops) > 0.05 * grdr.total_ops:
        raise NumericalFailure(f"could not match op counts within 5% at d={d}")
    rep = analysis.efficiency_report(mc, grdr)
    common = {
        "d": d, "family": cfgmod.family_label(cfg), "factor": prob.fac.label,
        "seed": cfg.seed, "factor_ops": d ** 3, "rng": STREAM_POLICY,
        "variance_ratio": rep["variance_ratio"], "cost_matched_ratio": rep["cost_matched_ratio"],
        "config": cfg.fingerprint(),
    }
    rows = []
    for res, qkind in ((mc, "none"), (grdr, prob.sched.kind)):
        rows.append({
            **common, "method": res.method, "qkind": qkind, "R": res.replications,
            "estimate": res.estimate, "stderr": res.stderr, "var_fn_hat": res.var_fn_hat,
            "mean_ops": res.mean_ops_per_replication, "mean_depth": res.mean_depth,
            "n_iterations": res.n_iterations, "total_ops": res.total_ops,
            "fingerprint": res.fingerprint,
        })
    return rows, rep


def run_estimate(cfg):
    """Rows for every (d, method) pair plus per-d efficiency reports."""
    results, failures = _sweep(cfg, _estimate_point)
    rows = [r for rs, _ in results for r in rs]
    reports = [rep for _, rep in results]
    return rows, reports, failures


# ---------------------------------------------------------------- bounds & curves

def _curves_for(cfg, prob, kappa):
    """Empirical curve (always) and exact curve (linear payoffs) with CSV rows."""
    fac, g, d = prob.fac, prob.payoff, prob.d
    emp = analysis.coupling_curve_empirical(g, fac, None, cfg.pairs,
                                            RngStream(cfg.seed, CURVE_STREAM + d))
    curves = [emp]
    if g.kind == LINEAR:
        curves.append(analysis.coupling_curve_linear(g.a, fac))
    lemma = np.append(analysis.bound_lemma41(fac, kappa), 0.0)
    rows = []
    for cur in curves:
        iso = cur.isotonic()
        for k, i in enumerate(cur.indices):
            rows.append({
                "d": d, "i": int(i), "source": cur.source, "C_hat": cur.values[k],
                "stderr": "" if cur.stderrs is None else cur.stderrs[k],
                "C_isotonic": iso[k], "lemma41_bound": lemma[i], "seed": cfg.seed,
                "config": cfg.fingerprint(),
            })
    return curves, rows


def _bounds_point(cfg, d):
    prob = cfgmod.build_problem(cfg, d)
    kappa, source = resolve_kappa(cfg, prob)
    curves, curve_rows = _curves_for(cfg, prob, kappa)
    curve = curves[-1]
    backend = None if cfg.backend == "auto" else cfg.backend
    rows = []
    scheds = [prob.sched]
    if prob.sched.kind != "ones":
        scheds.append(cfgmod.schedule.ones(d))
    for sched in scheds:
        rep = analysis.bound_report(curve, prob.fac, sched, kappa, source)
        res = estimator.replicate_grdr(prob.payoff, prob.fac, sched, cfg.R, cfg.seed,
                                       spec=prob.spec, backend=backend)
        exact = (analysis.linear_var_fn(prob.payoff.a, prob.fac, sched)
                 if prob.payoff.kind == LINEAR else "")
        rel = res.var_rel_stderr
        n = sched.n_iterations
        rows.append({
            "d": d, "qkind": sched.kind, "n_iterations": n, "kappa": kappa,
            "kappa_source": source, "sigma_bound": rep.sigma_bound,
            "factor_bound": rep.varfn_bound_factor, "pca_bound": rep.varfn_bound_pca,
            "harmonic_bound": rep.varfn_bound_harmonic, "harmonic_cap": rep.harmonic_cap,
            "eq6_bound": rep.generic_bound_eq6, "n_var_bound": rep.n_var_bound,
            "curve_source": curve.source, "var_fn_hat": res.var_fn_hat,
            "n_var_fn_hat": n * res.var_fn_hat, "var_rel_stderr": rel, "exact_var_fn": exact,
            "verdict": analysis.verdict(n * res.var_fn_hat, rep.n_var_bound, rel,
                                        source if curve.source == analysis.ANALYTIC_LINEAR
                                        else analysis.PROBED),
            "seed": cfg.seed, "config": cfg.fingerprint(),
        })
    return rows, curve_rows


def run_bounds(cfg):
    results, failures = _sweep(cfg, _bounds_point)
    return [r for b, _ in results for r in b], [r for _, c in results for r in c], failures


def _curves_point(cfg, d):
    prob = cfgmod.build_problem(cfg, d)
    kappa, _ = resolve_kappa(cfg, prob)
    return _curves_for(cfg, prob, kappa)[1]


def run_curves(cfg):
    results, failures = _sweep(cfg, _curves_point)
    return [r for rs in results for r in rs], failures


# ---------------------------------------------------------------- entry point

def _emit(text: str, path: str):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser():
    p = argparse.ArgumentParser(prog="grdr", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("estimate", "GRDR vs standard MC"), ("bounds", "variance bounds"),
                        ("curves", "coupling curves C(i)"), ("selftest", "invariant suite")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="key = value experiment file")
        for f in fields(cfgmod.ExperimentConfig):
            sp.add_argument(f"--{f.name}", dest=f.name, default=None, metavar=f.name.upper())
        if name == "selftest":
            sp.add_argument("--quick", action="store_true", help="smaller sample sizes")
    return p


def load_config(args) -> cfgmod.ExperimentConfig:
    values = cfgmod.parse_file(args.config) if args.config else {}
    for f in fields(cfgmod.ExperimentConfig):
        v = getattr(args, f.name)
        if v is not None:
            values[f.name] = v
    return cfgmod.build_config(values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "selftest":
            from .selftest import run_selftest
            cfg = load_config(args) if (args.config or any(
                getattr(args, f.name) is not None for f in fields(cfgmod.ExperimentConfig))) else None
            ok = run_selftest(quick=args.quick, config=cfg)
            return EXIT_OK if ok else EXIT_SELFTEST
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except GrdrError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.command == "estimate":
        rows, reports, failures = run_estimate(cfg)
        _emit(to_csv(rows, ESTIMATE_COLUMNS), cfg.out)
        if cfg.report_out:
            Path(cfg.report_out).write_text(json.dumps(reports, indent=2, sort_keys=True) + "\n")
    elif args.command == "bounds":
        brows, crows, failures = run_bounds(cfg)
        _emit(to_csv(brows, BOUNDS_COLUMNS), cfg.bounds_out or cfg.out)
        if cfg.curves_out:
            Path(cfg.curves_out).write_text(to_csv(crows, CURVE_COLUMNS))
    else:
        crows, failures = run_curves(cfg)
        _emit(to_csv(crows, CURVE_COLUMNS), cfg.curves_out or cfg.out)
    if failures:
        for d, msg in failures:
            print(f"numerical failure at d={d}: {msg}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
