"""Fixed-seed invariant checks behind ``grdr selftest``."""

from __future__ import annotations

import math
import time

import numpy as np

from . import _backend, analysis, covmodel, estimator, factor, payoffs, schedule
from .rng import RngStream

SEED = 20240601


def _factor_residuals(quick):
    worst = 0.0
    dims = (2, 8, 64) if quick else (2, 8, 64, 256)
    for k, d in enumerate(dims):
        specs = [
            covmodel.make_eigen_decay(d, -2.0, 1.0, covmodel.RANDOM_ROTATION, SEED + k),
            covmodel.make_equicorrelation(d, 0.3),
        ]
        for spec in specs:
            for fac in (factor.cholesky_factor(spec), factor.pca_factor(spec)):
                rel = fac.residual(spec) / max(spec.frobenius, 1.0)
                worst = max(worst, rel)
    return worst <= 1e-8, f"max relative residual {worst:.2e}"


def _schedule_laws(quick):
    draws = 200_000 if quick else 1_000_000
    sched = schedule.harmonic(16)
    u = RngStream(SEED, 1).uniform(draws)
    depth = sched.sample_depth(u)
    se = depth.std(ddof=1) / math.sqrt(draws)
    ok_mean = abs(depth.mean() - sched.expected_N) <= 4 * se
    tails = np.array([(depth > i).mean() for i in range(16)])
    tol = 4 * np.sqrt(sched.q * (1 - sched.q) / draws) + 1e-12
    ok_tail = bool(np.all(np.abs(tails - sched.q) <= tol))
    fac = factor.pca_factor(covmodel.make_eigen_decay(16, -2.0))
    ok_h = np.array_equal(schedule.from_factor(fac).q, sched.q)
    ok_n = all(schedule.harmonic(d).n_iterations * schedule.harmonic(d).expected_N >= d
               for d in (1, 2, 4, 100, 1000))
    return ok_mean and ok_tail and ok_h and ok_n, (
        f"E(N) {depth.mean():.4f} vs {sched.expected_N:.4f}; tails {ok_tail}; "
        f"harmonic {ok_h}; ceiling {ok_n}")


def _unbiased(quick):
    R = 2000 if quick else 10000
    msgs, ok = [], True
    cases = []
    spec = covmodel.make_eigen_decay(8, -2.0, 1.0, covmodel.RANDOM_ROTATION, SEED)
    cases.append((payoffs.linear(np.ones(8)), spec, "linear d=8"))
    spec1 = covmodel.make_eigen_decay(1, -2.0)
    cases.append((payoffs.basket_call([0.2], 0.0, 1.0, 1.0), spec1, "basket d=1"))
    for g, spec, name in cases:
        fac = factor.pca_factor(spec)
        res = estimator.replicate_grdr(g, fac, schedule.from_factor(fac), R, SEED, spec=spec)
        mu = payoffs.analytic_mean(g, spec)
        z = (res.estimate - mu) / res.stderr
        ok &= abs(z) <= 4
        msgs.append(f"{name} z={z:+.2f}")
    return ok, "; ".join(msgs)


def _variance_bounds(quick):
    R = 2000 if quick else 5000
    ok, worst = True, 0.0
    for k, d in enumerate((4, 16)):
        spec = covmodel.make_eigen_decay(d, -2.5, 1.0, covmodel.RANDOM_ROTATION, SEED + k)
        a = RngStream(SEED, 100 + k).standard_normal(d)
        fac = factor.pca_factor(spec)
        curve = analysis.coupling_curve_linear(a, fac)
        for sched in (schedule.from_factor(fac), schedule.harmonic(d)):
            res = estimator.replicate_grdr(payoffs.linear(a), fac, sched, R, SEED + k)
            lhs = sched.n_iterations * res.var_fn_hat
            allowed = analysis.bound_n_var(curve, sched) * (1 + 5 * res.var_rel_stderr)
            exact = analysis.linear_var_fn(a, fac, sched)
            ok &= lhs <= allowed
            ok &= exact <= analysis.bound_eq6(curve, sched) * (1 + 1e-12)
            ok &= abs(res.var_fn_hat - exact) <= 4 * res.var_rel_stderr * exact
            worst = max(worst, lhs / allowed)
        ok &= abs(analysis.bound_eq6(curve, schedule.ones(d)) - 2 * curve.values[0]) <= \
            1e-12 * curve.values[0]
    return ok, f"max n*Var/bound {worst:.3f}"


def _incremental(quick):
    spec = covmodel.make_eigen_decay(32, -2.0, 1.0, covmodel.RANDOM_ROTATION, SEED)
    fac = factor.pca_factor(spec)
    sched = schedule.QSchedule(schedule.from_factor(fac).q, "factor", n_override=200)
    g = payoffs.basket_call(np.full(32, 0.3), 0.0, 1.0, 1.0)
    try:
        estimator.replicate_grdr(g, fac, sched, 20, SEED, verify=True)
    except AssertionError as exc:
        return False, str(exc)
    return True, "X tracks A@U over 200 iterations"


def _backends(quick):
    if not _backend.HAVE_EXTENSION:
        return True, "compiled kernel not built; numpy fallback only"
    spec = covmodel.make_equicorrelation(12, 0.4)
    fac = factor.pca_factor(spec)
    g = payoffs.basket_call(np.full(12, 0.25), 0.01, 1.0, 0.95)
    sched = schedule.from_factor(fac)
    a = estimator.replicate_grdr(g, fac, sched, 50, SEED, backend="cython")
    b = estimator.replicate_grdr(g, fac, sched, 50, SEED, backend="python")
    gap = float(np.max(np.abs(a.values - b.values)))
    return gap <= 1e-12, f"max |cython - python| = {gap:.1e}"


CHECKS = [
    ("factor residuals", _factor_residuals),
    ("schedule laws", _schedule_laws),
    ("unbiasedness on oracles", _unbiased),
    ("variance bounds on linear oracles", _variance_bounds),
    ("incremental update", _incremental),
    ("backend agreement", _backends),
]


def run_selftest(quick: bool = False, config=None, out=print) -> bool:
    """Run every check, printing one PASS/FAIL line each; True if all pass."""
    if config is not None:
        out(f"PASS config validation ({config.fingerprint()})")
    all_ok = True
    t0 = time.perf_counter()
    for name, check in CHECKS:
        try:
            ok, detail = check(quick)
        except Exception as exc:  # report, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    out(f"{'ALL PASS' if all_ok else 'FAILURES'} in {time.perf_counter() - t0:.1f}s")
    return all_ok
