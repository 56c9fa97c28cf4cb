"""Coupling covariances ``C(i)``, variance bounds and efficiency comparisons.

``C(i) = Cov(f(U), f(U'))`` where ``U'`` redraws the first ``i`` coordinates
of ``U`` and keeps the rest. For linear payoffs the curve is known in closed
form (``C(i) = sum_{j>i} w_j^2`` with ``w = A^T a``); otherwise it is
estimated from coupled pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import GrdrError
from .factor import pca_factor
from .payoffs import evaluate_batch
from .rng import RngStream

EMPIRICAL = "empirical"
ANALYTIC_LINEAR = "analytic_linear"
SUPPLIED = "supplied"
PROBED = "probed"

# all indices are sampled up to this dimension, a log grid beyond it
FULL_GRID_MAX_D = 64


@dataclass(frozen=True, eq=False)
class CouplingCurve:
    """Values of ``C(i)`` at ``indices`` (all of ``0..d`` for analytic curves)."""

    dim: int
    indices: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray | None = None
    source: str = ANALYTIC_LINEAR
    pairs: int = 0

    def at(self, i: int) -> float:
        pos = np.searchsorted(self.indices, i)
        if pos >= len(self.indices) or self.indices[pos] != i:
            raise KeyError(f"C({i}) was not evaluated")
        return float(self.values[pos])

    def isotonic(self) -> np.ndarray:
        """Nonincreasing least-squares fit of the values (weights ``1/se^2``)."""
        if self.source == ANALYTIC_LINEAR:
            return np.array(self.values)
        w = None
        if self.stderrs is not None:
            se = np.where(self.stderrs > 0, self.stderrs, np.min(self.stderrs[self.stderrs > 0],
                                                                 initial=1.0))
            w = 1.0 / se ** 2
        return np.asarray(isotonic_regression(self.values, weights=w, increasing=False).x)

    def dense(self) -> np.ndarray:
        """``C(0..d)`` ready for the bounds.

        Empirical curves are clamped to be nonincreasing and nonnegative, pinned
        to ``C(d) = 0``, and filled between grid points with the value at the
        nearest evaluated index to the left (an upper bound for a
        nonincreasing curve).
        """
        vals = self.isotonic()
        if self.source != ANALYTIC_LINEAR:
            vals = np.maximum(vals, 0.0)
        full = np.empty(self.dim + 1)
        idx = np.arange(self.dim + 1)
        left = np.searchsorted(self.indices, idx, side="right") - 1
        if np.any(left < 0):
            raise GrdrError("curve must include index 0")
        full[:] = vals[left]
        full[self.dim] = 0.0
        return full


@dataclass(frozen=True)
class BoundReport:
    """Theoretical variance bounds for one (factor, schedule, payoff) setting."""

    dim: int
    n_iterations: int
    kappa_used: float
    kappa_source: str
    sigma_bound: float          # kappa^2 tr(M)
    varfn_bound_factor: float   # (2 kappa^2/d) (sum sqrt((A^T A)_ii))^2
    varfn_bound_pca: float      # (2 kappa^2/d) (sum sqrt(lambda_i))^2
    varfn_bound_harmonic: float  # (2(1 + ln d)/d) sum C(i)
    harmonic_cap: float         # 2(1 + ln d) C(0)
    generic_bound_eq6: float
    n_var_bound: float          # bound on n Var(f_n)

    def as_row(self) -> dict:
        return dict(self.__dict__)


def grid_indices(d: int) -> np.ndarray:
    """All of ``0..d`` for small d, otherwise 0, d and powers of two between."""
    if d <= FULL_GRID_MAX_D:
        return np.arange(d + 1)
    pts = {0, d}
    k = 1
    while k < d:
        pts.add(k)
        pts.add(min(d, k + k // 2))
        k *= 2
    return np.array(sorted(pts))


def _cov_with_jackknife(x: np.ndarray, y: np.ndarray):
    """Unbiased sample covariance and its leave-one-out jackknife stderr."""
    n = x.size
    xc = x - x.mean()
    yc = y - y.mean()
    sx, sy, sxy = xc.sum(), yc.sum(), xc @ yc
    cov = (sxy - sx * sy / n) / (n - 1)
    loo = ((sxy - xc * yc) - (sx - xc) * (sy - yc) / (n - 1)) / (n - 2)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return float(cov), se


def coupling_curve_empirical(g, fac, indices=None, pairs: int = 10000,
                             stream: RngStream | None = None, block: int = 1 << 15) -> CouplingCurve:
    """Estimate ``C(i)`` from ``pairs`` coupled draws per index.

    Each index uses fresh draws, so estimates at different indices are
    independent.
    """
    if pairs < 3:
        raise ValueError("pairs must be at least 3")
    d = fac.dim
    stream = stream or RngStream(0, 0)
    idx = grid_indices(d) if indices is None else np.unique(np.asarray(indices, dtype=np.int64))
    if idx.size == 0 or idx[0] < 0 or idx[-1] > d:
        raise ValueError(f"indices must lie in 0..{d}")
    at = np.asarray(fac.entries).T
    vals = np.empty(idx.size)
    ses = np.empty(idx.size)
    for k, i in enumerate(idx):
        fx = np.empty(pairs)
        fy = np.empty(pairs)
        for start in range(0, pairs, block):
            stop = min(start + block, pairs)
            u = stream.standard_normal((stop - start, d))
            v = u.copy()
            if i:
                v[:, :i] = stream.standard_normal((stop - start, int(i)))
            fx[start:stop] = evaluate_batch(g, u @ at)
            fy[start:stop] = evaluate_batch(g, v @ at)
        vals[k], ses[k] = _cov_with_jackknife(fx, fy)
    return CouplingCurve(d, idx, vals, ses, EMPIRICAL, pairs)


def _suffix_sums(x: np.ndarray) -> np.ndarray:
    """``s[i] = sum_{j >= i} x[j]`` with ``s[len(x)] = 0``, summed smallest index last."""
    out = np.zeros(x.size + 1)
    out[:-1] = np.cumsum(x[::-1])[::-1]
    return out


def coupling_curve_linear(a, fac) -> CouplingCurve:
    """Exact ``C(0..d)`` for ``g(x) = a^T x``."""
    a = np.asarray(a, dtype=np.float64)
    w = np.asarray(fac.entries).T @ a
    vals = _suffix_sums(w * w)
    return CouplingCurve(fac.dim, np.arange(fac.dim + 1), vals, None, ANALYTIC_LINEAR)


def bound_lemma41(fac, kappa: float) -> np.ndarray:
    """``kappa^2 * sum_{j > i} (A^T A)_jj`` for ``i = 0..d-1``."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    return kappa * kappa * _suffix_sums(np.asarray(fac.col_sq_norms, dtype=np.float64))[:-1]


def _diff_over_q(curve, sched) -> float:
    c = curve.dense() if isinstance(curve, CouplingCurve) else np.asarray(curve, dtype=np.float64)
    if c.size != sched.dim + 1:
        raise ValueError(f"curve has {c.size} points, expected {sched.dim + 1}")
    return math.fsum((c[:-1] - c[1:]) / sched.q)


def bound_n_var(curve, sched) -> float:
    """Bound on ``n Var(f_n)``: ``2 sum (C(i) - C(i+1)) / q_i``."""
    return 2.0 * _diff_over_q(curve, sched)


def bound_eq6(curve, sched) -> float:
    """Bound on ``Var(f_n)``: ``(2/d) (sum q) (sum (C(i) - C(i+1)) / q_i)``."""
    return 2.0 / sched.dim * sched.expected_N * _diff_over_q(curve, sched)


def bound_harmonic(curve):
    """Return ``(bound, cap)`` for the harmonic schedule.

    ``bound = (2(1 + ln d)/d) sum_{i<d} C(i)`` and ``cap = 2(1 + ln d) C(0)``.
    """
    c = curve.dense() if isinstance(curve, CouplingCurve) else np.asarray(curve, dtype=np.float64)
    d = c.size - 1
    factor = 2.0 * (1.0 + math.log(d))
    return factor / d * math.fsum(c[:-1]), factor * float(c[0])


def bound_factor_q(fac, kappa: float) -> float:
    """``(2 kappa^2/d) (sum_i sqrt((A^T A)_ii))^2``; with PCA this is the eigenvalue bound."""
    c = np.asarray(fac.col_sq_norms, dtype=np.float64)
    if np.any(np.diff(c) > 0):
        raise GrdrError("column square norms must be nonincreasing; apply permute_decreasing")
    s = math.fsum(np.sqrt(np.maximum(c, 0.0)))
    return 2.0 * kappa * kappa / fac.dim * s * s


def sigma_bound(fac, kappa: float) -> float:
    """``kappa^2 tr(M)``, computed as ``kappa^2 tr(A^T A)``."""
    return kappa * kappa * math.fsum(fac.col_sq_norms)


def bound_report(curve, fac, sched, kappa: float, kappa_source: str = SUPPLIED) -> BoundReport:
    pca_bound = float("nan")
    if fac.eigenvalues is not None:
        lam = np.maximum(np.asarray(fac.eigenvalues), 0.0)
        s = math.fsum(np.sqrt(lam))
        pca_bound = 2.0 * kappa * kappa / fac.dim * s * s
    try:
        factor_bound = bound_factor_q(fac, kappa)
    except GrdrError:
        factor_bound = float("nan")
    harm, cap = bound_harmonic(curve)
    return BoundReport(
        dim=fac.dim,
        n_iterations=sched.n_iterations,
        kappa_used=float(kappa),
        kappa_source=kappa_source,
        sigma_bound=sigma_bound(fac, kappa),
        varfn_bound_factor=factor_bound,
        varfn_bound_pca=pca_bound,
        varfn_bound_harmonic=harm,
        harmonic_cap=cap,
        generic_bound_eq6=bound_eq6(curve, sched),
        n_var_bound=bound_n_var(curve, sched),
    )


def verdict(observed: float, bound: float, rel_err: float, kappa_source: str = SUPPLIED,
            allowance: float = 5.0) -> str:
    """``"pass"``/``"fail"``, or ``"inconclusive"`` for failures under a probed kappa."""
    if observed <= bound * (1.0 + allowance * rel_err):
        return "pass"
    return "inconclusive" if kappa_source == PROBED else "fail"


def probe_kappa(g, spec, probes: int = 4096, stream: RngStream | None = None,
                scales=(0.0, 0.5, 0.9)) -> float:
    """Empirical lower estimate of the (kappa, M)-Lipschitz constant of ``g``.

    Takes the largest ratio ``sqrt(mean (g(Y) - g(Y'))^2 / mean ||Y - Y'||^2)``
    over valid couplings: ``Y' = c Y`` for each ``c`` in ``scales``, and pairs
    that redraw the first ``i`` PCA coordinates for ``i`` in ``{1, d/2, d}``.
    Every coupling has ``Cov(Y') <= M``, so the result never exceeds the true
    constant up to sampling noise.
    """
    if probes < 1:
        raise ValueError("probes must be positive")
    stream = stream or RngStream(0, 0)
    fac = pca_factor(spec)
    d = spec.dim
    at = np.asarray(fac.entries).T
    u = stream.standard_normal((probes, d))
    y = u @ at
    gy = evaluate_batch(g, y)
    best = 0.0

    def ratio(y2):
        num = float(np.mean((gy - evaluate_batch(g, y2)) ** 2))
        den = float(np.mean(np.sum((y - y2) ** 2, axis=1)))
        return math.sqrt(num / den) if den > 0 else 0.0

    for c in scales:
        best = max(best, ratio(c * y))
    for i in sorted({1, max(d // 2, 1), d}):
        v = u.copy()
        v[:, :i] = stream.standard_normal((probes, i))
        best = max(best, ratio(v @ at))
    return best


def efficiency_report(mc, grdr, eps=(1e-2, 1e-3)) -> dict:
    """Compare standard MC and GRDR at equal arithmetic cost.

    ``cost_matched_ratio`` is ``(Var_mc * ops_mc) / (Var_grdr * ops_grdr)``:
    the factor by which GRDR's estimator variance is smaller than MC's for
    the same number of operations.
    """
    if mc.problem_key != grdr.problem_key:
        raise GrdrError("fingerprint mismatch: results are for different payoff/covariance")
    var_mc, var_g = mc.var_fn_hat, grdr.var_fn_hat
    ops_mc, ops_g = mc.mean_ops_per_replication, grdr.mean_ops_per_replication
    ratio = var_mc / var_g if var_g > 0 else (1.0 if var_mc == 0 else math.inf)
    work_mc, work_g = var_mc * ops_mc, var_g * ops_g
    setup = float(mc.dim) ** 3
    eff = work_mc / work_g if work_g > 0 else (1.0 if work_mc == 0 else math.inf)
    return {
        "problem_key": mc.problem_key,
        "variance_ratio": ratio,
        "cost_matched_ratio": eff,
        "ops_per_copy": {"mc": ops_mc, "grdr": ops_g},
        "variance_per_copy": {"mc": var_mc, "grdr": var_g},
        "factorization_ops": setup,
        "cost_model": [
            {"eps": e, "mc": setup + work_mc / e ** 2, "grdr": setup + work_g / e ** 2}
            for e in eps
        ],
    }


def linear_var_fn(a, fac, sched) -> float:
    """Exact ``Var(f_n)`` of a GRDR chain for ``g(x) = a^T x``.

    Coordinate ``j`` survives ``m`` iterations untouched with probability
    ``(1 - q_{j-1})^m``, so the lag-``m`` autocovariance of ``f(V^(k))`` is
    ``sum_j w_j^2 (1 - q_{j-1})^m`` with ``w = A^T a``.
    """
    w = np.asarray(fac.entries).T @ np.asarray(a, dtype=np.float64)
    w2 = w * w
    keep = 1.0 - np.asarray(sched.q)
    n = sched.n_iterations
    total = n * math.fsum(w2)
    p = np.ones_like(keep)
    for m in range(1, n):
        p *= keep
        total += 2.0 * (n - m) * float(w2 @ p)
    return total / (n * n)
