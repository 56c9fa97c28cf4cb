"""GRDR chains, the standard Monte Carlo baseline and the replication harness.

Randomness for a chain is drawn up front from its own stream, in this order:
the initial vector ``U`` (d normals), the ``n - 1`` depth uniforms, then all
fresh normals the chain will consume. Drawing in bulk keeps the inner loop
free of Python calls and lets the compiled and numpy kernels replay exactly
the same variates.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend, _fallback
from .errors import DimensionError
from .payoffs import evaluate_batch
from .rng import RngStream

DEFAULT_BLOCK = 1024


def fingerprint(*parts) -> str:
    h = hashlib.sha256("|".join(str(p) for p in parts).encode())
    return h.hexdigest()[:16]


def covariance_key(fac, spec=None) -> str:
    """Hash identifying the covariance; stable across factor constructions."""
    if spec is not None:
        return fingerprint(spec.describe(), hashlib.sha256(spec.entries.tobytes()).hexdigest())
    m = fac.entries @ fac.entries.T
    # rounded so Cholesky and PCA factors of one matrix share a key; +0.0 folds -0.0
    m = np.ascontiguousarray(np.round(m, 10) + 0.0)
    return fingerprint("from-factor", hashlib.sha256(m.tobytes()).hexdigest())


@dataclass(frozen=True)
class EstimatorResult:
    """Summary of a batch of independent estimator copies.

    For GRDR a copy is one chain output ``f_n``; for standard MC it is one
    payoff evaluation ``g(AU)``. ``var_fn_hat`` is the unbiased sample
    variance of the copies.
    """

    method: str
    dim: int
    estimate: float
    replications: int
    var_fn_hat: float
    mean_ops_per_replication: float
    mean_depth: float
    fingerprint: str = ""
    problem_key: str = ""
    seed: int | None = None
    n_iterations: int = 1
    total_ops: int = 0
    kurtosis: float = float("nan")
    values: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def stderr(self) -> float:
        return math.sqrt(self.var_fn_hat / self.replications)

    @property
    def var_rel_stderr(self) -> float:
        """Relative standard error of ``var_fn_hat`` (kurtosis-corrected)."""
        r = self.replications
        k = self.kurtosis if math.isfinite(self.kurtosis) else 3.0
        return math.sqrt(max(k - (r - 3) / (r - 1), 0.0) / r)

    def merge(self, other: "EstimatorResult") -> "EstimatorResult":
        """Pool two disjoint batches (Chan et al. pairwise update)."""
        na, nb = self.replications, other.replications
        n = na + nb
        delta = other.estimate - self.estimate
        m2 = self.var_fn_hat * (na - 1) + other.var_fn_hat * (nb - 1) + delta * delta * na * nb / n
        values = None
        if self.values is not None and other.values is not None:
            values = np.concatenate([self.values, other.values])
        return replace(
            self,
            estimate=self.estimate + delta * nb / n,
            replications=n,
            var_fn_hat=m2 / (n - 1),
            mean_ops_per_replication=(self.mean_ops_per_replication * na
                                      + other.mean_ops_per_replication * nb) / n,
            mean_depth=(self.mean_depth * na + other.mean_depth * nb) / n,
            total_ops=self.total_ops + other.total_ops,
            kurtosis=_kurtosis(values) if values is not None else float("nan"),
            values=values,
        )


def _kurtosis(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.size < 4:
        return float("nan")
    c = x - x.mean()
    m2 = np.mean(c * c)
    if m2 == 0:
        return float("nan")
    return float(np.mean(c ** 4) / (m2 * m2))


def _summarize(method, dim, values, ops, depth_sum, n_iter, seed, fp, key):
    values = np.asarray(values, dtype=np.float64)
    r = values.size
    # moments about the first value: exact for constant samples
    shifted = values - values[0]
    var = float(np.var(shifted, ddof=1)) if r > 1 else 0.0
    return EstimatorResult(
        method=method,
        dim=dim,
        estimate=float(values[0] + np.mean(shifted)),
        replications=r,
        var_fn_hat=var,
        mean_ops_per_replication=float(ops) / r,
        mean_depth=float(depth_sum) / r,
        fingerprint=fp,
        problem_key=key,
        seed=seed,
        n_iterations=n_iter,
        total_ops=int(ops),
        kurtosis=_kurtosis(values),
        values=values,
    )


def _check_dims(g, fac, sched=None):
    if g.dim != fac.dim or (sched is not None and sched.dim != fac.dim):
        raise DimensionError(
            f"dimension mismatch: payoff {g.dim}, factor {fac.dim}"
            + (f", schedule {sched.dim}" if sched is not None else ""))


def chain_ops(d: int, depths, payoff_ops: int) -> int:
    """Operations charged to one chain with the given resampling depths.

    ``d*d`` for the first ``X = AU``, one per Gaussian draw, ``payoff_ops``
    per payoff evaluation and ``d*N`` multiply-adds per incremental update.
    """
    depths = np.asarray(depths, dtype=np.int64)
    s = int(depths.sum())
    return d * d + d + payoff_ops + (d + 1) * s + payoff_ops * depths.size


def draw_chain_inputs(stream: RngStream, sched, n: int | None = None):
    """``(U0, depths, fresh)`` for one chain of ``n`` iterations."""
    d = sched.dim
    n = sched.n_iterations if n is None else n
    u0 = stream.standard_normal(d)
    if n > 1:
        depths = sched.sample_depth(stream.uniform(n - 1))
    else:
        depths = np.zeros(0, dtype=np.int64)
    fresh = stream.standard_normal(int(depths.sum()))
    return u0, depths, fresh


def grdr_chain(g, fac, sched, stream: RngStream, verify: bool = False, backend=None,
               return_state: bool = False):
    """Run one GRDR chain and return ``(f_n, ops, mean_depth)``.

    ``mean_depth`` is the average resampling depth over the ``n - 1`` loop
    iterations (``nan`` when ``n = 1``). With ``return_state=True`` the final
    :class:`~grdr._fallback.ChainState` is appended (numpy kernel only).
    With ``verify=True`` the incremental ``X`` is checked against a full
    ``A @ U`` after every iteration; an ``AssertionError`` is raised if the
    relative gap exceeds 1e-6.
    """
    _check_dims(g, fac, sched)
    u0, depths, fresh = draw_chain_inputs(stream, sched)
    code, coef, drift, scalar = g.kernel_args()
    ops = chain_ops(g.dim, depths, g.ops_per_eval)
    mean_depth = float(depths.mean()) if depths.size else float("nan")
    n = sched.n_iterations
    if return_state or (backend or _backend.default_backend()) == "python":
        st = _fallback.run_chain(np.asarray(fac.entries), code, coef, drift, scalar, u0, depths,
                                 fresh, verify, g.ops_per_eval)
        f_n, worst = st.running_sum / n, st.worst_verify_error
        assert st.op_counter == ops
    else:
        out, worst = _run_block(fac, g, u0[None, :], depths[None, :], fresh,
                                np.zeros(1, dtype=np.int64), verify, backend)
        f_n = float(out[0])
    if verify and worst > 1e-6:
        raise AssertionError(f"incremental X drifted from A@U: relative error {worst:.3g}")
    if return_state:
        return f_n, ops, mean_depth, st
    return f_n, ops, mean_depth


def _run_block(fac, g, U0, depths, fresh, offsets, verify, backend):
    run = _backend.get_run_chains(backend)
    code, coef, drift, scalar = g.kernel_args()
    a = np.asfortranarray(fac.entries, dtype=np.float64)
    return run(a, code, np.ascontiguousarray(coef), np.ascontiguousarray(drift), scalar,
               np.ascontiguousarray(U0), np.ascontiguousarray(depths, dtype=np.int64),
               np.ascontiguousarray(fresh), np.ascontiguousarray(offsets, dtype=np.int64),
               verify)


def replicate_grdr(g, fac, sched, R: int, seed: int, *, spec=None, backend=None,
                   block: int = DEFAULT_BLOCK, verify: bool = False) -> EstimatorResult:
    """Average ``R`` independent chains run on streams ``(seed, 0..R-1)``.

    Chains are processed in blocks of ``block`` and pooled with
    :meth:`EstimatorResult.merge`; the result does not depend on ``block``
    beyond floating-point rounding of the pooled moments.
    """
    if R < 2:
        raise ValueError("R must be at least 2")
    _check_dims(g, fac, sched)
    d, n = fac.dim, sched.n_iterations
    fp = fingerprint(covariance_key(fac, spec), g.describe(), fac.label, sched.kind, seed)
    key = fingerprint(covariance_key(fac, spec), g.describe())
    values = np.empty(R)
    total_ops = 0
    depth_sum = 0.0
    worst = 0.0
    for start in range(0, R, block):
        stop = min(start + block, R)
        B = stop - start
        U0 = np.empty((B, d))
        depths = np.empty((B, n - 1), dtype=np.int64)
        chunks = []
        offsets = np.zeros(B, dtype=np.int64)
        pos = 0
        for b in range(B):
            u0, dep, fr = draw_chain_inputs(RngStream(seed, start + b), sched, n)
            U0[b] = u0
            depths[b] = dep
            offsets[b] = pos
            pos += fr.size
            chunks.append(fr)
        fresh = np.concatenate(chunks) if chunks else np.zeros(0)
        out, w = _run_block(fac, g, U0, depths, fresh, offsets, verify, backend)
        worst = max(worst, w)
        values[start:stop] = out
        s = int(depths.sum())
        total_ops += B * (d * d + d + g.ops_per_eval) + (d + 1) * s + g.ops_per_eval * depths.size
        if n > 1:
            depth_sum += depths.mean(axis=1).sum()
    if verify and worst > 1e-6:
        raise AssertionError(f"incremental X drifted from A@U: relative error {worst:.3g}")
    mean_depth = depth_sum / R if n > 1 else float("nan")
    res = _summarize("grdr", d, values, total_ops, mean_depth * R, n, seed, fp, key)
    return res


def standard_mc(g, fac, n_samples: int, stream: RngStream, *, spec=None,
                block: int = 1 << 14) -> EstimatorResult:
    """Plain average of ``g(A U_j)`` over iid ``U_j``.

    Sample ``j`` uses normals ``j*d .. (j+1)*d - 1`` of ``stream``. Each sample
    is charged ``d*d`` multiply-adds, ``d`` draws and one payoff evaluation.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    _check_dims(g, fac)
    d = fac.dim
    at = np.asarray(fac.entries).T
    values = np.empty(n_samples)
    for start in range(0, n_samples, block):
        stop = min(start + block, n_samples)
        u = stream.standard_normal((stop - start, d))
        values[start:stop] = evaluate_batch(g, u @ at)
    per = d * d + d + g.ops_per_eval
    fp = fingerprint(covariance_key(fac, spec), g.describe(), fac.label, "mc", stream.seed)
    key = fingerprint(covariance_key(fac, spec), g.describe())
    res = _summarize("mc", d, values, per * n_samples, float(d) * n_samples, 1, stream.seed, fp, key)
    if n_samples == 1:
        res = replace(res, var_fn_hat=0.0)
    return res


def mc_ops_per_sample(d: int, payoff_ops: int) -> int:
    return d * d + d + payoff_ops


def matched_mc_samples(total_ops: float, d: int, payoff_ops: int) -> int:
    """MC sample count whose total op count is closest to ``total_ops``."""
    return max(int(round(total_ops / mc_ops_per_sample(d, payoff_ops))), 1)
