"""Compare the compiled chain kernel with the pure-Python fallback.

    python benchmarks/bench_chain.py [--R 2000] [--d 16 64 256]

Two timings per backend: ``kernel`` runs only the chain loop on variates
drawn once up front, ``total`` is a full ``replicate_grdr`` call including
the per-chain stream setup and drawing (shared by both backends). Both
backends consume identical variates, so the last column is the largest
difference between their chain outputs.
"""

import argparse
import time

import numpy as np

from grdr import _backend, covmodel, estimator, factor, payoffs, schedule
from grdr.rng import RngStream


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _draw(sched, R):
    d, n = sched.dim, sched.n_iterations
    U0 = np.empty((R, d))
    depths = np.empty((R, n - 1), dtype=np.int64)
    offsets = np.zeros(R, dtype=np.int64)
    chunks, pos = [], 0
    for b in range(R):
        U0[b], depths[b], fr = estimator.draw_chain_inputs(RngStream(1, b), sched, n)
        offsets[b] = pos
        pos += fr.size
        chunks.append(fr)
    return U0, depths, np.concatenate(chunks), offsets


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--R", type=int, default=2000)
    ap.add_argument("--d", type=int, nargs="+", default=[16, 64, 256])
    ap.add_argument("--payoff", choices=["linear", "basket_call"], default="basket_call")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = _backend.available()
    print(f"backends: {', '.join(backends)}")
    print(f"{'d':>6} {'backend':>8} {'kernel s':>10} {'speedup':>8} {'total s':>10} "
          f"{'speedup':>8} {'max|diff|':>10}")
    for d in args.d:
        spec = covmodel.make_eigen_decay(d, -2.0, 1.0, covmodel.RANDOM_ROTATION, d)
        fac = factor.pca_factor(spec)
        sched = schedule.from_factor(fac)
        if args.payoff == "linear":
            g = payoffs.linear(np.full(d, d ** -0.5))
        else:
            g = payoffs.basket_call(np.full(d, 0.2))
        inputs = _draw(sched, args.R)
        kernel, total = {}, {}
        for b in backends:
            kernel[b] = _time(lambda: estimator._run_block(fac, g, *inputs, False, b)[0],
                              args.repeat)
            total[b] = _time(lambda: estimator.replicate_grdr(g, fac, sched, args.R, 1,
                                                              backend=b), args.repeat)[0]
        ref = kernel["python"][1]
        for b in backends:
            sec, vals = kernel[b]
            diff = float(np.max(np.abs(vals - ref)))
            print(f"{d:>6} {b:>8} {sec:>10.3f} {kernel['python'][0] / sec:>8.1f} "
                  f"{total[b]:>10.3f} {total['python'] / total[b]:>8.1f} {diff:>10.1e}")


if __name__ == "__main__":
    main()
