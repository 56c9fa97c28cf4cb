"""Pure-Python/numpy chain kernel, used when the compiled extension is absent."""

from dataclasses import dataclass

import numpy as np


@dataclass
class ChainState:
    """Mutable state of one GRDR chain.

    ``X`` tracks ``A @ U`` incrementally; ``k`` counts completed iterations.
    """

    U: np.ndarray
    X: np.ndarray
    running_sum: float
    k: int
    op_counter: int = 0
    worst_verify_error: float = 0.0


def _payoff(code, coef, drift, scalar, x):
    if code == 0:
        return scalar
    if code == 1:
        return float(coef @ x)
    v = float(np.mean(np.exp(drift + coef * x))) - scalar
    return v if v > 0.0 else 0.0


def run_chain(A, code, coef, drift, scalar, u0, depths, fresh, verify=False, payoff_ops=None):
    """One chain of the algorithm; returns the final :class:`ChainState`."""
    d = A.shape[0]
    payoff_ops = d if payoff_ops is None else payoff_ops
    U = np.array(u0, dtype=np.float64)
    X = A @ U
    st = ChainState(U, X, _payoff(code, coef, drift, scalar, X), 1, d * d + d + payoff_ops)
    afro = float(np.linalg.norm(A)) if verify else 1.0
    pos = 0
    for N in depths:
        N = int(N)
        new = fresh[pos:pos + N]
        pos += N
        st.X += A[:, :N] @ (new - st.U[:N])
        st.U[:N] = new
        st.running_sum += _payoff(code, coef, drift, scalar, st.X)
        st.k += 1
        st.op_counter += d * N + N + payoff_ops
        if verify:
            err = np.linalg.norm(st.X - A @ st.U) / (afro * np.linalg.norm(st.U) + 1e-300)
            st.worst_verify_error = max(st.worst_verify_error, float(err))
    return st


def run_chains(A, code, coef, drift, scalar, U0, depths, fresh, offsets, verify=False):
    """Same contract as the compiled ``run_chains``."""
    B = U0.shape[0]
    m = depths.shape[1]
    out = np.empty(B)
    worst = 0.0
    for b in range(B):
        st = run_chain(A, code, coef, drift, scalar, U0[b], depths[b], fresh[offsets[b]:], verify)
        out[b] = st.running_sum / (m + 1)
        worst = max(worst, st.worst_verify_error)
    return out, worst
