"""Payoff functions ``g`` and their closed-form oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import DimensionError

CONSTANT = "constant"
LINEAR = "linear"
BASKET_CALL = "basket_call"

# integer codes understood by the chain kernels
KIND_CODES = {CONSTANT: 0, LINEAR: 1, BASKET_CALL: 2}


@dataclass(frozen=True, eq=False)
class Payoff:
    """A payoff on R^d: constant, linear ``a^T x`` or a basket call.

    Build instances with :func:`constant`, :func:`linear` or
    :func:`basket_call` rather than directly.
    """

    kind: str
    dim: int
    c: float = 0.0
    a: np.ndarray | None = None
    sigmas: np.ndarray | None = None
    r: float = 0.0
    t: float = 1.0
    strike: float = 0.0
    kappa: float | None = None
    _coef: np.ndarray = field(init=False, repr=False)
    _drift: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = self.dim
        if self.kind == LINEAR:
            coef = np.array(self.a, dtype=np.float64)
            drift = np.zeros(d)
        elif self.kind == BASKET_CALL:
            s = np.array(self.sigmas, dtype=np.float64)
            coef = s * math.sqrt(self.t)
            drift = -0.5 * s * s * self.t
        elif self.kind == CONSTANT:
            coef = np.zeros(d)
            drift = np.zeros(d)
        else:
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        if coef.shape != (d,):
            raise DimensionError(f"payoff parameter vector has shape {coef.shape}, expected ({d},)")
        for arr in (coef, drift):
            arr.setflags(write=False)
        object.__setattr__(self, "_coef", coef)
        object.__setattr__(self, "_drift", drift)

    @property
    def discounted_strike(self) -> float:
        return self.strike * math.exp(-self.r * self.t)

    @property
    def ops_per_eval(self) -> int:
        """Arithmetic operations charged per evaluation (linear in d)."""
        return self.dim

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def kernel_args(self):
        """``(code, coef, drift, scalar)`` consumed by the chain kernels.

        ``scalar`` is ``c`` for constants and the discounted strike for
        basket calls.
        """
        scalar = self.c if self.kind == CONSTANT else self.discounted_strike
        return KIND_CODES[self.kind], self._coef, self._drift, float(scalar)

    def describe(self) -> str:
        if self.kind == CONSTANT:
            return f"constant(c={self.c!r},d={self.dim})"
        if self.kind == LINEAR:
            return "linear(a=" + ",".join(f"{x:.17g}" for x in self._coef) + ")"
        return ("basket_call(sigmas=" + ",".join(f"{x:.17g}" for x in self.sigmas)
                + f",r={self.r!r},t={self.t!r},K={self.strike!r})")


def constant(d: int, c: float) -> Payoff:
    return Payoff(CONSTANT, int(d), c=float(c))


def linear(a) -> Payoff:
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    return Payoff(LINEAR, a.size, a=a, kappa=float(np.linalg.norm(a)))


def basket_call(sigmas, r: float = 0.0, t: float = 1.0, strike: float = 1.0) -> Payoff:
    """Call on the equally weighted average of ``d`` unit-spot lognormal stocks."""
    s = np.atleast_1d(np.asarray(sigmas, dtype=np.float64))
    if t <= 0:
        raise ValueError("maturity t must be positive")
    return Payoff(BASKET_CALL, s.size, sigmas=s, r=float(r), t=float(t), strike=float(strike))


def evaluate(p: Payoff, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.dim,):
        raise DimensionError(f"expected a vector of length {p.dim}, got shape {x.shape}")
    if p.kind == CONSTANT:
        return p.c
    if p.kind == LINEAR:
        return float(p._coef @ x)
    avg = float(np.mean(np.exp(p._drift + p._coef * x)))
    return max(avg - p.discounted_strike, 0.0)


def evaluate_batch(p: Payoff, xs) -> np.ndarray:
    """Evaluate on each row of a (m, d) array."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != p.dim:
        raise DimensionError(f"expected shape (m, {p.dim}), got {xs.shape}")
    if p.kind == CONSTANT:
        return np.full(xs.shape[0], p.c)
    if p.kind == LINEAR:
        return xs @ p._coef
    avg = np.mean(np.exp(p._drift + p._coef * xs), axis=1)
    return np.maximum(avg - p.discounted_strike, 0.0)


def black_scholes_unit(sigma: float, t: float, strike: float, scale: float = 1.0) -> float:
    """``E[(exp(-sigma^2 t/2 + sigma sqrt(t) s Z) - strike)^+]`` for Z ~ N(0, 1).

    ``scale`` is the standard deviation ``s`` of the Gaussian input; with
    ``s = 1`` the underlying has unit mean and this is the undiscounted
    Black-Scholes call value.
    """
    vol = sigma * math.sqrt(t) * scale
    fwd = math.exp(0.5 * sigma * sigma * t * (scale * scale - 1.0))
    if strike <= 0:
        return fwd - strike
    if vol == 0:
        return max(fwd - strike, 0.0)
    d_plus = (math.log(fwd / strike) + 0.5 * vol * vol) / vol
    d_minus = d_plus - vol
    return float(fwd * ndtr(d_plus) - strike * ndtr(d_minus))


def analytic_mean(p: Payoff, spec=None) -> float | None:
    """Exact ``E g(X)`` when available, else ``None``.

    The basket call has a closed form only for ``d = 1``; the variance of
    ``X`` then scales the volatility.
    """
    if p.kind == CONSTANT:
        return p.c
    if p.kind == LINEAR:
        return 0.0
    if p.dim == 1:
        var = 1.0 if spec is None else float(spec.entries[0, 0])
        return black_scholes_unit(float(p.sigmas[0]), p.t, p.discounted_strike, math.sqrt(var))
    return None


def analytic_variance_linear(a, spec) -> float:
    """``a^T M a``."""
    a = np.asarray(a, dtype=np.float64)
    m = spec.entries if hasattr(spec, "entries") else np.asarray(spec, dtype=np.float64)
    if a.shape != (m.shape[0],):
        raise DimensionError(f"a has shape {a.shape}, M is {m.shape}")
    return float(a @ m @ a)
