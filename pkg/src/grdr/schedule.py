"""Resampling schedules ``q`` and the law of the resampling depth ``N``.

A schedule fixes ``P(N > i) = q_i`` for ``i = 0..d-1`` together with the
chain length ``n = ceil(d / sum(q))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ScheduleError

# from_factor tolerates monotonicity violations this small (eigensolver noise)
_MONOTONE_SLACK = 1e-14


def iteration_count(q) -> int:
    """``ceil(d / sum(q))`` evaluated exactly on the float values of ``q``."""
    total = sum(map(Fraction, map(float, q)))
    return max(math.ceil(Fraction(len(q)) / total), 1)


@dataclass(frozen=True, eq=False)
class QSchedule:
    """Validated q-vector with derived quantities.

    ``cum_mass[i-1]`` holds ``P(N <= i) = 1 - q_i`` for ``i = 1..d``
    (with ``q_d = 0``).
    """

    q: np.ndarray
    kind: str = "explicit"
    n_override: int | None = None

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64, copy=True)
        _check(q)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        if self.n_override is not None and self.n_override < 1:
            raise ScheduleError("n_override must be a positive integer")

    @property
    def dim(self) -> int:
        return len(self.q)

    @property
    def expected_N(self) -> float:
        return math.fsum(self.q)

    @cached_property
    def n_iterations(self) -> int:
        if self.n_override is not None:
            return int(self.n_override)
        return iteration_count(self.q)

    @property
    def cum_mass(self) -> np.ndarray:
        tail = np.append(self.q[1:], 0.0)
        return 1.0 - tail

    def sample_depth(self, u):
        """Map uniform variate(s) ``u`` in (0, 1) to depths in ``1..d``.

        ``N = #{i : q_i >= u}``, so ``N > i`` exactly when ``u <= q_i``.
        Works on scalars and arrays (binary search).
        """
        neg = -self.q  # ascending
        n = np.searchsorted(neg, -np.asarray(u, dtype=np.float64), side="right")
        if np.ndim(n) == 0:
            return int(n)
        return n.astype(np.int64)

    def save(self, path) -> None:
        Path(path).write_text("".join(f"{x:.17g}\n" for x in self.q))


def _check(q: np.ndarray) -> None:
    if q.ndim != 1 or q.size == 0:
        raise ScheduleError("q must be a non-empty vector")
    if not np.all(np.isfinite(q)):
        raise ScheduleError("q contains non-finite values")
    if q[0] != 1.0:
        raise ScheduleError(f"q_0 must equal 1, got {q[0]!r}")
    bad = np.nonzero(np.diff(q) > 0)[0]
    if bad.size:
        i = int(bad[0]) + 1
        raise ScheduleError(f"q is not non-increasing: q_{i}={q[i]!r} > q_{i-1}={q[i-1]!r}")
    if q[-1] <= 0:
        raise ScheduleError(f"q_{len(q)-1} must be positive, got {q[-1]!r}")


def harmonic(d: int) -> QSchedule:
    """``q_i = 1 / (i + 1)``."""
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    return QSchedule(1.0 / np.arange(1, int(d) + 1, dtype=np.float64), kind="harmonic")


def ones(d: int) -> QSchedule:
    """``q = 1``: every iteration redraws all coordinates (standard MC)."""
    return QSchedule(np.ones(int(d)), kind="ones")


def from_factor(fac) -> QSchedule:
    """``q_{i-1} = sqrt((A^T A)_ii / (A^T A)_11)``.

    Requires strictly positive, nonincreasing column square norms; apply
    :func:`grdr.factor.permute_decreasing` first for unsorted factors.
    """
    c = np.asarray(fac.col_sq_norms, dtype=np.float64)
    if np.any(c <= 0):
        i = int(np.argmax(c <= 0))
        raise ScheduleError(
            f"column {i} of the factor has zero norm; singular factors cannot define q")
    rise = np.diff(c)
    if np.any(rise > 0):
        i = int(np.argmax(rise > 0)) + 1
        raise ScheduleError(
            f"column square norms increase at index {i}; apply permute_decreasing first")
    q = np.sqrt(c / c[0])
    q[0] = 1.0
    viol = np.diff(q)
    if np.any(viol > _MONOTONE_SLACK):
        raise ScheduleError("q from factor is not monotone")
    q = np.minimum.accumulate(q)
    return QSchedule(q, kind="factor")


def explicit(q) -> QSchedule:
    """Validate a user-supplied q-vector."""
    return QSchedule(np.atleast_1d(np.asarray(q, dtype=np.float64)), kind="explicit")


def load(path) -> QSchedule:
    """Read a single-column text file of q values."""
    vals = []
    for ln in Path(path).read_text().splitlines():
        ln = ln.strip()
        if ln and not ln.startswith("#"):
            vals.append(float(ln))
    sched = explicit(vals)
    return QSchedule(sched.q, kind="file")
