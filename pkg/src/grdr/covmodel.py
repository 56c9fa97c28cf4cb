"""Covariance matrices used as inputs to the estimators.

Three families are provided: a power-law eigenvalue decay (optionally rotated
by a Haar-random orthogonal matrix), equicorrelation, and explicit matrices
read from disk or passed in by the caller.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import NotPSDError

logger = logging.getLogger(__name__)

#: Relative (to the Frobenius norm) tolerance for negative eigenvalues/pivots.
TOL_PSD = 1e-8

DIAGONAL = "diagonal"
RANDOM_ROTATION = "random_rotation"


@dataclass(frozen=True)
class EigenDecay:
    gamma: float
    lambda1: float
    orient: str = DIAGONAL
    seed: int | None = None

    def describe(self) -> str:
        tag = f"eigen_decay(gamma={self.gamma!r},lambda1={self.lambda1!r},orient={self.orient}"
        if self.orient == RANDOM_ROTATION:
            tag += f",seed={self.seed}"
        return tag + ")"


@dataclass(frozen=True)
class Equicorrelation:
    rho: float

    def describe(self) -> str:
        return f"equicorrelation(rho={self.rho!r})"


@dataclass(frozen=True)
class Explicit:
    source: str = "inline"
    symmetry_residual: float = 0.0

    def describe(self) -> str:
        return f"explicit({self.source})"


Family = Union[EigenDecay, Equicorrelation, Explicit]


@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """A symmetric positive semi-definite matrix ``M`` plus its provenance.

    The stored array is read-only; share the spec freely between replications.
    """

    entries: np.ndarray
    family: Family = field(default_factory=Explicit)

    def __post_init__(self):
        m = np.array(self.entries, dtype=np.float64, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError(f"covariance must be a non-empty square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("covariance contains non-finite entries")
        if not np.array_equal(m, m.T):
            raise ValueError("covariance entries must be exactly symmetric; use from_matrix()")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    @property
    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries, "fro"))

    def describe(self) -> str:
        return self.family.describe()


@dataclass(frozen=True)
class Diagnostics:
    symmetry_residual: float
    min_eigenvalue: float
    trace: float
    frobenius: float
    is_symmetric: bool
    is_psd: bool

    @property
    def ok(self) -> bool:
        return self.is_symmetric and self.is_psd


def haar_orthogonal(d: int, seed: int) -> np.ndarray:
    """Seeded Haar-distributed orthogonal matrix (QR with sign-fixed R)."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    z = gen.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def make_eigen_decay(d: int, gamma: float, lambda1: float = 1.0,
                     orient: str = DIAGONAL, seed: int | None = None) -> CovarianceSpec:
    """Covariance with eigenvalues ``lambda1 * i**gamma`` for ``i = 1..d``.

    With ``orient="random_rotation"`` the eigenbasis is a Haar-random
    orthogonal matrix generated from ``seed``.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    if not lambda1 > 0:
        raise ValueError(f"lambda1 must be positive, got {lambda1}")
    d = int(d)
    lam = eigen_decay_values(d, gamma, lambda1)
    if orient == DIAGONAL:
        m = np.diag(lam)
    elif orient == RANDOM_ROTATION:
        if seed is None:
            raise ValueError("random_rotation orientation requires a seed")
        q = haar_orthogonal(d, seed)
        m = (q * lam) @ q.T
        m = 0.5 * (m + m.T)
    else:
        raise ValueError(f"unknown orientation {orient!r}")
    return CovarianceSpec(m, EigenDecay(float(gamma), float(lambda1), orient, seed))


def eigen_decay_values(d: int, gamma: float, lambda1: float = 1.0) -> np.ndarray:
    return lambda1 * np.arange(1, d + 1, dtype=np.float64) ** float(gamma)


def make_equicorrelation(d: int, rho: float) -> CovarianceSpec:
    """Unit-diagonal matrix with every off-diagonal entry equal to ``rho``."""
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    d = int(d)
    lo = -1.0 / (d - 1) if d > 1 else -np.inf
    if not (lo <= rho <= 1.0):
        raise NotPSDError(f"rho={rho} outside the PSD range [{lo}, 1] for d={d}")
    m = np.full((d, d), float(rho))
    np.fill_diagonal(m, 1.0)
    return CovarianceSpec(m, Equicorrelation(float(rho)))


def from_matrix(m, source: str = "inline") -> CovarianceSpec:
    """Ingest a user matrix, symmetrizing it as ``(M + M^T) / 2``."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    resid = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if resid > 0:
        logger.info("symmetrizing %s (residual %.3g)", source, resid)
    return CovarianceSpec(0.5 * (m + m.T), Explicit(source, resid))


def validate(spec_or_matrix, tol_psd: float = TOL_PSD) -> Diagnostics:
    """Symmetry residual, smallest eigenvalue and trace of a matrix.

    Accepts a :class:`CovarianceSpec` or any square array (which need not be
    symmetric; the eigenvalue estimate then uses its symmetric part).
    """
    m = spec_or_matrix.entries if isinstance(spec_or_matrix, CovarianceSpec) else np.asarray(
        spec_or_matrix, dtype=np.float64)
    resid = float(np.max(np.abs(m - m.T)))
    lam_min = float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])
    fro = float(np.linalg.norm(m, "fro"))
    return Diagnostics(
        symmetry_residual=resid,
        min_eigenvalue=lam_min,
        trace=float(np.trace(m)),
        frobenius=fro,
        is_symmetric=resid == 0.0,
        is_psd=lam_min >= -tol_psd * fro,
    )


def write_matrix(path, m, header: str | None = None) -> None:
    """Write ``m`` as text: optional ``# header`` line, then ``d``, then rows."""
    m = np.asarray(m, dtype=np.float64)
    lines = []
    if header:
        lines.extend("# " + h for h in header.splitlines())
    lines.append(str(m.shape[0]))
    lines.extend(" ".join(f"{x:.17g}" for x in row) for row in m)
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    """Parse the plain-text matrix format written by :func:`write_matrix`."""
    rows = [ln for ln in Path(path).read_text().splitlines()
            if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    try:
        d = int(rows[0])
    except ValueError:
        raise ValueError(f"{path}: first line must be the dimension, got {rows[0]!r}") from None
    body = rows[1:]
    if d < 1 or len(body) != d:
        raise ValueError(f"{path}: expected {d} rows, found {len(body)}")
    m = np.array([[float(x) for x in row.split()] for row in body])
    if m.shape != (d, d):
        raise ValueError(f"{path}: rows must each hold {d} values")
    return m


def load(path) -> CovarianceSpec:
    return from_matrix(read_matrix(path), source=str(path))
