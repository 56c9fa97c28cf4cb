"""Factor matrices ``A`` with ``A A^T = M``.

Two constructions are supported (Cholesky and PCA) plus a column
permutation that sorts the column square norms ``(A^T A)_ii`` into
nonincreasing order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .covmodel import TOL_PSD, CovarianceSpec, write_matrix
from .errors import GrdrError, NotPSDError

logger = logging.getLogger(__name__)

CHOLESKY = "cholesky"
PCA = "pca"
PERMUTED = "permuted"


@dataclass(frozen=True, eq=False)
class FactorMatrix:
    """A d x d matrix ``A`` with ``A A^T = M``.

    Attributes
    ----------
    entries : ndarray
        The factor, read-only.
    construction : str
        ``"cholesky"``, ``"pca"`` or ``"permuted"``.
    col_sq_norms : ndarray
        ``(A^T A)_ii`` for each column. For PCA factors these are the
        (clamped) eigenvalues, since ``A^T A = Lambda`` holds exactly.
    base : str or None
        Construction of the factor a permuted matrix was built from.
    perm : ndarray or None
        Column permutation, ``B[:, j] = A[:, perm[j]]``.
    eigenvalues, eigenvectors : ndarray or None
        Spectral data, populated for PCA factors.
    """

    entries: np.ndarray
    construction: str
    col_sq_norms: np.ndarray
    base: str | None = None
    perm: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None

    def __post_init__(self):
        for name in ("entries", "col_sq_norms", "perm", "eigenvalues", "eigenvectors"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, copy=True)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def label(self) -> str:
        if self.construction == PERMUTED:
            return f"{self.base}+permute"
        return self.construction

    def residual(self, spec: CovarianceSpec) -> float:
        """Frobenius norm of ``A A^T - M``."""
        a = self.entries
        return float(np.linalg.norm(a @ a.T - spec.entries, "fro"))

    def save(self, path) -> None:
        header = f"factor construction={self.label}"
        if self.perm is not None:
            header += " perm=" + ",".join(str(int(p)) for p in self.perm)
        write_matrix(path, self.entries, header=header)


def _column_sq_norms(a: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->j", a, a)


def cholesky_factor(spec: CovarianceSpec, tol_psd: float = TOL_PSD) -> FactorMatrix:
    """Lower-triangular ``L`` with ``L L^T = M``.

    Positive definite inputs go through LAPACK. If that fails, an outer
    product Cholesky with pivot skipping is used: pivots within
    ``tol_psd * ||M||_F`` of zero yield a zero column, more negative pivots
    raise :class:`NotPSDError`.
    """
    m = spec.entries
    try:
        low = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        low = _cholesky_semidefinite(m, tol_psd * max(spec.frobenius, np.finfo(float).tiny))
    return FactorMatrix(low, CHOLESKY, _column_sq_norms(low))


def _cholesky_semidefinite(m: np.ndarray, tol: float) -> np.ndarray:
    d = m.shape[0]
    low = np.zeros_like(m)
    for j in range(d):
        row = low[j, :j]
        pivot = m[j, j] - row @ row
        if pivot < -tol:
            raise NotPSDError(f"negative Cholesky pivot {pivot:.3g} at index {j}", index=j, value=pivot)
        if pivot <= tol:
            continue
        ljj = np.sqrt(pivot)
        low[j, j] = ljj
        low[j + 1:, j] = (m[j + 1:, j] - low[j + 1:, :j] @ row) / ljj
    return low


def pca_factor(spec: CovarianceSpec, tol_psd: float = TOL_PSD) -> FactorMatrix:
    """``A = Q sqrt(Lambda)`` with eigenvalues sorted in decreasing order.

    Eigenvalue ties keep LAPACK order (stable sort). Each eigenvector is
    signed so its largest-magnitude entry is positive.
    """
    lam, q = np.linalg.eigh(spec.entries)
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    q = q[:, order]
    tol = tol_psd * spec.frobenius
    if lam[-1] < -tol:
        idx = int(np.argmax(lam < -tol))
        raise NotPSDError(f"eigenvalue {lam[idx]:.3g} below -{tol:.3g}", index=idx, value=float(lam[idx]))
    if lam[-1] < 0:
        neg = lam < 0
        if np.min(lam) < -64 * np.finfo(float).eps * max(spec.frobenius, 1.0):
            logger.warning("clamping %d negative eigenvalue(s) (min %.3g) to zero", int(neg.sum()), lam.min())
        lam = np.where(neg, 0.0, lam)
    # sign convention: largest |entry| of each eigenvector is positive
    pivot_rows = np.argmax(np.abs(q), axis=0)
    signs = np.sign(q[pivot_rows, np.arange(q.shape[1])])
    signs[signs == 0] = 1.0
    q = q * signs
    a = q * np.sqrt(lam)
    return FactorMatrix(a, PCA, lam, eigenvalues=lam, eigenvectors=q)


def permute_decreasing(fac: FactorMatrix) -> FactorMatrix:
    """Reorder columns so ``col_sq_norms`` is nonincreasing (stable on ties)."""
    perm = np.argsort(-fac.col_sq_norms, kind="stable")
    base = fac.base if fac.construction == PERMUTED else fac.construction
    if fac.perm is not None:
        total = fac.perm[perm]
    else:
        total = perm
    return FactorMatrix(
        fac.entries[:, perm],
        PERMUTED,
        fac.col_sq_norms[perm],
        base=base,
        perm=total,
        eigenvalues=None if fac.eigenvalues is None else fac.eigenvalues[perm],
        eigenvectors=None if fac.eigenvectors is None else fac.eigenvectors[:, perm],
    )


def make_factor(spec: CovarianceSpec, kind: str) -> FactorMatrix:
    """Factor by name: ``cholesky``, ``pca``, or either with a ``+permute`` suffix."""
    base, _, extra = kind.partition("+")
    builders = {CHOLESKY: cholesky_factor, PCA: pca_factor}
    if base not in builders or extra not in ("", "permute", "permute-check"):
        raise ValueError(f"unknown factor kind {kind!r}")
    fac = builders[base](spec)
    if extra:
        permuted = permute_decreasing(fac)
        if extra == "permute-check" and not np.array_equal(permuted.perm, np.arange(fac.dim)):
            raise GrdrError(f"{base} factor columns were not already in decreasing norm order")
        fac = permuted
    return fac
