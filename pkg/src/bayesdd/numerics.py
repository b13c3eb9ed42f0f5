"""Dense linear-algebra kernels shared by the inference and experiment code.

Matrices are plain 2-D ``numpy.ndarray`` objects of float64.  Factorizations
are returned as small immutable wrappers so callers can reuse them for
solves and log-determinants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

RANK_TOL = 1e-12
PINV_RTOL = 1e-10


class NumericalError(ArithmeticError):
    """Base class for failures of a numerical routine."""


class RankDeficientError(NumericalError):
    """A matrix failed a numerical full-rank test."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky factorization hit a nonpositive pivot."""

    def __init__(self, pivot: int, value: float):
        self.pivot = pivot
        self.value = value
        super().__init__(
            f"matrix is not positive definite: leading minor {pivot} "
            f"has pivot {value:.6g}"
        )


class DimensionError(ValueError):
    """Operand shapes do not agree."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"expected a nonempty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


@dataclass(frozen=True)
class SpdFactor:
    """Lower Cholesky factor ``L`` of a symmetric positive definite ``S = L L^T``."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def matrix(self) -> np.ndarray:
        return self.lower @ self.lower.T

    def inverse(self) -> np.ndarray:
        return solve_spd(self, np.eye(self.dim))


def qr_thin(a) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with the diagonal of ``R`` forced positive.

    Raises
    ------
    RankDeficientError
        If ``A`` has more columns than rows, or the smallest ``|R_jj|`` is
        below ``1e-12`` times the largest.
    """
    a = as_matrix(a)
    n, p = a.shape
    if n < p:
        raise RankDeficientError(f"thin QR needs rows >= cols, got {n}x{p}")
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    q = q * signs
    r = r * signs[:, None]
    diag = np.diag(r)
    if diag.min() <= RANK_TOL * diag.max():
        j = int(np.argmin(diag))
        raise RankDeficientError(
            f"design is numerically rank deficient (column {j}, "
            f"|R_jj|/max = {diag[j] / diag.max():.3g})"
        )
    return q, np.triu(r)


def _locate_failed_pivot(s: np.ndarray) -> tuple[int, float]:
    n = s.shape[0]
    low = np.zeros_like(s)
    for j in range(n):
        d = s[j, j] - low[j, :j] @ low[j, :j]
        if not d > 0.0:
            return j, float(d)
        low[j, j] = np.sqrt(d)
        low[j + 1:, j] = (s[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    # LAPACK refused but the plain recurrence did not; report the last pivot
    return n - 1, float(low[n - 1, n - 1] ** 2)


def cholesky(s) -> SpdFactor:
    """Cholesky factor of a symmetric positive definite matrix."""
    s = as_matrix(s)
    if s.shape[0] != s.shape[1]:
        raise DimensionError(f"cholesky needs a square matrix, got {s.shape}")
    scale = max(1.0, float(np.abs(s).max()))
    if np.abs(s - s.T).max() > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    try:
        low = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(*_locate_failed_pivot(s)) from None
    return SpdFactor(low)


def solve_spd(factor: SpdFactor, b) -> np.ndarray:
    """Solve ``S x = b`` given ``factor`` of ``S``.  ``b`` may be a vector or matrix."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != factor.dim:
        raise DimensionError(
            f"right-hand side has {b.shape[0]} rows, factor has dimension {factor.dim}"
        )
    w = solve_triangular(factor.lower, b, lower=True)
    return solve_triangular(factor.lower.T, w, lower=False)


def logdet_spd(factor: SpdFactor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(factor.lower))))


def min_norm_least_squares(a, y, tol: float = PINV_RTOL) -> np.ndarray:
    """Minimum-norm least-squares solution via the SVD pseudoinverse.

    Singular values below ``tol * s_max`` are treated as zero.
    """
    a = as_matrix(a)
    y = np.asarray(y, dtype=float)
    if a.shape[0] != y.shape[0]:
        raise DimensionError(f"A has {a.shape[0]} rows but y has length {y.shape[0]}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > tol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    coef = (u[:, keep].T @ y) / s[keep]
    return vt[keep].T @ coef
