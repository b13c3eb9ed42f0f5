"""Polynomial and random feature maps.

Every design matrix keeps enough state to evaluate its columns at new
inputs, so fitted coefficients can be turned into predictions anywhere on
the domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import RankDeficientError, qr_thin

KINDS = ("legendre", "data_orthonormal", "random_relu", "random_fourier")
RANDOM_KINDS = ("random_relu", "random_fourier")


class DomainError(ValueError):
    """An input lies outside the basis domain."""


@dataclass(frozen=True)
class BasisSpec:
    kind: str
    degree_or_width: int
    domain: tuple[float, float] = (-1.0, 1.0)
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}; expected one of {KINDS}")
        if self.degree_or_width < 0:
            raise ValueError("degree_or_width must be nonnegative")
        a, b = self.domain
        if not a < b:
            raise ValueError(f"domain must satisfy a < b, got {self.domain}")
        if self.kind in RANDOM_KINDS and self.seed is None:
            raise ValueError(f"{self.kind} features need a seed")


def to_unit_interval(x, domain: tuple[float, float]) -> np.ndarray:
    """Affine map of ``domain`` onto [-1, 1]; raises if any point is outside."""
    x = np.asarray(x, dtype=float)
    a, b = domain
    if np.any(x < a) or np.any(x > b):
        bad = x[(x < a) | (x > b)][0]
        raise DomainError(f"point {bad!r} outside domain [{a}, {b}]")
    return (2.0 * x - (a + b)) / (b - a)


def legendre_columns(u: np.ndarray, degree: int) -> np.ndarray:
    """Normalized Legendre polynomials ``sqrt((2j+1)/2) P_j(u)`` for j = 0..degree."""
    u = np.asarray(u, dtype=float)
    out = np.empty((u.shape[0], degree + 1))
    p_prev = np.ones_like(u)
    out[:, 0] = p_prev
    if degree >= 1:
        p = u.copy()
        out[:, 1] = p
        for k in range(1, degree):
            p_next = ((2 * k + 1) * u * p - k * p_prev) / (k + 1)
            p_prev, p = p, p_next
            out[:, k + 1] = p
    out *= np.sqrt((2.0 * np.arange(degree + 1) + 1.0) / 2.0)
    return out


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Basis evaluated at ``points``; ``matrix[i, j] = phi_j(points[i])``."""

    spec: BasisSpec
    points: np.ndarray
    matrix: np.ndarray
    # R^{-1} mapping Legendre columns to the data-orthonormal ones
    transform: np.ndarray | None = None
    weights: np.ndarray | None = None
    biases: np.ndarray | None = None
    scale: float = 1.0

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]

    def evaluate(self, x) -> np.ndarray:
        """Feature matrix of the same basis at new inputs."""
        u = to_unit_interval(x, self.spec.domain)
        kind = self.spec.kind
        if kind == "legendre":
            return legendre_columns(u, self.spec.degree_or_width)
        if kind == "data_orthonormal":
            return legendre_columns(u, self.spec.degree_or_width) @ self.transform
        return _random_columns(u, kind, self.weights, self.biases)


def legendre_design(points, degree: int, domain=(-1.0, 1.0)) -> DesignMatrix:
    spec = BasisSpec("legendre", degree, tuple(map(float, domain)))
    points = np.asarray(points, dtype=float)
    matrix = legendre_columns(to_unit_interval(points, spec.domain), degree)
    return DesignMatrix(spec, points, matrix)


def _default_domain(points: np.ndarray) -> tuple[float, float]:
    lo, hi = float(points.min()), float(points.max())
    if lo == hi:
        return lo - 1.0, hi + 1.0
    return lo, hi


def data_orthonormal_design(points, degree: int, domain=None) -> DesignMatrix:
    """Polynomial basis of ``degree`` orthonormal over the given points.

    Built from the thin QR of the Legendre design, so ``Q^T Q = I`` and the
    column span equals that of the monomials ``1, x, ..., x^degree``.  The
    domain only fixes the Legendre scaling; it defaults to the data range.
    """
    points = np.asarray(points, dtype=float)
    n_distinct = np.unique(points).size
    if n_distinct < degree + 1:
        raise RankDeficientError(
            f"degree {degree} needs at least {degree + 1} distinct points, got {n_distinct}"
        )
    if domain is None:
        domain = _default_domain(points)
    spec = BasisSpec("data_orthonormal", degree, tuple(map(float, domain)))
    base = legendre_columns(to_unit_interval(points, spec.domain), degree)
    q, r = qr_thin(base)
    transform = np.linalg.solve(r, np.eye(degree + 1))
    return DesignMatrix(spec, points, q, transform=transform)


def _random_columns(u, kind, weights, biases) -> np.ndarray:
    z = np.outer(u, weights) + biases
    width = weights.shape[0]
    if kind == "random_relu":
        return np.maximum(z, 0.0) / np.sqrt(width)
    return np.sqrt(2.0 / width) * np.cos(z)


def draw_feature_params(kind: str, width: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Slopes and offsets from a PCG64 stream seeded with ``seed``.

    Slopes are drawn first (``width`` standard normals), then offsets:
    standard normal for ReLU, uniform on [0, 2*pi) for Fourier.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    w = rng.standard_normal(width)
    if kind == "random_relu":
        b = rng.standard_normal(width)
    else:
        b = rng.uniform(0.0, 2.0 * np.pi, width)
    return w, b


def random_feature_design(
    points,
    width: int,
    kind: str = "random_relu",
    seed: int = 0,
    domain=(-1.0, 1.0),
    scale: float = 1.0,
    weights=None,
    biases=None,
) -> DesignMatrix:
    """Random ReLU or Fourier features of the domain-normalized input.

    ``scale`` multiplies the slopes (a bandwidth).  ``weights``/``biases``
    override the seeded draw, which is only useful for tests.
    """
    if kind not in RANDOM_KINDS:
        raise ValueError(f"random features must be one of {RANDOM_KINDS}, got {kind!r}")
    if width < 1:
        raise ValueError("width must be at least 1")
    spec = BasisSpec(kind, width, tuple(map(float, domain)), seed)
    if weights is None or biases is None:
        w, b = draw_feature_params(kind, width, seed)
    else:
        w = np.asarray(weights, dtype=float)
        b = np.asarray(biases, dtype=float)
        if w.shape != (width,) or b.shape != (width,):
            raise ValueError("weights and biases must each have length width")
    w = scale * w
    points = np.asarray(points, dtype=float)
    u = to_unit_interval(points, spec.domain)
    matrix = _random_columns(u, kind, w, b)
    return DesignMatrix(spec, points, matrix, weights=w, biases=b, scale=scale)
