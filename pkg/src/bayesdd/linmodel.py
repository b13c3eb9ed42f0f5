"""Conjugate inference for the Gaussian linear model ``y = A theta + eps``.

Prior ``theta ~ N(0, diag(c))``, noise ``eps ~ N(0, sigma2 I)``.  The
posterior precision is ``P = A^T A / sigma2 + diag(1/c)`` and the posterior
covariance is its inverse.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .basis import DesignMatrix
from .numerics import (
    DimensionError,
    NotPositiveDefiniteError,
    NumericalError,
    SpdFactor,
    cholesky,
    logdet_spd,
    min_norm_least_squares,
    qr_thin,
    solve_spd,
)

FLAT_PRIOR_VARIANCE = 1e12
JITTER = 1e-10
LOG_2PI = math.log(2.0 * math.pi)


def design_array(design) -> np.ndarray:
    if isinstance(design, DesignMatrix):
        return design.matrix
    return np.asarray(design, dtype=float)


@dataclass(frozen=True)
class PriorSchedule:
    """Diagonal prior variances indexed by column ``j``.

    ``young`` decays as ``tau2 / (1 + j)^2``; ``constant`` is ``tau2`` for
    every column.
    """

    kind: str = "young"
    tau2: float = 1.0

    def __post_init__(self):
        if self.kind not in ("young", "constant"):
            raise ValueError(f"unknown prior schedule {self.kind!r}")
        if not self.tau2 > 0:
            raise ValueError("tau2 must be positive")

    def variances(self, n_columns: int) -> np.ndarray:
        j = np.arange(n_columns, dtype=float)
        if self.kind == "young":
            return self.tau2 / (1.0 + j) ** 2
        return np.full(n_columns, float(self.tau2))


@dataclass(frozen=True, eq=False)
class GaussianLinearModel:
    design: DesignMatrix
    prior_variances: np.ndarray
    noise_variance: float

    def __post_init__(self):
        c = np.asarray(self.prior_variances, dtype=float)
        object.__setattr__(self, "prior_variances", c)
        p = design_array(self.design).shape[1]
        if c.shape != (p,):
            raise DimensionError(f"need {p} prior variances, got shape {c.shape}")
        if not (np.all(np.isfinite(c)) and np.all(c > 0)):
            raise ValueError("prior variances must be positive and finite")
        if not (math.isfinite(self.noise_variance) and self.noise_variance > 0):
            raise ValueError("noise variance must be positive and finite")

    @property
    def matrix(self) -> np.ndarray:
        return design_array(self.design)

    @classmethod
    def with_schedule(cls, design, schedule: PriorSchedule, noise_variance: float):
        p = design_array(design).shape[1]
        return cls(design, schedule.variances(p), noise_variance)

    def precision(self) -> np.ndarray:
        a = self.matrix
        return a.T @ a / self.noise_variance + np.diag(1.0 / self.prior_variances)

    def log_posterior_fn(self, y):
        """Return ``theta -> log p(y | theta) + log p(theta)``, both densities normalized."""
        a = self.matrix
        y = _check_y(a, y)
        s2 = self.noise_variance
        c = self.prior_variances
        n, p = a.shape
        const = -0.5 * n * (LOG_2PI + math.log(s2)) - 0.5 * (p * LOG_2PI + np.sum(np.log(c)))

        def log_post(theta):
            theta = np.asarray(theta, dtype=float)
            r = y - a @ theta
            return float(const - 0.5 * (r @ r) / s2 - 0.5 * np.sum(theta**2 / c))

        return log_post


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    mean: np.ndarray
    precision_factor: SpdFactor
    log_evidence: float
    jittered: bool = False

    @property
    def covariance(self) -> np.ndarray:
        return self.precision_factor.inverse()

    def quad_form(self, phi: np.ndarray) -> np.ndarray:
        """Row-wise ``phi_i^T Sigma_post phi_i`` for a feature matrix."""
        w = solve_triangular(self.precision_factor.lower, np.atleast_2d(phi).T, lower=True)
        return np.sum(w * w, axis=0)


@dataclass(frozen=True)
class PredictiveSummary:
    mean: np.ndarray
    variance: np.ndarray


def _check_y(a: np.ndarray, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != a.shape[0]:
        raise DimensionError(f"design has {a.shape[0]} rows but y has shape {y.shape}")
    return y


def _weight_space_log_evidence(model: GaussianLinearModel, y: np.ndarray, factor: SpdFactor) -> float:
    a = model.matrix
    s2 = model.noise_variance
    n = a.shape[0]
    b = a.T @ y / s2
    m = solve_spd(factor, b)
    logdet_k = n * math.log(s2) + np.sum(np.log(model.prior_variances)) + logdet_spd(factor)
    quad = y @ y / s2 - b @ m
    return float(-0.5 * n * LOG_2PI - 0.5 * logdet_k - 0.5 * quad)


def _kernel_factor(model: GaussianLinearModel) -> tuple[SpdFactor, bool]:
    a = model.matrix
    n = a.shape[0]
    k = (a * model.prior_variances) @ a.T + model.noise_variance * np.eye(n)
    k = 0.5 * (k + k.T)
    try:
        return cholesky(k), False
    except NotPositiveDefiniteError:
        k = k + JITTER * np.trace(k) / n * np.eye(n)
        warnings.warn("marginal covariance needed jitter", RuntimeWarning, stacklevel=3)
        return cholesky(k), True


def function_space_log_evidence(model: GaussianLinearModel, y) -> float:
    """``log N(y; 0, A C A^T + sigma2 I)`` from the N x N marginal covariance."""
    y = _check_y(model.matrix, y)
    factor, _ = _kernel_factor(model)
    return _function_space(y, factor)


def _function_space(y: np.ndarray, factor: SpdFactor) -> float:
    alpha = solve_spd(factor, y)
    return float(-0.5 * y.shape[0] * LOG_2PI - 0.5 * logdet_spd(factor) - 0.5 * y @ alpha)


def weight_space_log_evidence(model: GaussianLinearModel, y) -> float:
    """Same quantity through the p x p posterior precision (Woodbury identities)."""
    y = _check_y(model.matrix, y)
    return _weight_space_log_evidence(model, y, cholesky(model.precision()))


def log_evidence(model: GaussianLinearModel, y) -> float:
    """Exact log marginal likelihood ``log p(y | model)``."""
    a = model.matrix
    y = _check_y(a, y)
    if a.shape[1] < a.shape[0]:
        return weight_space_log_evidence(model, y)
    return function_space_log_evidence(model, y)


def posterior(model: GaussianLinearModel, y) -> PosteriorSummary:
    a = model.matrix
    y = _check_y(a, y)
    n, p = a.shape
    prec = model.precision()
    factor = cholesky(0.5 * (prec + prec.T))
    jittered = False
    if p < n:
        mean = solve_spd(factor, a.T @ y / model.noise_variance)
        ev = _weight_space_log_evidence(model, y, factor)
    else:
        kfac, jittered = _kernel_factor(model)
        alpha = solve_spd(kfac, y)
        mean = model.prior_variances * (a.T @ alpha)
        ev = _function_space(y, kfac)
    if not np.all(np.isfinite(mean)):
        raise NumericalError("posterior mean is not finite")
    return PosteriorSummary(mean, factor, ev, jittered)


def predictive(model: GaussianLinearModel, y, new_points) -> PredictiveSummary:
    """Posterior predictive mean and variance (noise included) at new inputs."""
    post = posterior(model, y)
    phi = model.design.evaluate(new_points)
    mean = phi @ post.mean
    var = post.quad_form(phi) + model.noise_variance
    return PredictiveSummary(mean, var)


def ols(design, y) -> np.ndarray:
    """Least-squares coefficients; ``Q^T y`` directly for data-orthonormal designs."""
    a = design_array(design)
    y = _check_y(a, y)
    if isinstance(design, DesignMatrix) and design.spec.kind == "data_orthonormal":
        return a.T @ y
    q, r = qr_thin(a)
    return solve_triangular(r, q.T @ y, lower=False)


def ridge(design, y, lam: float) -> np.ndarray:
    """Solve ``(A^T A + lam I) theta = A^T y``."""
    if lam < 0:
        raise ValueError("ridge penalty must be nonnegative")
    a = design_array(design)
    y = _check_y(a, y)
    if lam == 0:
        return ols(design, y)
    g = a.T @ a + lam * np.eye(a.shape[1])
    return solve_spd(cholesky(0.5 * (g + g.T)), a.T @ y)


def min_norm(design, y) -> np.ndarray:
    a = design_array(design)
    return min_norm_least_squares(a, _check_y(a, y))


class DegreesOfFreedomError(ValueError):
    pass


def residual_stats(design, y) -> tuple[float, int]:
    """Residual sum of squares of the OLS fit and its degrees of freedom ``N - (p+1)``."""
    a = design_array(design)
    n, p = a.shape
    d = n - p
    if d <= 0:
        raise DegreesOfFreedomError(
            f"need N > p+1 for a residual variance (N={n}, p+1={p}); the fit interpolates"
        )
    theta = ols(design, y)
    r = np.asarray(y, dtype=float) - a @ theta
    return float(r @ r), d
