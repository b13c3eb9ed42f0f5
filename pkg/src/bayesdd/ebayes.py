"""Empirical Bayes for orthonormal polynomial designs, after Deaton.

With ``Q^T Q = I`` the OLS coefficients satisfy ``theta_hat_i ~ N(theta_i,
sigma2)``.  Under ``theta_i ~ N(0, sigma_i^2)`` the shrinkage factor is
``z_i = sigma2 / (sigma_i^2 + sigma2)`` and the posterior mean is
``(1 - z_i) theta_hat_i``.

In precision coordinates ``V_i = z_i / sigma2`` (i <= p) and
``V_{p+1} = 1 / sigma2`` the hyperparameter log-likelihood separates::

    log L = (d/2) log V_{p+1} - s V_{p+1} / 2
            + sum_i [ (1/2) log V_i - theta_hat_i^2 V_i / 2 ] + const

(the ``(sigma2)^{-N/2}`` factor and the ``z_i^{1/2}`` factors combine into
``V_{p+1}^{(N-(p+1))/2}``).  Adding a Gamma(shape ``g``, scale ``b``)
prior to each coordinate and setting the derivative to zero gives::

    V_i^unc     = (g_i - 1/2)       / (1/b_i + theta_hat_i^2 / 2)
    V_{p+1}^unc = (g_{p+1} + d/2 - 1) / (1/b_{p+1} + s / 2)

Both are positive whenever ``g > 1/2`` and ``d >= 1``.  The ordering
``V_0 <= ... <= V_p <= V_{p+1}`` is then imposed by isotonic regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linmodel import DegreesOfFreedomError, ols, residual_stats


@dataclass(frozen=True)
class CoefficientStats:
    theta_hat: np.ndarray
    s: float
    d: int
    n: int

    def __post_init__(self):
        th = np.asarray(self.theta_hat, dtype=float)
        object.__setattr__(self, "theta_hat", th)
        if self.s < 0:
            raise ValueError("residual sum of squares must be nonnegative")
        if self.d != self.n - th.shape[0]:
            raise ValueError(f"d must equal N - (p+1) = {self.n - th.shape[0]}, got {self.d}")

    @classmethod
    def from_design(cls, design, y) -> "CoefficientStats":
        """OLS coefficients and residual statistics of an orthonormal design."""
        s, d = residual_stats(design, y)
        theta = ols(design, y)
        return cls(theta, s, d, len(y))


@dataclass(frozen=True)
class GammaPriorSchedule:
    """Gamma(shape, scale) priors on ``V_0..V_{p+1}``."""

    shapes: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.shapes, dtype=float)
        b = np.asarray(self.scales, dtype=float)
        object.__setattr__(self, "shapes", g)
        object.__setattr__(self, "scales", b)
        if g.shape != b.shape or g.ndim != 1:
            raise ValueError("shapes and scales must be 1-D arrays of equal length")
        if np.any(g <= 0.5):
            raise ValueError("every Gamma shape must exceed 1/2")
        if np.any(b <= 0):
            raise ValueError("Gamma scales must be positive")

    @classmethod
    def default(cls, n_coefficients: int, base_shape: float = 1.0, shape_step: float = 0.1,
                scale: float = 10.0) -> "GammaPriorSchedule":
        """``shape_i = base_shape + shape_step * i``, ``scale_i = scale`` for i = 0..p+1."""
        i = np.arange(n_coefficients + 1, dtype=float)
        return cls(base_shape + shape_step * i, np.full(i.shape, float(scale)))


@dataclass(frozen=True)
class PavaFit:
    v_unconstrained: np.ndarray
    v_isotonic: np.ndarray
    z: np.ndarray
    sigma2_hat: float
    pool_blocks: list[tuple[int, int]]


def joint_hyper_loglik(stats: CoefficientStats, z, sigma2: float) -> float:
    """Log of the joint marginal likelihood of ``(z, sigma2)``.

    The proportionality constant is taken as zero.  Needs every ``z_i`` in
    (0, 1] and ``sigma2 > 0``.
    """
    z = _check_hyper(stats, z, sigma2)
    th2 = stats.theta_hat**2
    out = -0.5 * stats.n * math.log(sigma2) - stats.s / (2.0 * sigma2)
    if stats.d != 2:
        if stats.s <= 0:
            raise ValueError("s must be positive unless d == 2")
        out += 0.5 * (stats.d - 2) * math.log(stats.s)
    out += float(np.sum(0.5 * np.log(z) - th2 * z / (2.0 * sigma2)))
    return out


def joint_hyper_grad(stats: CoefficientStats, z, sigma2: float) -> tuple[np.ndarray, float]:
    """Analytic gradient of :func:`joint_hyper_loglik` w.r.t. ``z`` and ``sigma2``."""
    z = _check_hyper(stats, z, sigma2)
    th2 = stats.theta_hat**2
    dz = 0.5 / z - th2 / (2.0 * sigma2)
    ds = -0.5 * stats.n / sigma2 + (stats.s + float(np.sum(th2 * z))) / (2.0 * sigma2**2)
    return dz, ds


def _check_hyper(stats, z, sigma2):
    z = np.asarray(z, dtype=float)
    if z.shape != stats.theta_hat.shape:
        raise ValueError(f"need {stats.theta_hat.shape[0]} shrinkage factors, got {z.shape}")
    if np.any(z <= 0) or np.any(z > 1):
        raise ValueError("shrinkage factors must lie in (0, 1]")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if stats.d < 1:
        raise DegreesOfFreedomError("need d >= 1")
    return z


def unconstrained_v_map(stats: CoefficientStats, schedule: GammaPriorSchedule) -> np.ndarray:
    """Per-coordinate MAP of ``V_0..V_{p+1}`` before the ordering constraint."""
    p1 = stats.theta_hat.shape[0]
    if schedule.shapes.shape[0] != p1 + 1:
        raise ValueError(f"schedule needs {p1 + 1} entries, has {schedule.shapes.shape[0]}")
    g, b = schedule.shapes, schedule.scales
    num = np.empty(p1 + 1)
    den = np.empty(p1 + 1)
    num[:p1] = g[:p1] - 0.5
    den[:p1] = 1.0 / b[:p1] + stats.theta_hat**2 / 2.0
    num[p1] = g[p1] + stats.d / 2.0 - 1.0
    den[p1] = 1.0 / b[p1] + stats.s / 2.0
    v = num / den
    if np.any(v <= 0):
        raise ValueError("nonpositive V estimate; check Gamma shapes > 1/2 and d >= 1")
    return v


def v_curvature(stats: CoefficientStats, schedule: GammaPriorSchedule, v) -> np.ndarray:
    """Negative second derivative of each coordinate's log posterior at ``v``."""
    p1 = stats.theta_hat.shape[0]
    num = schedule.shapes - 0.5
    num[p1] = schedule.shapes[p1] + stats.d / 2.0 - 1.0
    return num / np.asarray(v) ** 2


def pava(values, weights=None) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Weighted least-squares projection onto nondecreasing sequences.

    Returns the fitted values and the pooled blocks as inclusive index
    ranges ``(start, end)``.
    """
    y = np.asarray(values, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if y.shape != w.shape or y.ndim != 1:
        raise ValueError("values and weights must be 1-D of equal length")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    # stack of blocks: (weighted mean, total weight, start, end)
    means, wts, starts, ends = [], [], [], []
    for i in range(y.shape[0]):
        means.append(y[i])
        wts.append(w[i])
        starts.append(i)
        ends.append(i)
        while len(means) > 1 and means[-2] > means[-1]:
            wsum = wts[-2] + wts[-1]
            m = (wts[-2] * means[-2] + wts[-1] * means[-1]) / wsum
            e = ends[-1]
            for lst in (means, wts, starts, ends):
                lst.pop()
            means[-1], wts[-1], ends[-1] = m, wsum, e
    fitted = np.empty_like(y)
    for m, s, e in zip(means, starts, ends):
        fitted[s:e + 1] = m
    return fitted, list(zip(starts, ends))


def deaton_fit(stats: CoefficientStats, schedule: GammaPriorSchedule | None = None,
               weights: str = "unit") -> PavaFit:
    """Order-constrained hyperparameter estimate.

    ``weights`` is ``"unit"`` or ``"precision"`` (curvature of each
    coordinate's log posterior at its unconstrained MAP).
    """
    if stats.d < 1:
        raise DegreesOfFreedomError("need d = N - (p+1) >= 1")
    if schedule is None:
        schedule = GammaPriorSchedule.default(stats.theta_hat.shape[0])
    v = unconstrained_v_map(stats, schedule)
    if weights == "unit":
        w = None
    elif weights == "precision":
        w = v_curvature(stats, schedule, v)
    else:
        raise ValueError(f"unknown weighting {weights!r}")
    v_iso, blocks = pava(v, w)
    sigma2 = 1.0 / v_iso[-1]
    z = np.minimum(v_iso[:-1] / v_iso[-1], 1.0)
    return PavaFit(v, v_iso, z, float(sigma2), blocks)


def shrinkage_posterior_means(stats: CoefficientStats, fit: PavaFit) -> np.ndarray:
    return (1.0 - fit.z) * stats.theta_hat


def induced_prior_variances(fit: PavaFit, floor: float = 1e-300) -> np.ndarray:
    """Prior variances ``sigma2 (1 - z_i) / z_i`` implied by the fit, floored to stay positive."""
    return np.maximum(fit.sigma2_hat * (1.0 - fit.z) / fit.z, floor)


def gaussian_means_bayes(y, tau2, sigma2: float) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means ``tau_i^2 / (tau_i^2 + sigma2) y_i`` and per-coordinate Bayes risk."""
    y = np.asarray(y, dtype=float)
    tau2 = np.broadcast_to(np.asarray(tau2, dtype=float), y.shape)
    if np.any(tau2 <= 0) or not sigma2 > 0:
        raise ValueError("variances must be positive")
    shrink = tau2 / (tau2 + sigma2)
    return shrink * y, sigma2 * shrink


def james_stein_style_mean(ybar: float, n: int, mu0: float, tau2: float, sigma2: float) -> float:
    """Normal-normal posterior mean of a location from ``n`` observations with mean ``ybar``."""
    if n < 1 or not (tau2 > 0 and sigma2 > 0):
        raise ValueError("need n >= 1 and positive variances")
    tot = sigma2 + n * tau2
    return n * tau2 / tot * ybar + sigma2 / tot * mu0
