"""Evidence-based model comparison.

BIC uses the reward convention ``log L(theta_mle) - (k/2) log n``, so larger
is better, the same direction as the log evidence it approximates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .linmodel import LOG_2PI, GaussianLinearModel, log_evidence, min_norm, posterior
from .numerics import DimensionError, NotPositiveDefiniteError, NumericalError, cholesky, logdet_spd


class NotAtModeError(NumericalError):
    pass


def bic(mle_loglik: float, k: int, n: int) -> float:
    if n < 1 or k < 0:
        raise ValueError("bic needs n >= 1 and k >= 0")
    return mle_loglik - 0.5 * k * math.log(n)


def pilot_steps(theta) -> np.ndarray:
    return np.maximum(1e-5, 1e-5 * np.abs(theta))


def fd_gradient(f, theta, steps) -> np.ndarray:
    g = np.empty(theta.shape[0])
    for i, h in enumerate(steps):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def fd_hessian(f, theta, steps) -> np.ndarray:
    """Central-difference Hessian with per-coordinate steps."""
    k = theta.shape[0]
    f0 = f(theta)
    hess = np.empty((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = steps[i]
        hess[i, i] = (f(theta + ei) - 2.0 * f0 + f(theta - ei)) / steps[i] ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = steps[j]
            v = (f(theta + ei + ej) - f(theta + ei - ej) - f(theta - ei + ej) + f(theta - ei - ej)) / (
                4.0 * steps[i] * steps[j]
            )
            hess[i, j] = hess[j, i] = v
    return hess


def laplace_log_evidence(
    log_post: Callable[[np.ndarray], float],
    theta_hat,
    mode_tol: float = 1e-4,
    rel_step: float | None = 0.1,
) -> float:
    """Laplace approximation to ``log p(D | M)`` around the mode ``theta_hat``.

    ``log_post`` must return ``log p(D | theta) + log p(theta)``.  The
    Hessian is built from central differences.  A pilot pass with steps
    ``max(1e-5, 1e-5 |theta_j|)`` estimates the diagonal curvature; the
    final steps are ``rel_step`` posterior standard deviations, which keeps
    roundoff far below the truncation-free Gaussian case.  Pass
    ``rel_step=None`` to keep the pilot steps.

    Raises
    ------
    NotAtModeError
        If the finite-difference gradient norm is ``>= mode_tol``.
    NotPositiveDefiniteError
        If the negative Hessian is not SPD.
    """
    theta = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    k = theta.shape[0]
    steps = pilot_steps(theta)
    grad = fd_gradient(log_post, theta, steps)
    if not np.linalg.norm(grad) < mode_tol:
        raise NotAtModeError(f"gradient norm {np.linalg.norm(grad):.3g} at the supplied mode")
    if rel_step is not None:
        curv = -np.array([
            (log_post(theta + e) - 2.0 * log_post(theta) + log_post(theta - e)) / h**2
            for e, h in zip(np.diag(steps), steps)
        ])
        if np.any(curv <= 0):
            raise NotPositiveDefiniteError(int(np.argmin(curv)), float(curv.min()))
        steps = rel_step / np.sqrt(curv)
    neg_h = -fd_hessian(log_post, theta, steps)
    factor = cholesky(0.5 * (neg_h + neg_h.T))
    return float(log_post(theta) + 0.5 * k * LOG_2PI - 0.5 * logdet_spd(factor))


def normalize_log_weights(log_w) -> np.ndarray:
    """Exponentiate after subtracting the max and normalize to sum to one."""
    log_w = np.asarray(log_w, dtype=float)
    w = np.exp(log_w - log_w.max())
    return w / w.sum()


@dataclass(frozen=True)
class ModelList:
    models: Sequence[GaussianLinearModel]
    prior_probs: np.ndarray | None = None

    def __post_init__(self):
        if len(self.models) == 0:
            raise ValueError("model list is empty")
        if self.prior_probs is None:
            probs = np.full(len(self.models), 1.0 / len(self.models))
        else:
            probs = np.asarray(self.prior_probs, dtype=float)
        if probs.shape != (len(self.models),) or np.any(probs < 0):
            raise ValueError("prior probabilities must be nonnegative, one per model")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"prior probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "prior_probs", probs)


@dataclass(frozen=True)
class ModelEvidence:
    log_evidence: float
    laplace_log_evidence: float
    bic: float
    mle_loglik: float
    k: int
    n: int


@dataclass(frozen=True)
class EvidenceReport:
    entries: list[ModelEvidence]
    posterior_probs: np.ndarray
    bic_posterior_probs: np.ndarray
    prior_probs: np.ndarray = field(repr=False)

    @property
    def log_evidences(self) -> np.ndarray:
        return np.array([e.log_evidence for e in self.entries])


def gaussian_mle_loglik(model: GaussianLinearModel, y) -> float:
    """Log likelihood at the least-squares (min-norm) fit, noise variance held at its model value."""
    a = model.matrix
    y = np.asarray(y, dtype=float)
    r = y - a @ min_norm(a, y)
    s2 = model.noise_variance
    return float(-0.5 * a.shape[0] * (LOG_2PI + math.log(s2)) - 0.5 * (r @ r) / s2)


def evaluate_model(model: GaussianLinearModel, y, laplace: bool = True) -> ModelEvidence:
    n, k = model.matrix.shape
    post = posterior(model, y)
    lap = laplace_log_evidence(model.log_posterior_fn(y), post.mean) if laplace else math.nan
    ll = gaussian_mle_loglik(model, y)
    return ModelEvidence(post.log_evidence, lap, bic(ll, k, n), ll, k, n)


def model_posterior(models: ModelList, y, laplace: bool = True) -> EvidenceReport:
    y = np.asarray(y, dtype=float)
    for m in models.models:
        if m.matrix.shape[0] != y.shape[0]:
            raise DimensionError(f"model has {m.matrix.shape[0]} rows but y has {y.shape[0]}")
    entries = [evaluate_model(m, y, laplace) for m in models.models]
    with np.errstate(divide="ignore"):
        log_prior = np.log(models.prior_probs)
    post = normalize_log_weights([e.log_evidence for e in entries] + log_prior)
    bic_post = normalize_log_weights([e.bic for e in entries] + log_prior)
    return EvidenceReport(entries, post, bic_post, models.prior_probs)


def bayes_factor(report: EvidenceReport, i: int, j: int) -> float:
    n = len(report.entries)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"model index out of range for {n} models: ({i}, {j})")
    return math.exp(report.entries[i].log_evidence - report.entries[j].log_evidence)


# -- discrete hypotheses -------------------------------------------------------


class DiscreteHypothesis:
    """A finite, uniformly weighted parameter grid mapped to integer sequences.

    Subclasses implement ``size`` and ``generate``; ``count_matches`` falls
    back to enumerating the whole grid.
    """

    name: str

    @property
    def size(self) -> int:
        raise NotImplementedError

    def generate(self, index: int, length: int) -> tuple:
        raise NotImplementedError

    def count_matches(self, data: Sequence) -> int:
        data = tuple(data)
        return sum(1 for i in range(self.size) if self.generate(i, len(data)) == data)


@dataclass(frozen=True)
class ArithmeticHypothesis(DiscreteHypothesis):
    """``y_x = n0 + (x - 1) n`` for integers ``n0, n`` in ``[low, high]``."""

    name: str = "arithmetic"
    low: int = -50
    high: int = 50

    @property
    def size(self) -> int:
        return (self.high - self.low + 1) ** 2

    def params(self, index: int) -> tuple[int, int]:
        width = self.high - self.low + 1
        return self.low + index // width, self.low + index % width

    def generate(self, index: int, length: int) -> tuple:
        n0, n = self.params(index)
        return tuple(n0 + x * n for x in range(length))

    def count_matches(self, data: Sequence) -> int:
        data = [Fraction(v) for v in data]
        if not data:
            return self.size
        in_range = lambda v: v.denominator == 1 and self.low <= v <= self.high
        if not in_range(data[0]):
            return 0
        if len(data) == 1:
            return self.high - self.low + 1
        step = data[1] - data[0]
        ok = in_range(step) and all(data[x] == data[0] + x * step for x in range(len(data)))
        return int(ok)


def fraction_values(max_numerator: int = 50, max_denominator: int = 4) -> tuple[Fraction, ...]:
    """Distinct reduced fractions ``a/b`` with ``|a| <= max_numerator``, ``1 <= b <= max_denominator``."""
    vals = {
        Fraction(a, b)
        for b in range(1, max_denominator + 1)
        for a in range(-max_numerator, max_numerator + 1)
    }
    return tuple(sorted(vals))


@dataclass(frozen=True)
class PolynomialHypothesis(DiscreteHypothesis):
    """``y_x = sum_k c_k x^k`` at ``x = 1..n`` with every ``c_k`` drawn from ``values``.

    Grid index is mixed-radix over ``(c_degree, ..., c_0)``, leading
    coefficient most significant.
    """

    name: str = "cubic"
    degree: int = 3
    values: tuple[Fraction, ...] = field(default_factory=fraction_values)

    @property
    def size(self) -> int:
        return len(self.values) ** (self.degree + 1)

    def coefficients(self, index: int) -> tuple[Fraction, ...]:
        base = len(self.values)
        digits = []
        for _ in range(self.degree + 1):
            index, r = divmod(index, base)
            digits.append(self.values[r])
        return tuple(reversed(digits))  # leading coefficient first

    def generate(self, index: int, length: int) -> tuple:
        coefs = self.coefficients(index)
        return tuple(_horner(coefs, x) for x in range(1, length + 1))

    def count_matches(self, data: Sequence) -> int:
        data = [Fraction(v) for v in data]
        n = len(data)
        m = self.degree + 1
        value_set = set(self.values)
        free = max(0, m - n)
        k = m - free
        # fix the `free` leading coefficients, solve the k trailing ones
        # exactly from the first k points, then check the remaining points
        xs = [Fraction(x) for x in range(1, k + 1)]
        inv = _inverse([[x**d for d in range(k - 1, -1, -1)] for x in xs])
        lead_pows = [[x ** (self.degree - i) for i in range(free)] for x in xs]
        count = 0
        for lead in itertools.product(self.values, repeat=free):
            rhs = [data[r] - sum(c * pw for c, pw in zip(lead, lead_pows[r])) for r in range(k)]
            rest = tuple(sum(a * b for a, b in zip(row, rhs)) for row in inv)
            if not all(c in value_set for c in rest):
                continue
            coefs = tuple(lead) + rest
            if all(_horner(coefs, x + 1) == data[x] for x in range(k, n)):
                count += 1
        return count


def _horner(coefs, x):
    acc = Fraction(0)
    for c in coefs:
        acc = acc * x + c
    return acc


def _inverse(mat):
    """Exact inverse of a small nonsingular rational matrix (Gauss-Jordan)."""
    k = len(mat)
    rows = [list(map(Fraction, r)) + [Fraction(int(i == j)) for j in range(k)] for i, r in enumerate(mat)]
    for col in range(k):
        piv = next(r for r in range(col, k) if rows[r][col] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        pv = rows[col][col]
        rows[col] = [v / pv for v in rows[col]]
        for r in range(k):
            if r != col and rows[r][col] != 0:
                fac = rows[r][col]
                rows[r] = [a - fac * b for a, b in zip(rows[r], rows[col])]
    return [r[k:] for r in rows]


@dataclass(frozen=True)
class DiscreteEvidence:
    count: int
    grid_size: int

    @property
    def probability(self) -> Fraction:
        return Fraction(self.count, self.grid_size)

    @property
    def value(self) -> float:
        return self.count / self.grid_size


def discrete_evidence(h: DiscreteHypothesis, data: Sequence) -> DiscreteEvidence:
    """``P(D | h)``: matching grid points over grid size under a uniform prior."""
    return DiscreteEvidence(h.count_matches(data), h.size)
