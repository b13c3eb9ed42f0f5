"""Synthetic experiments: train error, Monte-Carlo risk and evidence versus complexity.

Seeding
-------
All randomness comes from numpy's PCG64 generator keyed by
``SeedSequence(entropy=seed, spawn_key=key)``.  Keys in use:

* ``(0,)`` true coefficients, ``(1,)`` inputs, ``(2,)`` noise of a dataset;
* ``(10, c)`` random-feature parameters at complexity ``c``;
* ``(11, c, r)`` dataset seed of replicate ``r`` at complexity ``c``.

Replicate seeds therefore depend only on ``(master_seed, c, r)`` and results
do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from .basis import (
    DesignMatrix,
    data_orthonormal_design,
    legendre_columns,
    legendre_design,
    random_feature_design,
    to_unit_interval,
)
from .linmodel import GaussianLinearModel, PriorSchedule, min_norm, posterior, ridge
from .selection import gaussian_mle_loglik, bic as bic_value, laplace_log_evidence

COEF_STREAM, X_STREAM, NOISE_STREAM = 0, 1, 2
FEATURE_STREAM, REPLICATE_STREAM = 10, 11
TEST_GRID_POINTS = 512


def derive_seed(seed: int, *key: int) -> int:
    """64-bit seed derived from ``seed`` and an integer key path."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))))


@dataclass(frozen=True)
class GeneratorSpec:
    true_degree: int = 10
    true_coefficients: tuple[float, ...] | None = None
    noise_sd: float = 0.3
    n: int = 20
    x_design: str = "equispaced"
    domain: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("N must be at least 2")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        if self.true_degree < 0:
            raise ValueError("true_degree must be nonnegative")
        if self.x_design not in ("equispaced", "uniform_random"):
            raise ValueError(f"unknown x_design {self.x_design!r}")
        if not self.domain[0] < self.domain[1]:
            raise ValueError("domain must satisfy a < b")
        if self.true_coefficients is not None and len(self.true_coefficients) != self.true_degree + 1:
            raise ValueError("need true_degree + 1 true coefficients")

    @property
    def noise_variance(self) -> float:
        return self.noise_sd**2

    def resolved(self, seed: int) -> "GeneratorSpec":
        """Copy with the true coefficients fixed (drawn standard normal from ``seed`` if unset)."""
        if self.true_coefficients is not None:
            return self
        coef = stream(seed, COEF_STREAM).standard_normal(self.true_degree + 1)
        return replace(self, true_coefficients=tuple(float(c) for c in coef))

    def true_function(self, x) -> np.ndarray:
        if self.true_coefficients is None:
            raise ValueError("true coefficients unresolved; call resolved(seed) first")
        u = to_unit_interval(x, self.domain)
        return legendre_columns(u, self.true_degree) @ np.asarray(self.true_coefficients)

    def test_grid(self, points: int = TEST_GRID_POINTS) -> np.ndarray:
        return np.linspace(self.domain[0], self.domain[1], points)


@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    f_true_at_x: np.ndarray
    spec: GeneratorSpec
    seed: int

    def __len__(self) -> int:
        return self.x.shape[0]


def generate(spec: GeneratorSpec, seed: int) -> Dataset:
    spec = spec.resolved(seed)
    a, b = spec.domain
    if spec.x_design == "equispaced":
        x = np.linspace(a, b, spec.n)
    else:
        x = np.sort(stream(seed, X_STREAM).uniform(a, b, spec.n))
    f = spec.true_function(x)
    y = f + spec.noise_sd * stream(seed, NOISE_STREAM).standard_normal(spec.n)
    return Dataset(x, y, f, spec, seed)


def train_error(dataset: Dataset, predictions) -> float:
    """Mean squared residual of predictions at the training inputs."""
    predictions = np.asarray(predictions, dtype=float)
    if predictions.shape != dataset.y.shape:
        raise ValueError(f"got {predictions.shape[0]} predictions for {len(dataset)} points")
    r = dataset.y - predictions
    return float(np.mean(r * r))


# -- bases per complexity ------------------------------------------------------


@dataclass(frozen=True)
class FeatureConfig:
    """Random features used once complexity exceeds the sample size.

    ``scale`` multiplies the standard-normal slopes.  With 20 equispaced
    points, Fourier features need a bandwidth near 20 before every width
    above 20 has full row rank.
    """

    kind: str = "random_fourier"
    scale: float = 20.0


def complexity_design(points, complexity: int, n: int, domain, seed: int,
                      features: FeatureConfig = FeatureConfig()) -> DesignMatrix:
    """Data-orthonormal polynomials up to ``complexity == n``, random features beyond."""
    if complexity < 1:
        raise ValueError("complexity must be at least 1")
    if complexity <= n:
        return data_orthonormal_design(points, complexity - 1, domain=domain)
    return random_feature_design(
        points, complexity, features.kind, derive_seed(seed, FEATURE_STREAM, complexity),
        domain=domain, scale=features.scale,
    )


# -- estimators ----------------------------------------------------------------


class Estimator(Protocol):
    name: str

    def predict(self, design: DesignMatrix, data: Dataset, x_test: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class MinNorm:
    name: str = "min_norm"

    def coefficients(self, design, data):
        return min_norm(design, data.y)

    def predict(self, design, data, x_test):
        return design.evaluate(x_test) @ self.coefficients(design, data)


@dataclass(frozen=True)
class Ridge:
    lam: float
    name: str = "ridge"

    def coefficients(self, design, data):
        return ridge(design, data.y, self.lam)

    def predict(self, design, data, x_test):
        return design.evaluate(x_test) @ self.coefficients(design, data)


@dataclass(frozen=True)
class Bayes:
    """Posterior mean under a diagonal prior schedule; noise variance from the generator."""

    prior: PriorSchedule = PriorSchedule("young", 1.0)
    name: str = "bayes"

    def model(self, design, data) -> GaussianLinearModel:
        return GaussianLinearModel.with_schedule(design, self.prior, data.spec.noise_variance)

    def coefficients(self, design, data):
        return posterior(self.model(design, data), data.y).mean

    def predict(self, design, data, x_test):
        return design.evaluate(x_test) @ self.coefficients(design, data)


@dataclass(frozen=True)
class RiskEstimate:
    values: np.ndarray = field(repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std_error(self) -> float:
        return float(np.std(self.values, ddof=1) / math.sqrt(self.values.shape[0]))

    @property
    def median(self) -> float:
        return float(np.median(self.values))


def replicate_risks(spec: GeneratorSpec, complexity: int, estimators: Sequence[Estimator],
                    replicates: int, seed: int, test_points: int = TEST_GRID_POINTS,
                    features: FeatureConfig = FeatureConfig()) -> dict[str, RiskEstimate]:
    """Monte-Carlo risks of several estimators over shared replicate datasets.

    Risk is the mean squared error against the noise-free truth on an
    equispaced test grid, so it excludes the irreducible noise variance.
    """
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    spec = spec.resolved(seed)
    x_test = spec.test_grid(test_points)
    f_test = spec.true_function(x_test)
    out = {e.name: np.empty(replicates) for e in estimators}
    for r in range(replicates):
        data = generate(spec, derive_seed(seed, REPLICATE_STREAM, complexity, r))
        design = complexity_design(data.x, complexity, spec.n, spec.domain, seed, features)
        for est in estimators:
            err = est.predict(design, data, x_test) - f_test
            out[est.name][r] = np.mean(err * err)
    return {k: RiskEstimate(v) for k, v in out.items()}


def frequentist_risk(spec: GeneratorSpec, complexity: int, estimator: Estimator, replicates: int,
                     test_points: int = TEST_GRID_POINTS, seed: int = 0,
                     features: FeatureConfig = FeatureConfig()) -> tuple[float, float]:
    """Mean risk and its standard error for one estimator."""
    est = replicate_risks(spec, complexity, [estimator], replicates, seed, test_points, features)
    risk = est[estimator.name]
    return risk.mean, risk.std_error


@dataclass(frozen=True)
class RiskCurvePoint:
    complexity: int
    train_mse: float
    risks: dict[str, RiskEstimate]
    log_evidence: float
    bic: float
    replicates: int

    @property
    def test_risk_mle(self) -> RiskEstimate:
        return self.risks["min_norm"]

    @property
    def test_risk_bayes(self) -> RiskEstimate:
        return self.risks["bayes"]


def double_descent_sweep(spec: GeneratorSpec, complexities: Sequence[int],
                         estimators: Sequence[Estimator] | None = None, replicates: int = 100,
                         seed: int = 0, test_points: int = TEST_GRID_POINTS,
                         features: FeatureConfig = FeatureConfig()) -> list[RiskCurvePoint]:
    """Train error, risk, evidence and BIC at each complexity.

    Train error, log evidence and BIC are computed on the reference dataset
    ``generate(spec, seed)``; risks average over replicate datasets.
    """
    complexities = list(complexities)
    if not complexities:
        raise ValueError("complexities must be nonempty")
    if complexities != sorted(complexities):
        raise ValueError("complexities must be sorted")
    if estimators is None:
        estimators = [MinNorm(), Bayes()]
    names = {e.name for e in estimators}
    if not {"min_norm", "bayes"} <= names:
        raise ValueError("sweep needs a 'min_norm' and a 'bayes' estimator")
    bayes = next(e for e in estimators if e.name == "bayes")
    spec = spec.resolved(seed)
    ref = generate(spec, seed)
    points = []
    for c in complexities:
        design = complexity_design(ref.x, c, spec.n, spec.domain, seed, features)
        fitted = design.matrix @ min_norm(design, ref.y)
        model = bayes.model(design, ref)
        ev = posterior(model, ref.y).log_evidence
        b = bic_value(gaussian_mle_loglik(model, ref.y), design.n_columns, len(ref))
        risks = replicate_risks(spec, c, estimators, replicates, seed, test_points, features)
        points.append(RiskCurvePoint(c, train_error(ref, fitted), risks, ev, b, replicates))
    return points


def paired_bootstrap_upper(a, b, n_boot: int = 2000, level: float = 0.95, seed: int = 0) -> float:
    """Upper ``level`` bootstrap quantile of ``median(a) - median(b)`` over paired resamples."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired samples need equal length")
    rng = stream(seed, 99)
    idx = rng.integers(0, a.shape[0], size=(n_boot, a.shape[0]))
    gaps = np.median(a[idx], axis=1) - np.median(b[idx], axis=1)
    return float(np.quantile(gaps, level))


# -- evidence curves -----------------------------------------------------------


@dataclass(frozen=True)
class EvidenceRow:
    degree: int
    log_evidence: float
    bic: float
    laplace_log_evidence: float


def evidence_design(x, degree: int, basis: str, domain) -> DesignMatrix:
    if basis == "legendre":
        return legendre_design(x, degree, domain)
    if basis == "data_orthonormal":
        if degree > len(x) - 1:
            raise ValueError(f"degree {degree} exceeds N-1 = {len(x) - 1} for a data-orthonormal basis")
        return data_orthonormal_design(x, degree, domain=domain)
    raise ValueError(f"unknown evidence basis {basis!r}")


def evidence_curve(dataset: Dataset, degrees: Sequence[int],
                   prior: PriorSchedule = PriorSchedule("constant", 1.0),
                   basis: str = "legendre", noise_variance: float | None = None,
                   laplace: bool = True) -> list[EvidenceRow]:
    """Exact log evidence, BIC and (optionally) Laplace log evidence per polynomial degree."""
    s2 = dataset.spec.noise_variance if noise_variance is None else noise_variance
    rows = []
    for deg in degrees:
        design = evidence_design(dataset.x, deg, basis, dataset.spec.domain)
        model = GaussianLinearModel.with_schedule(design, prior, s2)
        post = posterior(model, dataset.y)
        lap = laplace_log_evidence(model.log_posterior_fn(dataset.y), post.mean) if laplace else math.nan
        b = bic_value(gaussian_mle_loglik(model, dataset.y), deg + 1, len(dataset))
        rows.append(EvidenceRow(deg, post.log_evidence, b, lap))
    return rows


def evidence_sweep(dataset: Dataset, degrees: Sequence[int],
                   prior: PriorSchedule = PriorSchedule("constant", 1.0),
                   basis: str = "legendre", noise_variance: float | None = None) -> list[tuple[int, float]]:
    rows = evidence_curve(dataset, degrees, prior, basis, noise_variance, laplace=False)
    return [(r.degree, r.log_evidence) for r in rows]


def argmax_degree(curve: Sequence[tuple[int, float]]) -> int:
    return max(curve, key=lambda t: t[1])[0]
