"""Entry point.  Exit codes: 0 success, 2 config error, 3 numerical failure."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..basis import DomainError, data_orthonormal_design
from ..ebayes import (
    CoefficientStats,
    GammaPriorSchedule,
    deaton_fit,
    induced_prior_variances,
    shrinkage_posterior_means,
)
from ..linmodel import DegreesOfFreedomError, GaussianLinearModel, PriorSchedule, posterior
from ..numerics import NumericalError
from ..risklab import (
    Bayes,
    FeatureConfig,
    GeneratorSpec,
    MinNorm,
    Ridge,
    double_descent_sweep,
    evidence_curve,
    generate,
)
from ..selection import ArithmeticHypothesis, PolynomialHypothesis, discrete_evidence, fraction_values
from .config import ConfigError, RunConfig, load_config
from .output import line_plot_svg, read_dataset, render_csv, write_dataset, write_text

COMMANDS = ("gen", "sweep", "evidence", "deaton", "occam")
VERIFY_TOL = 1e-10


def generator_spec(cfg: RunConfig) -> GeneratorSpec:
    g = cfg.generator
    coef = None if g.true_coefficients is None else tuple(g.true_coefficients)
    return GeneratorSpec(g.true_degree, coef, g.noise_sd, g.n, g.x_design, tuple(g.domain))


def _dataset(cfg: RunConfig, path: str | None, base: Path | None):
    if path is None:
        return generate(generator_spec(cfg), cfg.seed)
    p = Path(path)
    if not p.is_absolute() and base is not None:
        p = base / p
    try:
        return read_dataset(p)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load dataset {p}: {exc}") from None


def cmd_gen(cfg: RunConfig, out: Path, **_) -> list[Path]:
    data = generate(generator_spec(cfg), cfg.seed)
    csv_path = out / "dataset.csv"
    side = write_dataset(data, csv_path)
    return [csv_path, side]


SWEEP_HEADER = ["complexity", "train_mse", "test_risk_mle", "test_risk_mle_se", "test_risk_bayes",
                "test_risk_bayes_se", "log_evidence", "bic", "replicates"]


def cmd_sweep(cfg: RunConfig, out: Path, svg: bool = False, **_) -> list[Path]:
    sw = cfg.sweep
    estimators = [MinNorm(), Bayes(PriorSchedule(sw.prior.kind, sw.prior.tau2))]
    if sw.ridge_lambda is not None:
        estimators.append(Ridge(sw.ridge_lambda))
    points = double_descent_sweep(
        generator_spec(cfg), sw.complexities, estimators, sw.replicates, cfg.seed, sw.test_points,
        FeatureConfig(sw.features.kind, sw.features.scale),
    )
    header = list(SWEEP_HEADER)
    if sw.ridge_lambda is not None:
        header += ["test_risk_ridge", "test_risk_ridge_se"]
    rows = []
    for p in points:
        row = [p.complexity, p.train_mse, p.test_risk_mle.mean, p.test_risk_mle.std_error,
               p.test_risk_bayes.mean, p.test_risk_bayes.std_error, p.log_evidence, p.bic, p.replicates]
        if sw.ridge_lambda is not None:
            row += [p.risks["ridge"].mean, p.risks["ridge"].std_error]
        rows.append(row)
    path = out / "risk_curve.csv"
    write_text(path, render_csv(header, rows))
    written = [path]
    if svg:
        xs = [p.complexity for p in points]
        series = {
            "test risk (min-norm)": (xs, [p.test_risk_mle.mean for p in points]),
            "test risk (Bayes)": (xs, [p.test_risk_bayes.mean for p in points]),
            "train MSE": (xs, [p.train_mse for p in points]),
        }
        svg_path = out / "risk_curve.svg"
        write_text(svg_path, line_plot_svg(series, "Risk versus complexity", "complexity", "risk", log_y=True))
        written.append(svg_path)
    return written


def cmd_evidence(cfg: RunConfig, out: Path, svg: bool = False, base: Path | None = None, **_) -> list[Path]:
    ev = cfg.evidence
    prior = PriorSchedule(ev.prior.kind, ev.prior.tau2)
    data = _dataset(cfg, ev.dataset, base)
    rows = evidence_curve(data, ev.degrees, prior, ev.basis, ev.noise_variance, laplace=ev.laplace)
    best = max(range(len(rows)), key=lambda i: rows[i].log_evidence)
    table = [[r.degree, r.log_evidence, r.bic, r.laplace_log_evidence, int(i == best)]
             for i, r in enumerate(rows)]
    path = out / "evidence_curve.csv"
    write_text(path, render_csv(["degree", "log_evidence", "bic", "laplace_log_evidence", "argmax"], table))
    written = [path]
    if ev.seeds:
        spec = generator_spec(cfg)
        argmaxes = []
        for s in ev.seeds:
            curve = evidence_curve(generate(spec, s), ev.degrees, prior, ev.basis, ev.noise_variance,
                                   laplace=False)
            argmaxes.append(max(curve, key=lambda r: r.log_evidence).degree)
        footer = [f"median_argmax={float(np.median(argmaxes))!r}"]
        seeds_path = out / "evidence_argmax.csv"
        write_text(seeds_path, render_csv(["seed", "argmax_degree"], list(zip(ev.seeds, argmaxes)), footer))
        written.append(seeds_path)
    if svg:
        xs = [r.degree for r in rows]
        series = {"log evidence": (xs, [r.log_evidence for r in rows]), "BIC": (xs, [r.bic for r in rows])}
        svg_path = out / "evidence_curve.svg"
        write_text(svg_path, line_plot_svg(series, "Log evidence versus degree", "degree", "log evidence"))
        written.append(svg_path)
    return written


def cmd_deaton(cfg: RunConfig, out: Path, verify: bool = False, base: Path | None = None, **_) -> list[Path]:
    dc = cfg.deaton
    data = _dataset(cfg, dc.dataset, base)
    design = data_orthonormal_design(data.x, dc.degree, domain=data.spec.domain)
    stats = CoefficientStats.from_design(design, data.y)
    p1 = dc.degree + 1
    schedule = GammaPriorSchedule.default(p1, dc.gamma.base_shape, dc.gamma.shape_step, dc.gamma.scale)
    fit = deaton_fit(stats, schedule, dc.weights)
    shrunk = shrinkage_posterior_means(stats, fit)
    rows = [[i, stats.theta_hat[i], fit.v_unconstrained[i], fit.v_isotonic[i], fit.z[i], shrunk[i]]
            for i in range(p1)]
    rows.append([p1, None, fit.v_unconstrained[p1], fit.v_isotonic[p1], None, None])
    blocks = " ".join(f"{a}-{b}" for a, b in fit.pool_blocks)
    footer = [f"sigma2_hat={fit.sigma2_hat!r}", f"s={stats.s!r}", f"d={stats.d}", f"N={stats.n}",
              f"pool_blocks={blocks}"]
    if verify:
        model = GaussianLinearModel(design, induced_prior_variances(fit), fit.sigma2_hat)
        gap = float(np.max(np.abs(posterior(model, data.y).mean - shrunk)))
        if not gap <= VERIFY_TOL:
            raise NumericalError(f"shrinkage identity check failed: max abs difference {gap:.3g}")
        footer.append(f"verify_max_abs_diff={gap!r}")
    path = out / "deaton_fit.csv"
    header = ["index", "theta_hat", "v_unconstrained", "v_isotonic", "z", "shrunk_coefficient"]
    write_text(path, render_csv(header, rows, footer))
    return [path]


def cmd_occam(cfg: RunConfig, out: Path, **_) -> list[Path]:
    oc = cfg.occam
    hyps = [
        ArithmeticHypothesis("arithmetic", oc.arithmetic_low, oc.arithmetic_high),
        PolynomialHypothesis("cubic", 3, fraction_values(oc.cubic_max_numerator, oc.cubic_max_denominator)),
    ]
    evs = [discrete_evidence(h, oc.data) for h in hyps]
    total = sum((e.probability for e in evs), Fraction(0))
    rows = []
    for h, e in zip(hyps, evs):
        post = float(e.probability / total) if total else float("nan")
        if evs[0].count:
            bf = float(e.probability / evs[0].probability)
        else:
            bf = float("nan") if e.count == 0 else float("inf")
        rows.append([h.name, e.count, e.grid_size, e.value, post, bf])
    footer = [f"{h.name}_evidence={e.count}/{e.grid_size}" for h, e in zip(hyps, evs)]
    path = out / "occam.csv"
    write_text(path, render_csv(["name", "count", "grid_size", "evidence", "posterior", "bayes_factor"],
                                rows, footer))
    return [path]


HANDLERS = {"gen": cmd_gen, "sweep": cmd_sweep, "evidence": cmd_evidence, "deaton": cmd_deaton,
            "occam": cmd_occam}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bayesdd", description="Bayesian model selection and double descent lab")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run configuration (defaults used when omitted)")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--svg", action="store_true", help="also write SVG plots (sweep, evidence)")
    ap.add_argument("--verify", action="store_true", help="run cross-module identity checks (deaton)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        base = Path(args.config).parent if args.config else None
        written = HANDLERS[args.command](cfg, Path(args.out), svg=args.svg, verify=args.verify, base=base)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, DegreesOfFreedomError, DomainError) as exc:
        print(str(exc), file=sys.stderr)
        return 3
    for p in written:
        print(p)
    return 0
