"""Versioned JSON run configuration.

Every section is optional and falls back to its defaults; unknown keys are
rejected with the dotted path of the offending field.
"""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class GeneratorConfig:
    true_degree: int = 10
    true_coefficients: list[float] | None = None
    noise_sd: float = 0.3
    n: int = 20
    x_design: str = "equispaced"
    domain: list[float] = field(default_factory=lambda: [-1.0, 1.0])


@dataclass
class PriorConfig:
    kind: str = "young"
    tau2: float = 1.0


@dataclass
class FeaturesConfig:
    kind: str = "random_fourier"
    scale: float = 20.0


@dataclass
class SweepConfig:
    complexities: list[int] = field(default_factory=lambda: list(range(2, 41, 2)))
    replicates: int = 100
    test_points: int = 512
    prior: PriorConfig = field(default_factory=PriorConfig)
    features: FeaturesConfig = field(default_factory=FeaturesConfig)
    ridge_lambda: float | None = None


@dataclass
class EvidenceConfig:
    degrees: list[int] = field(default_factory=lambda: list(range(20)))
    basis: str = "legendre"
    prior: PriorConfig = field(default_factory=lambda: PriorConfig("constant", 1.0))
    noise_variance: float | None = None
    dataset: str | None = None
    seeds: list[int] = field(default_factory=list)
    laplace: bool = True


@dataclass
class GammaConfig:
    base_shape: float = 1.0
    shape_step: float = 0.1
    scale: float = 10.0


@dataclass
class DeatonConfig:
    degree: int = 10
    weights: str = "unit"
    dataset: str | None = None
    gamma: GammaConfig = field(default_factory=GammaConfig)


@dataclass
class OccamConfig:
    data: list[int] = field(default_factory=lambda: [-1, 3, 7, 11])
    arithmetic_low: int = -50
    arithmetic_high: int = 50
    cubic_max_numerator: int = 50
    cubic_max_denominator: int = 4


@dataclass
class RunConfig:
    version: int = CONFIG_VERSION
    seed: int = 0
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    evidence: EvidenceConfig = field(default_factory=EvidenceConfig)
    deaton: DeatonConfig = field(default_factory=DeatonConfig)
    occam: OccamConfig = field(default_factory=OccamConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _check_value(tp, value, path):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _check_value(inner[0], value, path)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        (item,) = typing.get_args(tp)
        return [_check_value(item, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if dataclasses.is_dataclass(tp):
        return _load(tp, value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise TypeError(f"unsupported config type {tp}")


def _load(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"{where}{unknown[0]}: unknown key")
    kwargs = {}
    for name, value in data.items():
        sub = f"{path}.{name}" if path else name
        kwargs[name] = _check_value(hints[name], value, sub)
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    version = data.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"version: unsupported config version {version!r} (expected {CONFIG_VERSION})")
    cfg = _load(RunConfig, data, "")
    validate(cfg)
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    return config_from_dict(data)


def validate(cfg: RunConfig) -> None:
    """Semantic checks beyond types; raises ConfigError naming the field."""
    g = cfg.generator
    checks = [
        (g.n >= 2, "generator.n", "must be at least 2"),
        (g.noise_sd > 0, "generator.noise_sd", "must be positive"),
        (g.true_degree >= 0, "generator.true_degree", "must be nonnegative"),
        (g.x_design in ("equispaced", "uniform_random"), "generator.x_design",
         "must be 'equispaced' or 'uniform_random'"),
        (len(g.domain) == 2 and g.domain[0] < g.domain[1], "generator.domain", "must be [a, b] with a < b"),
        (g.true_coefficients is None or len(g.true_coefficients) == g.true_degree + 1,
         "generator.true_coefficients", "needs true_degree + 1 entries"),
        (cfg.seed >= 0, "seed", "must be nonnegative"),
        (len(cfg.sweep.complexities) > 0, "sweep.complexities", "must be nonempty"),
        (cfg.sweep.complexities == sorted(cfg.sweep.complexities), "sweep.complexities", "must be sorted"),
        (all(c >= 1 for c in cfg.sweep.complexities), "sweep.complexities", "entries must be >= 1"),
        (cfg.sweep.replicates >= 2, "sweep.replicates", "must be at least 2"),
        (cfg.sweep.test_points >= 2, "sweep.test_points", "must be at least 2"),
        (cfg.sweep.features.kind in ("random_fourier", "random_relu"), "sweep.features.kind",
         "must be 'random_fourier' or 'random_relu'"),
        (cfg.sweep.features.scale > 0, "sweep.features.scale", "must be positive"),
        (cfg.sweep.ridge_lambda is None or cfg.sweep.ridge_lambda >= 0, "sweep.ridge_lambda",
         "must be nonnegative"),
        (len(cfg.evidence.degrees) > 0, "evidence.degrees", "must be nonempty"),
        (all(d >= 0 for d in cfg.evidence.degrees), "evidence.degrees", "entries must be >= 0"),
        (cfg.evidence.basis in ("legendre", "data_orthonormal"), "evidence.basis",
         "must be 'legendre' or 'data_orthonormal'"),
        (cfg.evidence.noise_variance is None or cfg.evidence.noise_variance > 0,
         "evidence.noise_variance", "must be positive"),
        (cfg.deaton.degree >= 0, "deaton.degree", "must be nonnegative"),
        (cfg.deaton.weights in ("unit", "precision"), "deaton.weights", "must be 'unit' or 'precision'"),
        (cfg.deaton.gamma.base_shape > 0.5, "deaton.gamma.base_shape", "must exceed 1/2"),
        (cfg.deaton.gamma.shape_step >= 0, "deaton.gamma.shape_step", "must be nonnegative"),
        (cfg.deaton.gamma.scale > 0, "deaton.gamma.scale", "must be positive"),
        (len(cfg.occam.data) >= 2, "occam.data", "needs at least 2 integers"),
        (cfg.occam.arithmetic_low <= cfg.occam.arithmetic_high, "occam.arithmetic_low",
         "must not exceed arithmetic_high"),
        (cfg.occam.cubic_max_numerator >= 0, "occam.cubic_max_numerator", "must be nonnegative"),
        (cfg.occam.cubic_max_denominator >= 1, "occam.cubic_max_denominator", "must be at least 1"),
    ]
    for prior, where in ((cfg.sweep.prior, "sweep.prior"), (cfg.evidence.prior, "evidence.prior")):
        checks.append((prior.kind in ("young", "constant"), f"{where}.kind", "must be 'young' or 'constant'"))
        checks.append((prior.tau2 > 0, f"{where}.tau2", "must be positive"))
    for ok, where, msg in checks:
        if not ok:
            raise ConfigError(f"{where}: {msg}")
