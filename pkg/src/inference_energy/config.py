"""Run configuration: a YAML document describing scenarios, fleet and output.

Unknown keys are rejected and every invalid field is reported at once.
Relative paths resolve against the directory holding the config file.
"""
from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .energy_model import EffectiveLengthMode, NodeSpec, PowerMode
from .fleet import BetaComponents, FleetSpec
from .scenario import ALPHA_CATEGORIES, AlphaSpec, ScenarioSpec, WorkloadSpec, build_members
from .tps_model import TpsModel


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists one message per bad field."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class NodeConfig(_Strict):
    gpu_count: int = Field(8, ge=1)
    p_max_kw: float = Field(11.3, gt=0)
    p_idle_kw: float = Field(2.7, ge=0)

    @model_validator(mode="after")
    def _idle_below_max(self):
        if self.p_idle_kw >= self.p_max_kw:
            raise ValueError("p_idle_kw must be below p_max_kw")
        return self


class WorkloadConfig(_Strict):
    regime_name: str = "traditional"
    l_in: int = Field(500, ge=0)
    l_out_median: float = Field(300, gt=0)
    l_eff_mode: EffectiveLengthMode = EffectiveLengthMode.OUTPUT_ONLY
    l_out_distribution: Literal["exponential", "fixed"] = "exponential"


class QuantileRange(_Strict):
    p5: float = Field(gt=0)
    p95: float = Field(gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.p95 < self.p5:
            raise ValueError("p95 must be >= p5")
        return self


class PueConfig(QuantileRange):
    p5: float = Field(1.05, ge=1)
    p95: float = Field(1.40, ge=1)


class PowerConfig(_Strict):
    mode: PowerMode = PowerMode.INDEPENDENT
    p5_frac: float = Field(0.4, gt=0, le=1)
    p95_frac: float = Field(0.9, gt=0, le=1)
    center_mode: Literal["quantile_matched", "recentered"] = "quantile_matched"
    center_frac: float = Field(0.7, gt=0, le=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.p95_frac < self.p5_frac:
            raise ValueError("p95_frac must be >= p5_frac")
        return self


class AlphaConfig(QuantileRange):
    category: Literal[ALPHA_CATEGORIES]
    enabled: bool = True


class ScenarioConfig(_Strict):
    name: str = Field(min_length=1)
    models: list[str] = Field(min_length=1)
    workload: WorkloadConfig = WorkloadConfig()
    pue: PueConfig = PueConfig()
    power: PowerConfig = PowerConfig()
    alphas: list[AlphaConfig] = []
    n_samples: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = Field(None, ge=0, lt=2**64)


class FleetPart(_Strict):
    scenario: Optional[str] = None
    samples_csv: Optional[str] = None
    weight: float = Field(gt=0, le=1)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.scenario is None) == (self.samples_csv is None):
            raise ValueError("give exactly one of 'scenario' or 'samples_csv'")
        return self


class FleetEntry(_Strict):
    name: str = Field(min_length=1)
    parts: list[FleetPart] = Field(min_length=1)

    @model_validator(mode="after")
    def _weights_sum_to_one(self):
        total = sum(p.weight for p in self.parts)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"part weights must sum to 1, got {total}")
        return self


class BetaConfig(_Strict):
    mean_utilization: float = Field(0.75, gt=0, le=1)
    p_max_kw: float = Field(11.3, gt=0)
    p_idle_kw: float = Field(2.7, ge=0)
    redundancy_factor: float = Field(1.10, ge=1)
    interconnect_factor: float = Field(1.12, ge=1)


class FleetConfig(_Strict):
    queries_per_day: float = Field(1e9, ge=1)
    beta: Optional[float] = Field(None, ge=1)
    beta_components: BetaConfig = BetaConfig()
    entries: list[FleetEntry] = []


class OutputConfig(_Strict):
    format: Literal["csv", "text"] = "text"
    destination: Optional[str] = None
    histogram_bins: int = Field(50, ge=1)


class RunConfig(_Strict):
    benchmark_path: Optional[str] = None
    underdetermined: Literal["pooled_slopes", "min_norm"] = "pooled_slopes"
    seed: int = Field(0, ge=0, lt=2**64)
    n_samples: int = Field(10_000, ge=1)
    workers: int = Field(1, ge=1)
    nodes: dict[str, NodeConfig] = {}
    scenarios: list[ScenarioConfig] = []
    fleet: Optional[FleetConfig] = None
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _cross_references(self):
        names = [s.name for s in self.scenarios]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"duplicate scenario names: {dupes}")
        if self.fleet:
            for entry in self.fleet.entries:
                for part in entry.parts:
                    if part.scenario is not None and part.scenario not in names:
                        raise ValueError(f"fleet entry {entry.name!r} references unknown scenario {part.scenario!r}")
        for s in self.scenarios:
            cats = [a.category for a in s.alphas]
            if len(set(cats)) != len(cats):
                raise ValueError(f"scenario {s.name!r} repeats an alpha category")
        return self

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


def _format_errors(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "<root>"
        out.append(f"{where}: {err['msg']}")
    return out


def parse_config(text: str, base_dir: str | Path = ".", check_files: bool = True) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<document>: not valid YAML ({exc})"]) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(["<document>: top level must be a mapping"])
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    if check_files:
        missing = []
        if config.benchmark_path and not resolve(config.benchmark_path, base_dir).is_file():
            missing.append(f"benchmark_path: file not found: {config.benchmark_path}")
        for entry in (config.fleet.entries if config.fleet else []):
            for k, part in enumerate(entry.parts):
                if part.samples_csv and not resolve(part.samples_csv, base_dir).is_file():
                    missing.append(f"fleet.entries.{entry.name}.parts.{k}.samples_csv: file not found: {part.samples_csv}")
        if missing:
            raise ConfigError(missing)
    return config


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"<file>: cannot read {path}: {exc.strerror}"]) from None
    return parse_config(text, base_dir=path.parent)


def resolve(path: str, base_dir: str | Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else Path(base_dir) / p


def node_specs(config: RunConfig) -> dict[str, NodeSpec]:
    return {name: NodeSpec(**n.model_dump()) for name, n in config.nodes.items()}


def build_scenario(config: RunConfig, sc: ScenarioConfig, models: dict[str, TpsModel],
                   gpu_counts: dict[str, int], seed: int | None = None) -> ScenarioSpec:
    """``seed`` (e.g. a command-line override) beats both config seeds."""
    members = build_members(models, sc.models, node_specs(config), gpu_counts)
    if seed is None:
        seed = sc.seed if sc.seed is not None else config.seed
    return ScenarioSpec(
        members=members,
        workload=WorkloadSpec(**sc.workload.model_dump()),
        pue_p5=sc.pue.p5,
        pue_p95=sc.pue.p95,
        power_mode=sc.power.mode,
        power_p5_frac=sc.power.p5_frac,
        power_p95_frac=sc.power.p95_frac,
        power_center_mode=sc.power.center_mode,
        power_center_frac=sc.power.center_frac,
        alphas=tuple(AlphaSpec(a.category, a.p5, a.p95, a.enabled) for a in sc.alphas),
        n_samples=sc.n_samples or config.n_samples,
        seed=seed,
        name=sc.name,
    )


def build_fleet(config: RunConfig) -> FleetSpec:
    fc = config.fleet or FleetConfig()
    return FleetSpec(fc.queries_per_day, fc.beta, BetaComponents(**fc.beta_components.model_dump()))
