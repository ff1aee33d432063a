# ABOUTME: Run configuration: one JSON document with a section per subsystem
# ABOUTME: Cross-validated at load; pydantic failures surface as ConfigError

import json
import logging
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from edgesched.datagen import InstanceDistribution
from edgesched.exceptions import ConfigError
from edgesched.ga import GaConfig
from edgesched.nn.networks import NetConfig
from edgesched.nn.training import TrainConfig
from edgesched.oracle import MAX_ENUMERATION_N, OracleConfig
from edgesched.scheduling.baselines import METHODS
from edgesched.scheduling.extender import ExtenderConfig
from edgesched.scheduling.sac import SacConfig
from edgesched.types import SystemParams

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "EDGESCHED_LOG_LEVEL"
WORKERS_ENV = "EDGESCHED_WORKERS"
DEFAULT_LOG_LEVEL = "WARNING"


class EvalConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    methods: list[str] = Field(default_factory=lambda: ["all-local", "all-offload", "ga"])
    oracle_max_n: int = Field(
        default=MAX_ENUMERATION_N, ge=0, description="Largest N that gets an oracle gap"
    )
    k_sweep: list[int] = Field(default_factory=lambda: [1, 5, 10, 20, 40])
    sigma_sweep: list[float] = Field(
        default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    )
    workers: int = Field(default=1, ge=1)

    @field_validator("methods")
    @classmethod
    def _known_methods(cls, value: list[str]) -> list[str]:
        unknown = [m for m in value if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; valid methods: {', '.join(METHODS)}")
        return value

    @field_validator("oracle_max_n")
    @classmethod
    def _cap_oracle(cls, value: int) -> int:
        return min(value, MAX_ENUMERATION_N)

    @field_validator("sigma_sweep")
    @classmethod
    def _open_unit(cls, value: list[float]) -> list[float]:
        if any(not 0 < s < 1 for s in value):
            raise ValueError("sigma_sweep values must lie in (0, 1)")
        return value


class PathsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    data_dir: Path = Path("data")
    checkpoint_dir: Path = Path("checkpoints")
    report_dir: Path = Path("reports")


class RunConfig(BaseModel):
    """Complete configuration of a generate/train/evaluate/solve run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    params: SystemParams = Field(default_factory=SystemParams)
    distribution: InstanceDistribution = Field(default_factory=InstanceDistribution)
    ga: GaConfig = Field(default_factory=GaConfig)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    net: NetConfig = Field(default_factory=NetConfig)
    extender: ExtenderConfig = Field(default_factory=ExtenderConfig)
    sac: SacConfig = Field(default_factory=SacConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _cross_validate(self) -> "RunConfig":
        n_max = max(self.distribution.n_values)
        if n_max > self.params.n_bar:
            raise ValueError(
                f"distribution.n_values contains {n_max}, above params.n_bar = {self.params.n_bar}"
            )
        if self.extender.n_bar < n_max:
            raise ValueError(f"extender.n_bar = {self.extender.n_bar} is below N = {n_max}")
        if self.extender.n_bar > self.params.n_bar:
            raise ValueError(
                f"extender.n_bar = {self.extender.n_bar} exceeds params.n_bar "
                f"= {self.params.n_bar}"
            )
        if self.sac.k > self.extender.n_bar:
            raise ValueError(f"sac.k = {self.sac.k} exceeds extender.n_bar")
        if any(k > self.extender.n_bar for k in self.eval.k_sweep):
            raise ValueError("eval.k_sweep values must not exceed extender.n_bar")
        return self


def load_config(path: Path | None) -> RunConfig:
    """Read a RunConfig from JSON; None gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        raw: Any = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
    logger.debug(f"Loaded config from {path}")
    return cfg

