"""Configuration models for warpsched.

All user-facing configuration is YAML validated by pydantic models:

- ``GpuConfig``: SM count, residency limits, pipeline budgets, latency table
  and cache geometry of the simulated GPU
- ``TlConfig``: fetch-group size of the two-level scheduler
- ``RlParams`` / ``RlwsConfig``: learning parameters, attribute subset and
  bucket counts of the learned schedulers
- ``GaConfig``: genetic-algorithm search settings and value palettes
- ``ExperimentConfig``: kernels x policies x seeds comparison runs

Defaults taken from the Fermi GTX480 hardware description or from the tuned
rlws / rlws_ms settings say so in a trailing comment.
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from warpsched.buckets import ATTRIBUTES, BucketSpec, default_bucket_spec
from warpsched.errors import ConfigError

DECISION_INTERVALS = (1, 2, 4, 8, 16)


class CacheGeometry(BaseModel):
    """Set-associative cache shape plus the latency added when it is consulted."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    size: int = Field(gt=0)
    assoc: int = Field(gt=0)
    line: int = Field(default=128, gt=0)
    latency: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_shape(self) -> CacheGeometry:
        if self.size % (self.assoc * self.line):
            raise ValueError("size must be a multiple of assoc * line")
        return self

    @property
    def num_sets(self) -> int:
        return self.size // (self.assoc * self.line)


class GpuConfig(BaseModel):
    """Simulated GPU. The latency values are artifact choices, not measured ones."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_sms: int = Field(default=15, gt=0)  # GTX480: 15 SMs
    max_tbs_per_sm: int = Field(default=8, gt=0)  # GTX480: 8 TBs per SM
    max_warps_per_sm: int = Field(default=48, gt=0)  # GTX480: 1536 threads / 32
    warp_size: int = Field(default=32, gt=0)
    registers_per_sm: int = Field(default=32768, gt=0)  # GTX480: 32768 registers
    shared_mem_per_sm: int = Field(default=48 * 1024, gt=0)  # GTX480: 48 KB
    sp_issue_per_scheduler: int = Field(default=1, gt=0)
    sfu_issue_per_cycle: int = Field(default=1, gt=0)  # one SFU instr per cycle
    mem_issue_per_cycle: int = Field(default=1, gt=0)  # one MEM instr per cycle
    latencies: dict[str, int] = Field(
        default_factory=lambda: {"sp": 4, "sfu": 16, "stc": 30, "barrier": 1}
    )
    l1: CacheGeometry = CacheGeometry(size=16 * 1024, assoc=4, latency=30)  # 16 KB
    l2: CacheGeometry = CacheGeometry(size=768 * 1024, assoc=8, latency=120)  # 768 KB
    dram_latency: int = Field(default=300, ge=0)
    divergence_factor: int = Field(default=2, ge=1)
    max_cycles: int = Field(default=5_000_000, gt=0)

    @model_validator(mode="after")
    def _check_slots(self) -> GpuConfig:
        if self.max_warps_per_sm % 2:
            raise ValueError("max_warps_per_sm must be even (two scheduler slots)")
        return self

    @property
    def warps_per_slot(self) -> int:
        """Per-scheduler warp bound (24 on the default configuration)."""
        return self.max_warps_per_sm // 2

    @property
    def global_hit_latencies(self) -> tuple[int, int, int]:
        """Cumulative latency of an L1 hit, an L2 hit and a DRAM access."""
        l1 = self.l1.latency
        l2 = l1 + self.l2.latency
        return l1, l2, l2 + self.dram_latency

    def latency_of(self, latency_class: str) -> int:
        try:
            return self.latencies[latency_class]
        except KeyError as e:
            raise ConfigError(
                f"unknown latency class {latency_class!r}; "
                f"configured: {sorted(self.latencies)}"
            ) from e


class TlConfig(BaseModel):
    """Two-level scheduler settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    fetch_group_size: int = Field(default=8, gt=0)


class RlParams(BaseModel):
    """Learning parameters of one SARSA agent."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(default=0.09, gt=0.0, le=1.0)  # tuned rlws: 0.09
    epsilon: float = Field(default=0.04, ge=0.0, le=1.0)  # tuned rlws: 0.04
    gamma: float = Field(default=0.95, ge=0.0, lt=1.0)  # tuned rlws: 0.95
    reward: float = 1.0  # tuned rlws: 1
    penalty: float = 0.0  # tuned rlws: 0
    decay: float = Field(default=0.5, gt=0.0, le=1.0)
    decay_interval: int = Field(default=100_000, gt=0)
    floor_fraction: float = Field(default=0.1, ge=0.0, le=1.0)

    @property
    def r_max(self) -> float:
        return max(self.reward, self.penalty)


class RlwsConfig(BaseModel):
    """Learned scheduler: parameters, attribute subset and bucket encoding.

    ``attributes`` maps attribute symbol to bucket count; ``boundaries``
    optionally overrides the generated bucket starts of an attribute.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    params: RlParams = RlParams()
    attributes: dict[str, int] = Field(
        default_factory=lambda: {
            # tuned rlws attribute set
            "AGML": 2,
            "GNMIE": 8,
            "L1MP": 8,
            "L2MP": 2,
            "NFMI": 4,
            "NIPL1M": 4,
            "NRAI": 4,
            "SMNMIE": 4,
        }
    )
    boundaries: dict[str, list[float]] = Field(default_factory=dict)
    decision_interval: int = 1
    persist_theta: bool = False

    @model_validator(mode="after")
    def _check_attributes(self) -> RlwsConfig:
        if not self.attributes:
            raise ValueError("at least one attribute is required")
        if self.decision_interval not in DECISION_INTERVALS:
            raise ValueError(f"decision_interval must be one of {DECISION_INTERVALS}")
        for name in [*self.attributes, *self.boundaries]:
            if name not in ATTRIBUTES:
                raise ValueError(
                    f"unknown attribute {name!r}; valid: {', '.join(ATTRIBUTES)}"
                )
        for name, count in self.attributes.items():
            default_bucket_spec(name, count)
        for name, starts in self.boundaries.items():
            # raises ValueError on gaps / overlaps
            BucketSpec.from_starts(name, starts)
        return self

    def bucket_specs(self) -> list[BucketSpec]:
        """Bucket specs of the active attributes, in attribute-table order."""
        specs = []
        for name in ATTRIBUTES:
            if name not in self.attributes:
                continue
            if name in self.boundaries:
                specs.append(BucketSpec.from_starts(name, self.boundaries[name]))
            else:
                specs.append(default_bucket_spec(name, self.attributes[name]))
        return specs


def meta_rlws_config() -> RlwsConfig:
    """Default configuration of the meta-action scheduler (tuned rlws_ms setting)."""
    return RlwsConfig(
        params=RlParams(alpha=0.01, epsilon=0.01, gamma=0.999, reward=1.0, penalty=0.0),
        attributes={
            "ATBWB": 2,
            "ATBWF": 2,
            "NAIPMI": 8,
            "NRGMI": 8,
            "NSW": 4,
            "NWS": 2,
            "RSPI": 2,
        },
    )


class Palettes(BaseModel):
    """Discrete values explored per RL parameter gene (at least five each)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: list[float] = [0.005, 0.01, 0.05, 0.09, 0.2]
    epsilon: list[float] = [0.005, 0.01, 0.02, 0.04, 0.1]
    gamma: list[float] = [0.5, 0.8, 0.9, 0.95, 0.999]
    reward: list[float] = [0.5, 1.0, 2.0, 4.0, 8.0]
    penalty: list[float] = [-1.0, -0.5, -0.25, 0.0, 0.25]

    @model_validator(mode="after")
    def _check_sizes(self) -> Palettes:
        for name in ("alpha", "epsilon", "gamma", "reward", "penalty"):
            values = getattr(self, name)
            if len(values) < 5:
                raise ValueError(f"palette {name} needs at least 5 values")
        if any(not 0 < a <= 1 for a in self.alpha):
            raise ValueError("alpha palette values must be in (0, 1]")
        if any(not 0 <= e <= 1 for e in self.epsilon):
            raise ValueError("epsilon palette values must be in [0, 1]")
        if any(not 0 <= g < 1 for g in self.gamma):
            raise ValueError("gamma palette values must be in [0, 1)")
        return self


class GaConfig(BaseModel):
    """Genetic-algorithm search over the learned scheduler's design space."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    population_size: int = Field(default=100, gt=0)
    children_per_gen: int = Field(default=90, ge=0)
    randoms_per_gen: int = Field(default=10, ge=0)
    elite_reinjection_period: int = Field(default=10, gt=0)
    elite_count: int = Field(default=10, ge=0)
    crossover_points: Literal[1] = 1
    max_mutations_per_child: Literal[1] = 1
    mutation_c: float = Field(default=0.02, ge=0.0)
    mutation_p_max: float = Field(default=0.25, ge=0.0, le=1.0)
    generations: int = Field(default=20, gt=0)
    suite: list[str] = Field(default_factory=lambda: ["suite:desk"], min_length=1)
    final_suite: list[str] = Field(default_factory=list)
    baseline: str = "lrr"
    variant: Literal["rlws", "rlws_ms"] = "rlws"
    decision_interval: int = 1
    palettes: Palettes = Palettes()
    gpu: GpuConfig = GpuConfig()
    seed: int = 0
    workers: int = Field(default=1, gt=0)

    @model_validator(mode="after")
    def _check_composition(self) -> GaConfig:
        if self.children_per_gen + self.randoms_per_gen != self.population_size:
            raise ValueError("children_per_gen + randoms_per_gen must equal population_size")
        if self.elite_count > self.randoms_per_gen:
            raise ValueError("elite_count cannot exceed randoms_per_gen")
        if self.decision_interval not in DECISION_INTERVALS:
            raise ValueError(f"decision_interval must be one of {DECISION_INTERVALS}")
        return self


class ExperimentConfig(BaseModel):
    """A kernels x policies x seeds comparison run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    gpu: GpuConfig = GpuConfig()
    kernels: list[str] = Field(min_length=1)
    policies: list[str] = Field(min_length=1)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    baseline: str | None = None
    overrides: dict[str, dict[str, Any]] = Field(default_factory=dict)
    output_dir: str = "runs"
    decision_log: bool = False
    event_log: bool = False
    export_theta: bool = False
    workers: int = Field(default=1, gt=0)

    @model_validator(mode="after")
    def _check_policies(self) -> ExperimentConfig:
        from warpsched.schedulers import POLICY_KEYS

        for key in [*self.policies, *self.overrides]:
            if key not in POLICY_KEYS:
                raise ValueError(
                    f"invalid policy key {key!r}; valid keys: {', '.join(POLICY_KEYS)}"
                )
        if self.baseline is not None and self.baseline not in self.policies:
            raise ValueError(f"baseline {self.baseline!r} is not among the policies")
        return self


def load_config[M: BaseModel](path: str | Path, model: type[M]) -> M:
    """Load and validate a YAML configuration file.

    Args:
        path: YAML file to read
        model: Pydantic model class to validate against

    Returns:
        The validated model instance

    Raises:
        ConfigError: If the file is missing, is not YAML, or fails validation

    Example:
        >>> cfg = load_config("configs/experiment_desk.yaml", ExperimentConfig)
        >>> cfg.policies
        ['lrr', 'gto', 'tl', 'random', 'rlws']

    """
    p = Path(path)
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"{p}: file not found") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{p}: not valid YAML: {e}") from e
    return validate_config(data or {}, model, source=str(p))


def validate_config[M: BaseModel](data: Any, model: type[M], source: str = "<config>") -> M:
    """Validate already-parsed data, wrapping pydantic errors in ConfigError."""
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"{source}: {e}") from e
