"""
Pydantic models for run configuration and persisted artifacts.
"""
import hashlib
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from tasks.base_task import TaskKind

CHECKPOINT_FORMAT = "grda-ckpt-v1"


class Method(str, Enum):
    """Training methods compared by the experiment runner."""
    SOURCE_ONLY = "source_only"
    DANN = "dann_baseline"
    GRDA = "grda"

    @classmethod
    def parse(cls, value: Union[str, "Method"]) -> "Method":
        """Accept canonical values plus the CLI spellings 'source-only' and 'dann'."""
        if isinstance(value, Method):
            return value
        aliases = {"source-only": cls.SOURCE_ONLY, "dann": cls.DANN}
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key.replace("-", "_"))


class TrainConfig(BaseModel):
    """Hyperparameters of one training run; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    lambda_d: float = Field(default=0.5, ge=0.0, description="Adversarial weight; 0 gives Source-Only")
    batch_size: int = Field(default=32, ge=2, description="Mini-batch size B (pairs need >= 2)")
    lr: float = Field(default=1e-4, gt=0.0, description="Encoder/predictor learning rate")
    disc_lr: float = Field(default=1e-4, gt=0.0, description="Discriminator learning rate")
    epochs: int = Field(default=200, ge=1)
    iterations_per_epoch: Optional[int] = Field(
        default=None, ge=1, description="Defaults to ceil(labeled samples / B)"
    )
    seed: int = Field(default=0, ge=0)
    task: TaskKind = TaskKind.CLASSIFICATION
    disc_steps: int = Field(default=1, ge=0)
    enc_steps: int = Field(default=1, ge=1)
    hidden_width: int = Field(default=64, ge=1)
    encoding_dim: int = Field(default=64, ge=1)
    optimizer: Literal["adam", "sgd"] = "adam"
    pair_policy: Literal["mixture", "uniform"] = "mixture"
    divergence_threshold: float = Field(default=1e6, gt=0.0)

    @field_validator("lr", "disc_lr", "divergence_threshold")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v

    def digest(self) -> str:
        """sha256 of the canonical (sorted-key) JSON form."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class DatasetSpec(BaseModel):
    """How the experiment runner obtains its dataset."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["dg", "chain3", "tpt", "path"] = "dg"
    n_domains: int = Field(default=15, ge=2)
    per_domain: int = Field(default=100, ge=2)
    n_sources: int = Field(default=6, ge=1)
    seed: int = Field(default=0, ge=0)
    csv: Optional[Path] = None
    split: Optional[str] = None
    path: Optional[Path] = None

    @model_validator(mode="after")
    def validate_kind_inputs(self) -> "DatasetSpec":
        if self.kind == "tpt" and (self.csv is None or self.split is None):
            raise ValueError("tpt datasets need 'csv' and 'split'")
        if self.kind == "path" and self.path is None:
            raise ValueError("path datasets need 'path'")
        if self.kind == "dg" and self.n_sources >= self.n_domains:
            raise ValueError("n_sources must be smaller than n_domains")
        return self


class RunManifest(BaseModel):
    """A grid of (method, seed) runs over one dataset."""

    model_config = ConfigDict(extra="forbid")

    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    methods: List[Method] = Field(default_factory=lambda: [Method.SOURCE_ONLY, Method.DANN, Method.GRDA])
    config: TrainConfig = Field(default_factory=TrainConfig)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])
    out_dir: Path = Path("grda_out")
    embedding_dim: int = Field(default=2, ge=1)
    pretrain_steps: int = Field(default=2000, ge=0)
    pretrain_lr: float = Field(default=0.01, gt=0.0)
    eval_draws_per_domain: int = Field(default=2000, ge=2)

    @field_validator("methods", mode="before")
    @classmethod
    def parse_methods(cls, v: Any) -> Any:
        if isinstance(v, (list, tuple)):
            return [Method.parse(m) for m in v]
        return v

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("seeds must be non-empty")
        if len(set(v)) != len(v):
            raise ValueError("seeds must be distinct")
        if any(s < 0 for s in v):
            raise ValueError("seeds must be non-negative")
        return v

    @field_validator("methods")
    @classmethod
    def validate_methods(cls, v: List[Method]) -> List[Method]:
        if not v:
            raise ValueError("methods must be non-empty")
        return v


class DomainMetric(BaseModel):
    """Metric of one domain; value is None when the domain had no evaluation samples."""
    domain: int
    value: Optional[float]
    n_samples: int = 0
    hop: Optional[int] = None
    is_source: bool = False


class MetricTable(BaseModel):
    """Per-domain metrics of one (method, seed) run plus aggregates."""
    method: str
    seed: int
    config_digest: str = ""
    metric_name: Literal["accuracy", "mse"]
    domains: List[DomainMetric]
    aggregates: Dict[str, Optional[float]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_ranges(self) -> "MetricTable":
        for d in self.domains:
            if d.value is None:
                continue
            if self.metric_name == "accuracy" and not 0.0 <= d.value <= 100.0:
                raise ValueError(f"accuracy of domain {d.domain} outside [0, 100]: {d.value}")
            if self.metric_name == "mse" and d.value < 0.0:
                raise ValueError(f"negative mse for domain {d.domain}: {d.value}")
        return self

    def value_of(self, domain: int) -> Optional[float]:
        for d in self.domains:
            if d.domain == domain:
                return d.value
        return None


class MetricRow(BaseModel):
    """One line of the metrics CSV."""
    method: str
    seed: int
    domain: str
    hop_level: str
    metric_name: str
    value: Optional[float]


class HistoryRow(BaseModel):
    """One epoch of the loss history."""

    model_config = ConfigDict(populate_by_name=True)

    epoch: int
    l_f: float = Field(alias="L_f")
    l_d: float = Field(alias="L_d")
    ceiling: float
    gap: float


class EquilibriumReport(BaseModel):
    """Result of one equilibrium condition check."""
    kind: str
    residual: float = Field(ge=0.0)
    tolerance: float = Field(ge=0.0)
    verdict: bool
    grid: Dict[str, Any] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)
    worst_bin: Optional[List[int]] = None
    value: Optional[float] = None
    ceiling: Optional[float] = None


class DatasetMetadata(BaseModel):
    """Sidecar JSON written next to a dataset CSV."""
    task_name: str
    task: TaskKind
    n_domains: int
    source_domains: List[int]
    x_dim: int
    out_dim: int
    seed: Optional[int] = None
    extra: Dict[str, Any] = Field(default_factory=dict)


class CheckpointHeader(BaseModel):
    """JSON header line of a model checkpoint."""
    format: Literal["grda-ckpt-v1"] = CHECKPOINT_FORMAT
    method: Method
    config: TrainConfig
    task: TaskKind
    x_dim: int
    out_dim: int
    n_domains: int
    embeddings: List[List[float]]
    graph: Dict[str, Any]
    shapes: Dict[str, List[int]]
    dataset_metadata: Dict[str, Any] = Field(default_factory=dict)


class CliConfig(BaseModel):
    """Resolved invocation of one subcommand."""

    model_config = ConfigDict(extra="forbid")

    subcommand: str
    config_path: Optional[Path] = None
    overrides: Dict[str, str] = Field(default_factory=dict)
    verbosity: int = Field(default=0, ge=0)
    out_dir: Path = Path("grda_out")

    @field_validator("overrides", mode="before")
    @classmethod
    def parse_overrides(cls, v: Any) -> Any:
        """Accept ``["key=value", ...]`` as given on the command line."""
        if isinstance(v, (list, tuple)):
            parsed = {}
            for item in v:
                key, sep, value = str(item).partition("=")
                if not sep or not key.strip():
                    raise ValueError(f"override '{item}' is not of the form key=value")
                parsed[key.strip()] = value.strip()
            return parsed
        return v
