"""
Application configuration management using Pydantic settings.
"""
from functools import lru_cache
from pathlib import Path
from pydantic import AliasChoices, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings loaded from GRDA_* environment variables or a .env file."""

    model_config = SettingsConfigDict(
        env_prefix="GRDA_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # Output
    out_dir: Path = Field(
        default=Path("grda_out"),
        validation_alias=AliasChoices("GRDA_OUT", "out_dir"),
        description="Default directory for datasets, checkpoints and reports"
    )

    # Application Settings
    log_level: str = Field(default="INFO", description="Logging level")
    log_json: bool = Field(default=False, description="Emit JSON log lines")

    # Training defaults (Adam, rates within 1e-5..1e-4, lambda_d within 0.1..1)
    default_lambda_d: float = Field(default=0.5, description="Adversarial weight lambda_d")
    default_lr: float = Field(default=1e-4, description="Encoder/predictor learning rate")
    default_disc_lr: float = Field(default=1e-4, description="Discriminator learning rate")
    default_batch_size: int = Field(default=32, description="Mini-batch size B")
    default_epochs: int = Field(default=200, description="Training epochs")
    hidden_width: int = Field(default=64, description="Width of every hidden FC layer")
    embedding_dim: int = Field(default=2, description="Node embedding dimension k")
    divergence_threshold: float = Field(
        default=1e6,
        description="Abort training when any loss exceeds this value"
    )

    # Embedding pretraining
    pretrain_lr: float = Field(default=0.01, description="Learning rate for L_g pretraining")
    pretrain_steps: int = Field(default=2000, description="Full-batch steps for L_g pretraining")

    # Graph sampling
    graph_max_retries: int = Field(
        default=100,
        description="Resampling attempts before a DG graph is declared disconnected"
    )

    # Theory verification
    grid_bins: int = Field(default=32, description="Histogram bins per axis")
    trained_tolerance: float = Field(default=1e-2, description="Verdict tolerance for trained encoders")
    analytic_tolerance: float = Field(default=1e-9, description="Verdict tolerance for analytic densities")
    domain_balance_tolerance: float = Field(
        default=0.10,
        description="Maximum relative spread of per-domain sample counts under uniform p(u)"
    )

    # Evaluation
    eval_draws_per_domain: int = Field(
        default=2000,
        description="Fresh held-out draws per domain for generated classification tasks"
    )

    # Experiment runner
    max_workers: int = Field(default=1, description="Parallel worker processes for run-experiment")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Ensure log level is valid."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        v_upper = v.upper()
        if v_upper not in valid_levels:
            raise ValueError(f"log_level must be one of {valid_levels}")
        return v_upper

    @field_validator(
        "default_lr", "default_disc_lr", "pretrain_lr",
        "trained_tolerance", "analytic_tolerance", "divergence_threshold"
    )
    @classmethod
    def validate_positive(cls, v: float) -> float:
        """Rates and tolerances must be strictly positive."""
        if v <= 0:
            raise ValueError("must be > 0")
        return v

    @model_validator(mode="after")
    def validate_sizes(self) -> "Settings":
        """Validate integer knobs that the model builders rely on."""
        if self.default_batch_size < 2:
            raise ValueError("default_batch_size must be >= 2 (pairs are needed)")
        if self.embedding_dim < 1 or self.hidden_width < 1:
            raise ValueError("embedding_dim and hidden_width must be positive")
        if self.max_workers < 1:
            raise ValueError("max_workers must be >= 1")
        return self


@lru_cache()
def get_settings() -> Settings:
    """
    Get cached settings instance.

    Uses lru_cache for efficient singleton pattern that's also testable.
    """
    return Settings()


def reload_settings() -> Settings:
    """Reload settings from environment (useful for testing)."""
    get_settings.cache_clear()
    return get_settings()
