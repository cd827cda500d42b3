"""
Configuration management for fault-arbiter.

A run is configured from, in priority order:
1. Explicit overrides (CLI flags such as --seed, --out, --backend)
2. Environment variables (FAULT_ARBITER_ prefix, "__" between nested keys,
   e.g. FAULT_ARBITER_ARBITRATION__THETA=0.6)
3. One TOML file passed with --config
4. Defaults (reproduced in fault_arbiter.example.toml)

Design Principles:
- Load configuration once at CLI start and cache it for every stage
- Reject unknown keys and out-of-range thresholds up front
- Keep secrets (the LLM API key) in the environment only
- Testable: reset_run_config() clears the cached instance
"""

import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from contextvars import ContextVar
from functools import lru_cache
from pathlib import Path
from typing import Any, Optional

from pydantic import Field, SecretStr, ValidationError, field_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from fault_arbiter.exceptions import (
    create_configuration_missing_error,
    translate_validation_exception,
)
from fault_arbiter.params import ENV_PREFIX
from fault_arbiter.schemas.settings_schema import (
    ArbitrationConfig,
    BayesSettings,
    CalibrationSettings,
    ChartSettings,
    ExperimentSettings,
    FeatureConfig,
    ReplaySettings,
    SynthSettings,
)
from fault_arbiter.schemas.signal_schema import DatasetSpec


logger = logging.getLogger(__name__)


# TOML file consulted by RunConfig's settings sources for the current load
_toml_file: ContextVar[Optional[Path]] = ContextVar("fault_arbiter_toml_file", default=None)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class RunConfig(BaseSettings):
    """
    Complete run configuration.

    Every threshold the pipeline uses lives in one of the nested sections;
    the sections validate their own ranges.
    """

    model_config = SettingsConfigDict(
        env_prefix=ENV_PREFIX,
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="forbid",
    )

    seed: int = Field(7, ge=0, lt=2**64, description="Base seed; repeats use seed, seed+1, ...")
    out_dir: Path = Field(Path("runs/default"), description="Root of every output path")
    workers: int = Field(4, ge=1, description="Parallel workers for per-sample stages")
    log_level: str = Field("INFO", description="Root log level")

    synth: SynthSettings = Field(default_factory=SynthSettings)
    features: FeatureConfig = Field(default_factory=FeatureConfig)
    bayes: BayesSettings = Field(default_factory=BayesSettings)
    arbitration: ArbitrationConfig = Field(default_factory=ArbitrationConfig)
    calibration: CalibrationSettings = Field(default_factory=CalibrationSettings)
    experiment: ExperimentSettings = Field(default_factory=ExperimentSettings)
    charts: ChartSettings = Field(default_factory=ChartSettings)
    replay: ReplaySettings = Field(default_factory=ReplaySettings)

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"log_level must be one of {', '.join(LOG_LEVELS)}")
        return level

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        sources: list[PydanticBaseSettingsSource] = [init_settings, env_settings]
        toml_file = _toml_file.get()
        if toml_file is not None:
            sources.append(TomlConfigSettingsSource(settings_cls, toml_file=toml_file))
        return tuple(sources)

    def dataset_spec(self, seed: Optional[int] = None) -> DatasetSpec:
        """DatasetSpec for this configuration (optionally for another seed)."""
        return DatasetSpec(
            per_class_counts=self.synth.per_class,
            severity_grid=list(self.synth.severity_grid),
            seed=self.seed if seed is None else seed,
            split_ratio=self.synth.split_ratio,
            shaft_freq_range=self.synth.shaft_freq_range,
            sample_rate=self.synth.sample_rate,
            duration=self.synth.duration,
            noise_std=self.synth.noise_std,
            base_amplitude=self.synth.base_amplitude,
        )

    def for_seed(self, seed: int, out_dir: Optional[Path] = None) -> "RunConfig":
        """Copy of this configuration with another seed (and output root)."""
        update: dict[str, Any] = {"seed": seed}
        if out_dir is not None:
            update["out_dir"] = out_dir
        return self.model_copy(update=update)


class LlmCredentials(BaseSettings):
    """Secrets for the LLM backend, read from the environment only."""

    model_config = SettingsConfigDict(
        env_prefix=ENV_PREFIX,
        case_sensitive=False,
        extra="ignore",
    )

    api_key: Optional[SecretStr] = Field(None, description="Bearer token for the endpoint")

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings, env_settings)


def load_run_config(
    config_path: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None
) -> RunConfig:
    """
    Build a RunConfig from overrides, environment and an optional TOML file.

    Args:
        config_path: TOML file to read; must exist when given
        overrides: Nested mapping of explicit values (e.g. {"arbitration": {"backend": "llm"}})

    Returns:
        Validated RunConfig

    Raises:
        ConfigurationError: If the file is missing, unparseable or any value is invalid
    """
    if config_path is not None:
        config_path = Path(config_path)
        if not config_path.is_file():
            raise create_configuration_missing_error(str(config_path))

    token = _toml_file.set(config_path)
    try:
        return RunConfig(**(overrides or {}))
    except ValidationError as exc:
        raise translate_validation_exception(
            exc, str(config_path) if config_path else None
        ) from exc
    except tomllib.TOMLDecodeError as exc:
        raise translate_validation_exception(exc, str(config_path)) from exc
    finally:
        _toml_file.reset(token)


def load_llm_credentials() -> LlmCredentials:
    """Read the endpoint API key from FAULT_ARBITER_API_KEY."""
    return LlmCredentials()


# Global configuration instance - Singleton
_config: Optional[RunConfig] = None


@lru_cache(maxsize=1)
def get_run_config() -> RunConfig:
    """
    Get the cached run configuration.

    Returns:
        RunConfig instance initialized at CLI start

    Raises:
        RuntimeError: If called before configuration is initialized
    """
    global _config

    if _config is None:
        raise RuntimeError(
            "Configuration not initialized. Call initialize_run_config() first."
        )

    return _config


def initialize_run_config(
    config_path: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None
) -> RunConfig:
    """
    Load, validate and cache the run configuration.

    Called once by the CLI before dispatching to a subcommand.

    Returns:
        Initialized RunConfig

    Raises:
        ConfigurationError: If configuration is invalid
    """
    global _config

    logger.info("Initializing run configuration...")

    config = load_run_config(config_path, overrides)
    _config = config
    get_run_config.cache_clear()

    logger.info(
        f"Run configuration initialized: seed={config.seed} out_dir={config.out_dir} "
        f"backend={config.arbitration.backend.value} per_class={config.synth.per_class}",
        extra={"config_path": str(config_path) if config_path else None},
    )

    return config


def reset_run_config() -> None:
    """
    Reset the cached configuration.

    For testing purposes, allowing tests to reset
    configuration state between test runs.
    """
    global _config
    _config = None
    get_run_config.cache_clear()
    logger.debug("run configuration cache cleared")
