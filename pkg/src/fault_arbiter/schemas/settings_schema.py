from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from fault_arbiter.schemas.enums import BackendKind, FaultClass
from fault_arbiter.schemas.feature_schema import FEATURE_NAMES


# Highest synthesized component: gear upper sideband at 24 x f_s, cavitation band edge at 4 kHz
GEAR_SIDEBAND_ORDER = 24
CAVITATION_BAND_HZ = (1000.0, 4000.0)

# The rule engine's knowledge base: time-domain statistics and spectral summaries.
# Order and envelope evidence is left to the arbiter, which reads it off the charts.
RULE_ENGINE_FEATURES: tuple[str, ...] = (
    "rms",
    "crest_factor",
    "kurtosis",
    "impulse_factor",
    "clearance_factor",
    "dominant_freq",
    "spectral_centroid",
)


class SettingsSection(BaseModel):
    """Base for configuration sections: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)


# === Synthesis ===


class SynthSettings(SettingsSection):
    """Dataset generation settings."""

    sample_rate: float = Field(10000.0, gt=0, description="Sample rate in Hz")
    duration: float = Field(2.0, gt=0, description="Signal duration in seconds")
    shaft_freq_range: tuple[float, float] = Field(
        (45.0, 75.0),
        description="Operating speed range in Hz; each recording draws its own shaft frequency",
    )
    noise_std: float = Field(0.1, ge=0, description="Gaussian noise std in signal units")
    base_amplitude: float = Field(1.0, gt=0, description="1X amplitude A of a healthy machine")
    per_class: int = Field(300, ge=1, description="Recordings per machine state")
    severity_grid: list[float] = Field(
        default_factory=lambda: [0.3, 0.5, 0.7, 0.9, 1.0],
        description="Severities cycled through per class",
    )
    split_ratio: tuple[int, int, int] = Field(
        (7, 2, 1), description="train:val:test ratio applied per class"
    )

    @field_validator("severity_grid")
    @classmethod
    def validate_severity_grid(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("severity_grid must not be empty")
        if any(s < 0.0 or s > 1.0 for s in v):
            raise ValueError("severities must lie in [0, 1]")
        return v

    @field_validator("split_ratio")
    @classmethod
    def validate_split_ratio(cls, v: tuple[int, int, int]) -> tuple[int, int, int]:
        if any(part < 0 for part in v) or sum(v) == 0:
            raise ValueError("split_ratio parts must be >= 0 with a positive sum")
        return v

    @model_validator(mode="after")
    def validate_sampling(self) -> "SynthSettings":
        """Nyquist and minimum-length invariants over the whole speed range."""
        low, high = self.shaft_freq_range
        if low <= 0 or high < low:
            raise ValueError("shaft_freq_range must satisfy 0 < low <= high")
        highest = max(GEAR_SIDEBAND_ORDER * high, CAVITATION_BAND_HZ[1])
        if self.sample_rate <= 2 * highest:
            raise ValueError(
                f"sample_rate must exceed {2 * highest:g} Hz for shaft speeds up to {high:g} Hz"
            )
        if self.duration * self.sample_rate < 8192:
            raise ValueError("duration x sample_rate must give at least 8192 samples")
        return self


# === Features ===


class FeatureConfig(SettingsSection):
    """Feature extraction settings."""

    tau: float = Field(0.1, gt=0, le=1, description="Harmonic threshold as a fraction of A_1X")
    max_harmonics: int = Field(10, ge=1, le=50, description="Highest order counted in N_h")
    envelope_band: tuple[float, float] = Field(
        (1500.0, 4000.0), description="Envelope band-pass edges in Hz"
    )
    fft_size: int = Field(4096, ge=256, description="FFT frame length (Hann window)")
    samples_per_rev: int = Field(256, ge=32, description="Order-tracking resampling density")
    speed_segments: int = Field(16, ge=5, description="Segments in the shaft-speed track")
    median_kernel: int = Field(5, ge=1, description="Anti-jitter median filter length")
    speed_search_width: float = Field(
        0.2, gt=0, lt=0.5, description="1X search window around nominal f_s (fraction)"
    )
    speed_fallback_tolerance: float = Field(
        0.1, gt=0, lt=0.5, description="Segment estimates further than this from nominal are replaced"
    )

    @field_validator("envelope_band")
    @classmethod
    def validate_band(cls, v: tuple[float, float]) -> tuple[float, float]:
        if not 0 < v[0] < v[1]:
            raise ValueError("envelope_band must satisfy 0 < low < high")
        return v

    @field_validator("median_kernel")
    @classmethod
    def validate_kernel(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError("median_kernel must be odd")
        return v


# === Naive Bayes ===


class BayesSettings(SettingsSection):
    """Naive Bayes fitting settings."""

    features: list[str] = Field(
        default_factory=lambda: list(RULE_ENGINE_FEATURES), description="Features the rule engine diagnoses from"
    )
    alpha: float = Field(1.0, ge=0, description="Laplace smoothing for discretized features")
    discretize: list[str] = Field(
        default_factory=lambda: list(RULE_ENGINE_FEATURES),
        description="Features modelled with binned tables instead of Gaussians",
    )
    bins: int = Field(4, ge=2, description="Equal-width bins per discretized feature")
    variance_floor_scale: float = Field(1e-6, gt=0, description="Floor as a fraction of global variance")
    variance_floor_min: float = Field(1e-12, gt=0, description="Absolute variance floor")
    prior_override: Optional[dict[FaultClass, float]] = Field(
        None, description="Class weights replacing empirical priors (normalized on use)"
    )

    @field_validator("features", "discretize")
    @classmethod
    def validate_feature_names(cls, v: list[str]) -> list[str]:
        unknown = sorted(set(v) - set(FEATURE_NAMES))
        if unknown:
            raise ValueError(f"unknown features: {', '.join(unknown)}")
        if len(set(v)) != len(v):
            raise ValueError("feature names must be unique")
        return v

    @field_validator("features")
    @classmethod
    def validate_not_empty(cls, v: list[str]) -> list[str]:
        if not v:
            raise ValueError("the rule engine needs at least one feature")
        return v

    @field_validator("prior_override")
    @classmethod
    def validate_priors(
        cls, v: Optional[dict[FaultClass, float]]
    ) -> Optional[dict[FaultClass, float]]:
        if v is not None:
            if any(weight < 0 for weight in v.values()) or sum(v.values()) <= 0:
                raise ValueError("prior weights must be >= 0 with a positive sum")
        return v


# === Arbitration ===


class LlmEndpointSettings(SettingsSection):
    """OpenAI-compatible chat-completions endpoint. The API key is never read from here."""

    base_url: str = Field("http://127.0.0.1:8765/v1", description="Endpoint base URL")
    model: str = Field("vision-arbiter", description="Model name sent with each request")
    request_timeout: float = Field(60.0, gt=0, description="Per-request timeout in seconds")
    max_retries: int = Field(3, ge=0, description="Retries after the first attempt")
    backoff_base: float = Field(0.5, ge=0, description="First retry delay in seconds, doubled per retry")
    temperature: float = Field(0.7, ge=0, le=2, description="Sampling temperature")
    max_tokens: int = Field(1024, ge=16, description="Completion token limit")
    max_concurrency: int = Field(4, ge=1, description="Maximum in-flight requests")
    audit_log: Optional[Path] = Field(
        None, description="JSONL file receiving every request/response (relative to --out)"
    )


class ArbitrationConfig(SettingsSection):
    """Arbitration policy and backend settings."""

    theta: float = Field(0.5, ge=0, le=1, description="Abstention threshold")
    delta: float = Field(0.15, ge=0, le=1, description="Conflict confidence boundary")
    k_samples: int = Field(5, ge=1, description="Self-consistency samples per case")
    backend: BackendKind = Field(BackendKind.ORACLE, description="Verdict source")
    render_all_panels: bool = Field(
        False, description="Oracle backend: render evidence for every case, not only abstentions"
    )
    llm: LlmEndpointSettings = Field(default_factory=LlmEndpointSettings)


# === Calibration ===


class CalibrationSettings(SettingsSection):
    """Calibration and metric settings."""

    n_bins: int = Field(15, ge=1, description="Bins for ECE, adaptive ECE and reliability diagrams")
    temperature_bounds: tuple[float, float] = Field(
        (0.05, 20.0), description="Temperature search interval"
    )
    grid_points: int = Field(60, ge=3, description="Log-spaced coarse grid size")
    tolerance: float = Field(1e-4, gt=0, description="Refinement tolerance on T")
    min_bin_count: int = Field(20, ge=1, description="Bins below this count are ignored by the max-gap check")

    @field_validator("temperature_bounds")
    @classmethod
    def validate_bounds(cls, v: tuple[float, float]) -> tuple[float, float]:
        if not 0 < v[0] < 1.0 < v[1]:
            raise ValueError("temperature_bounds must satisfy 0 < low < 1 < high")
        return v


# === Experiment ===


class ExperimentSettings(SettingsSection):
    """Repeated-run experiment and sweep settings."""

    repeats: int = Field(10, ge=1, description="Seeds per experiment; seed, seed+1, ...")
    min_coverage: float = Field(0.9, ge=0, le=1, description="Sweep coverage constraint on val")
    theta_grid: list[float] = Field(
        default_factory=lambda: [0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
        description="Sweep abstention thresholds",
    )
    delta_grid: list[float] = Field(
        default_factory=lambda: [0.0, 0.05, 0.1, 0.15, 0.2, 0.3],
        description="Sweep conflict boundaries",
    )
    keep_artifacts: bool = Field(
        False, description="Write per-seed datasets and tables under <out>/experiment"
    )

    @field_validator("theta_grid", "delta_grid")
    @classmethod
    def validate_grid(cls, v: list[float]) -> list[float]:
        if not v or any(x < 0 or x > 1 for x in v):
            raise ValueError("grid values must lie in [0, 1]")
        return sorted(set(v))


# === Charts ===


class ChartSettings(SettingsSection):
    """Diagnostic panel layout."""

    width: int = Field(1200, ge=200, description="Panel width in pixels")
    height: int = Field(900, ge=150, description="Panel height in pixels")
    fft_max_hz: float = Field(5000.0, gt=0)
    order_max: float = Field(12.0, gt=0)
    envelope_max_hz: float = Field(1000.0, gt=0)
    waveform_seconds: float = Field(0.1, gt=0)
    guide_harmonics: int = Field(10, ge=1, description="k x f_s guide lines drawn per chart")


# === Replay endpoint ===


class ReplaySettings(SettingsSection):
    """Recorded-response endpoint served by 'fault-arbiter serve-replay'."""

    host: str = "127.0.0.1"
    port: int = Field(8765, ge=1, le=65535)
    recordings: Optional[Path] = Field(None, description="JSONL file of recorded responses")
