import math
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from fault_arbiter.exceptions import InputValidationError
from fault_arbiter.schemas.enums import SpectrumKind


# Fixed feature order used by the Bayes engine, tables and prompts
FEATURE_NAMES: tuple[str, ...] = (
    "rms",
    "crest_factor",
    "kurtosis",
    "impulse_factor",
    "clearance_factor",
    "dominant_freq",
    "spectral_centroid",
    "a1x",
    "a2x",
    "ratio_2x_1x",
    "harmonic_count",
    "env_kurtosis",
    "env_peak_freq",
)

FEATURE_UNITS: dict[str, str] = {
    "rms": "",
    "crest_factor": "",
    "kurtosis": "",
    "impulse_factor": "",
    "clearance_factor": "",
    "dominant_freq": " Hz",
    "spectral_centroid": " Hz",
    "a1x": "",
    "a2x": "",
    "ratio_2x_1x": "",
    "harmonic_count": "",
    "env_kurtosis": "",
    "env_peak_freq": " Hz",
}


class FeatureVector(BaseModel):
    """
    The combined feature vector f = [f_time, f_freq, f_order, f_env].

    shaft_freq is carried as metadata so speed-relative checks (1X, defect
    and mesh frequencies) can be evaluated from the vector alone; it is not
    one of the thirteen model features.
    """

    model_config = ConfigDict(frozen=True)

    rms: float = Field(..., ge=0, description="Root mean square, signal units")
    crest_factor: float = Field(..., ge=1, description="max|x| / rms")
    kurtosis: float = Field(..., description="Non-excess kurtosis E[(x-mu)^4]/sigma^4")
    impulse_factor: float = Field(..., description="max|x| / mean|x|")
    clearance_factor: float = Field(..., description="max|x| / mean(sqrt|x|)^2")
    dominant_freq: float = Field(..., description="Largest FFT bin, Hz")
    spectral_centroid: float = Field(..., description="Magnitude-weighted mean frequency, Hz")
    a1x: float = Field(..., ge=0, description="Order-spectrum amplitude at 1X")
    a2x: float = Field(..., ge=0, description="Order-spectrum amplitude at 2X")
    ratio_2x_1x: float = Field(..., ge=0, description="a2x / a1x (0 when a1x is 0)")
    harmonic_count: int = Field(..., ge=0, description="Orders 1..max with A_kX > tau * A_1X")
    env_kurtosis: float = Field(..., description="Kurtosis of the band-passed envelope")
    env_peak_freq: float = Field(..., description="Largest envelope-spectrum bin, Hz")
    shaft_freq: float = Field(..., gt=0, description="Nominal shaft frequency f_s, Hz")

    @model_validator(mode="after")
    def validate_finite(self) -> "FeatureVector":
        for name in FEATURE_NAMES:
            if not math.isfinite(getattr(self, name)):
                raise InputValidationError(f"Feature '{name}' is not finite", field=name)
        return self

    def as_array(self) -> np.ndarray:
        """Feature values in FEATURE_NAMES order."""
        return np.array([float(getattr(self, name)) for name in FEATURE_NAMES])

    @classmethod
    def from_mapping(cls, values: dict[str, Any], shaft_freq: float) -> "FeatureVector":
        """Build from a name -> value mapping (e.g. a feature-table row)."""
        payload = {name: values[name] for name in FEATURE_NAMES}
        payload["harmonic_count"] = int(payload["harmonic_count"])
        return cls(**payload, shaft_freq=shaft_freq)


class Spectrum(BaseModel):
    """One-sided amplitude spectrum. For order spectra, freqs are in orders."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    freqs: np.ndarray
    magnitudes: np.ndarray
    kind: SpectrumKind
    resolution: float = Field(..., gt=0, description="Bin spacing (Hz, or orders)")

    @field_validator("freqs", "magnitudes", mode="before")
    @classmethod
    def to_readonly_array(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def validate_axes(self) -> "Spectrum":
        if self.freqs.ndim != 1 or self.freqs.shape != self.magnitudes.shape:
            raise InputValidationError(
                "Spectrum freqs and magnitudes must be 1-D and equally long", field="freqs"
            )
        if self.freqs.size > 1 and not np.all(np.diff(self.freqs) > 0):
            raise InputValidationError("Spectrum freqs must be strictly increasing", field="freqs")
        if not np.all(np.isfinite(self.magnitudes)) or np.any(self.magnitudes < 0):
            raise InputValidationError(
                "Spectrum magnitudes must be finite and nonnegative", field="magnitudes"
            )
        return self
