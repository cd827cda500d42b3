"""
Test configuration and fixtures.

Key fixtures:
- reset_config: Automatically clear FAULT_ARBITER_* variables and the cached RunConfig
- make_signal / sine_signal: Synthetic Signal factories
- make_features: FeatureVector factory with healthy defaults
- tiny_config: RunConfig for a small end-to-end run under tmp_path
- replay_client: TestClient over the replay endpoint (an httpx.Client)
"""

import os
from pathlib import Path
from typing import Callable

import numpy as np
import pytest
from fastapi.testclient import TestClient

from fault_arbiter.config import RunConfig, load_run_config, reset_run_config
from fault_arbiter.params import ENV_PREFIX
from fault_arbiter.replay_server import create_replay_app
from fault_arbiter.schemas.enums import FaultClass
from fault_arbiter.schemas.feature_schema import FeatureVector
from fault_arbiter.schemas.signal_schema import Signal


# ============================================================================
# Configuration Reset Fixture
# ============================================================================


@pytest.fixture(autouse=True)
def reset_config(monkeypatch):
    """
    Automatically reset configuration between tests.

    Clears every FAULT_ARBITER_* environment variable so a developer's shell
    cannot leak settings into a test, and resets the cached RunConfig before
    and after each test.
    """
    for name in list(os.environ):
        if name.upper().startswith(ENV_PREFIX):
            monkeypatch.delenv(name, raising=False)

    reset_run_config()
    yield
    reset_run_config()


# ============================================================================
# Signal Fixtures
# ============================================================================


@pytest.fixture
def make_signal() -> Callable[..., Signal]:
    """
    Build a Signal from a sample array.

    Example:
        def test_something(make_signal):
            sig = make_signal(np.ones(8192), sample_rate=8192.0)
    """

    def _make(samples, sample_rate: float = 10000.0, shaft_freq: float = 60.0, id: str = "test") -> Signal:
        return Signal(samples=samples, sample_rate=sample_rate, shaft_freq=shaft_freq, id=id)

    return _make


@pytest.fixture
def sine_signal(make_signal) -> Callable[..., Signal]:
    """
    Pure tone A*sin(2*pi*f*t) over a whole number of periods.

    Defaults give 2 s at 8192 Hz, so a 4096-point frame has 2 Hz bins.
    """

    def _sine(
        freq: float = 64.0,
        amplitude: float = 1.0,
        sample_rate: float = 8192.0,
        duration: float = 2.0,
        shaft_freq: float | None = None,
    ) -> Signal:
        t = np.arange(int(round(duration * sample_rate))) / sample_rate
        return make_signal(
            amplitude * np.sin(2 * np.pi * freq * t),
            sample_rate=sample_rate,
            shaft_freq=shaft_freq or freq,
        )

    return _sine


# ============================================================================
# Feature Fixtures
# ============================================================================


HEALTHY_FEATURES = {
    "rms": 0.714,
    "crest_factor": 1.6,
    "kurtosis": 1.7,
    "impulse_factor": 1.9,
    "clearance_factor": 2.1,
    "dominant_freq": 60.0,
    "spectral_centroid": 1900.0,
    "a1x": 1.0,
    "a2x": 0.01,
    "ratio_2x_1x": 0.01,
    "harmonic_count": 1,
    "env_kurtosis": 3.0,
    "env_peak_freq": 40.0,
    "shaft_freq": 60.0,
}


@pytest.fixture
def make_features() -> Callable[..., FeatureVector]:
    """
    FeatureVector with healthy-machine values, overridable per field.

    Example:
        features = make_features(ratio_2x_1x=1.87, crest_factor=4.2)
    """

    def _make(**overrides) -> FeatureVector:
        return FeatureVector(**{**HEALTHY_FEATURES, **overrides})

    return _make


# ============================================================================
# Run Configuration Fixtures
# ============================================================================


@pytest.fixture
def tiny_config(tmp_path: Path) -> RunConfig:
    """
    Small, fast end-to-end configuration writing under tmp_path/run.

    Ten recordings per class give 7/2/1 train/val/test per class.
    """
    return load_run_config(
        overrides={
            "seed": 11,
            "out_dir": tmp_path / "run",
            "workers": 2,
            "synth": {"per_class": 10, "duration": 1.0, "sample_rate": 10000.0},
            "charts": {"width": 600, "height": 450},
            "experiment": {"repeats": 1},
        }
    )


# ============================================================================
# Replay Endpoint Fixtures
# ============================================================================


BEARING_REPORT = """Step 1: Hypothesis Verification: The rule engine suggests normal.
Step 2: Evidence Synthesis & Cross-Validation: Envelope peak at 3.58 x f_s with kurtosis 10.95.
Step 3: Conflict Arbitration: Conflict detected; impact signature dominates.
Step 4: Final Verdict Formulation:
Final Diagnosis: Bearing Damage
Confidence Level: 90%
Rationale: Periodic impacts at the outer-race defect frequency."""


@pytest.fixture
def bearing_report() -> str:
    """Four-step arbiter report concluding bearing damage at 90%."""
    return BEARING_REPORT


@pytest.fixture
def recordings(bearing_report) -> dict[str, list[str]]:
    return {"bearing_damage_0001": [bearing_report]}


@pytest.fixture
def replay_client(recordings) -> TestClient:
    """
    TestClient over the replay endpoint.

    TestClient is an httpx.Client, so it can be handed to
    ChatCompletionsBackend as its transport with base_url "http://testserver/v1".
    """
    return TestClient(create_replay_app(recordings))
