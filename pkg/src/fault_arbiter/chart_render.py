"""
Four-chart diagnostic panel (waveform, FFT, order and envelope spectra).

Rendering goes through matplotlib's object API with the Agg canvas, never
pyplot, so no global figure state or GUI backend is involved. PNG output is
byte-identical for identical input: the Software metadata chunk is dropped
and the SVG variant uses a fixed hash salt with no date.
"""

import io
import logging
import threading
from collections.abc import Mapping, Sequence
from typing import Any

import matplotlib
import numpy as np
from matplotlib.axes import Axes
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from pydantic import BaseModel, ConfigDict, Field, field_validator

from fault_arbiter.exceptions import RenderError
from fault_arbiter.schemas.enums import SpectrumKind
from fault_arbiter.schemas.feature_schema import FeatureVector, Spectrum
from fault_arbiter.schemas.report_schema import ReliabilityBin
from fault_arbiter.schemas.settings_schema import ChartSettings
from fault_arbiter.schemas.signal_schema import Signal


logger = logging.getLogger(__name__)


DPI = 100
SERIES_COLOR = "#1f4e9c"
GUIDE_COLOR = "#bbbbbb"
MARKER_COLOR = "#666666"
SVG_HASH_SALT = "fault-arbiter"

# Figure-fraction rectangles [left, bottom, width, height]
PANEL_AXES: dict[str, tuple[float, float, float, float]] = {
    "waveform": (0.07, 0.57, 0.40, 0.36),
    "fft": (0.57, 0.57, 0.40, 0.36),
    "order": (0.07, 0.08, 0.40, 0.36),
    "envelope": (0.57, 0.08, 0.40, 0.36),
}

# matplotlib's text and font caches are shared process-wide
_RENDER_LOCK = threading.Lock()


class ChartPanel(BaseModel):
    """Inputs of one diagnostic panel."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    time: np.ndarray = Field(..., description="Excerpt time axis, s")
    samples: np.ndarray = Field(..., description="Excerpt samples, signal units")
    fft: Spectrum
    order: Spectrum
    envelope: Spectrum
    shaft_freq: float = Field(..., gt=0)
    title: str = ""
    annotations: dict[str, str] = Field(default_factory=dict, description="Extra caption lines")

    @field_validator("time", "samples", mode="before")
    @classmethod
    def to_readonly_array(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=np.float64)
        arr.setflags(write=False)
        return arr


class RasterImage(BaseModel):
    """Encoded PNG bytes with their pixel size."""

    model_config = ConfigDict(frozen=True)

    data: bytes
    width: int
    height: int


# === Panel Assembly ===


def build_panel(
    signal: Signal,
    spectra: Mapping[SpectrumKind, Spectrum],
    features: FeatureVector | None = None,
    settings: ChartSettings | None = None,
) -> ChartPanel:
    """
    Assemble a ChartPanel from a signal and its extracted spectra.

    Args:
        signal: Source signal; the first settings.waveform_seconds are shown
        spectra: FFT, order and envelope spectra from extract_all
        features: Optional features summarized in the caption
        settings: Axis ranges and excerpt length

    Raises:
        RenderError: If a spectrum kind is missing
    """
    settings = settings or ChartSettings()
    missing = [k.value for k in SpectrumKind if k not in spectra]
    if missing:
        raise RenderError(f"Missing spectra: {', '.join(missing)}", panel=signal.id)

    n = max(2, min(signal.samples.size, int(round(settings.waveform_seconds * signal.sample_rate))))
    annotations = {}
    if features is not None:
        annotations = {
            "1X / 2X": f"{features.a1x:.3f} / {features.a2x:.3f}",
            "kurtosis": f"{features.kurtosis:.2f}",
            "env peak": f"{features.env_peak_freq:.1f} Hz",
        }
    return ChartPanel(
        time=np.arange(n) / signal.sample_rate,
        samples=signal.samples[:n],
        fft=spectra[SpectrumKind.FFT],
        order=spectra[SpectrumKind.ORDER],
        envelope=spectra[SpectrumKind.ENVELOPE],
        shaft_freq=signal.shaft_freq,
        title=f"{signal.id} (f_s = {signal.shaft_freq:.2f} Hz)",
        annotations=annotations,
    )


# === Rendering ===


def _new_figure(width: int, height: int) -> Figure:
    # Nudge so that figsize * dpi never truncates below the requested pixel count
    fig = Figure(
        figsize=((width + 1e-6) / DPI, (height + 1e-6) / DPI), dpi=DPI, facecolor="white"
    )
    FigureCanvasAgg(fig)
    return fig


def _check_spectrum(spectrum: Spectrum, name: str) -> None:
    if spectrum.magnitudes.size == 0:
        raise RenderError(f"{name} spectrum is empty", panel=name)
    if not np.any(spectrum.magnitudes > 0):
        raise RenderError(f"{name} spectrum has zero magnitude everywhere", panel=name)


def _plot_spectrum(
    ax: Axes,
    spectrum: Spectrum,
    x_max: float,
    guides: Sequence[float],
    title: str,
    xlabel: str,
) -> None:
    visible = spectrum.freqs <= x_max
    freqs = spectrum.freqs[visible]
    mags = spectrum.magnitudes[visible]
    top = float(mags.max()) if mags.size else 0.0
    if top <= 0:
        top = float(spectrum.magnitudes.max())

    for k, position in enumerate(guides, start=1):
        ax.axvline(position, color=GUIDE_COLOR, linestyle="--", linewidth=0.8, zorder=1)
        if k <= 2:
            ax.text(position, 1.04 * top, f"{k}X", color=MARKER_COLOR, fontsize=8, ha="center")

    ax.plot(freqs, mags, color=SERIES_COLOR, linewidth=1.0, zorder=2)
    ax.set_xlim(0, x_max)
    ax.set_ylim(0, 1.1 * top)
    ax.set_title(title, fontsize=10)
    ax.set_xlabel(xlabel, fontsize=9)
    ax.set_ylabel("Amplitude", fontsize=9)
    ax.tick_params(labelsize=8)


def _draw_panel(fig: Figure, panel: ChartPanel, settings: ChartSettings) -> None:
    if panel.samples.size == 0:
        raise RenderError("Waveform excerpt is empty", panel="waveform")
    _check_spectrum(panel.fft, "fft")
    _check_spectrum(panel.order, "order")
    _check_spectrum(panel.envelope, "envelope")

    ax = fig.add_axes(PANEL_AXES["waveform"])
    ax.plot(panel.time, panel.samples, color=SERIES_COLOR, linewidth=0.8)
    ax.set_xlim(float(panel.time[0]), float(panel.time[-1]))
    ax.set_title("Time waveform", fontsize=10)
    ax.set_xlabel("Time (s)", fontsize=9)
    ax.set_ylabel("Amplitude", fontsize=9)
    ax.tick_params(labelsize=8)

    fft_guides = [
        k * panel.shaft_freq
        for k in range(1, settings.guide_harmonics + 1)
        if k * panel.shaft_freq <= settings.fft_max_hz
    ]
    order_guides = [float(k) for k in range(1, settings.guide_harmonics + 1) if k <= settings.order_max]

    _plot_spectrum(
        fig.add_axes(PANEL_AXES["fft"]),
        panel.fft,
        settings.fft_max_hz,
        fft_guides,
        "FFT spectrum",
        "Frequency (Hz)",
    )
    _plot_spectrum(
        fig.add_axes(PANEL_AXES["order"]),
        panel.order,
        settings.order_max,
        order_guides,
        "Order spectrum",
        "Order (multiples of f_s)",
    )
    _plot_spectrum(
        fig.add_axes(PANEL_AXES["envelope"]),
        panel.envelope,
        settings.envelope_max_hz,
        [],
        "Envelope spectrum",
        "Frequency (Hz)",
    )

    if panel.title:
        fig.text(0.5, 0.975, panel.title, ha="center", va="top", fontsize=11)
    if panel.annotations:
        caption = "   ".join(f"{key}: {value}" for key, value in panel.annotations.items())
        fig.text(0.5, 0.005, caption, ha="center", va="bottom", fontsize=8, color=MARKER_COLOR)


def render_panel(
    panel: ChartPanel,
    size: tuple[int, int] = (1200, 900),
    settings: ChartSettings | None = None,
) -> RasterImage:
    """
    Render the 2x2 panel to PNG.

    Args:
        panel: Waveform excerpt and spectra
        size: (width, height) in pixels
        settings: Axis ranges and guide-line count

    Returns:
        RasterImage of exactly the requested size

    Raises:
        RenderError: On empty or all-zero data
    """
    settings = settings or ChartSettings()
    width, height = size
    with _RENDER_LOCK:
        fig = _new_figure(width, height)
        _draw_panel(fig, panel, settings)
        buf = io.BytesIO()
        fig.savefig(buf, format="png", dpi=DPI, metadata={"Software": None})
    return RasterImage(data=buf.getvalue(), width=width, height=height)


def _to_svg(fig: Figure) -> str:
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def render_panel_svg(
    panel: ChartPanel,
    size: tuple[int, int] = (1200, 900),
    settings: ChartSettings | None = None,
) -> str:
    """Render the panel as deterministic SVG text for human-readable reports."""
    settings = settings or ChartSettings()
    with _RENDER_LOCK:
        fig = _new_figure(*size)
        _draw_panel(fig, panel, settings)
        return _to_svg(fig)


# === Report Plots ===


def render_reliability_svg(
    systems: Mapping[str, Sequence[ReliabilityBin]], size: tuple[int, int] = (800, 600)
) -> str:
    """Reliability diagram: per-bin accuracy against mean confidence, one line per system."""
    if not systems:
        raise RenderError("No systems to plot", panel="reliability")
    with _RENDER_LOCK:
        fig = _new_figure(*size)
        ax = fig.add_axes((0.1, 0.1, 0.85, 0.8))
        ax.plot([0, 1], [0, 1], color=GUIDE_COLOR, linestyle="--", linewidth=1.0, label="ideal")
        for name, bins in systems.items():
            filled = [b for b in bins if b.count > 0]
            ax.plot(
                [b.mean_confidence for b in filled],
                [b.accuracy for b in filled],
                marker="o",
                linewidth=1.2,
                label=name,
            )
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_xlabel("Mean confidence")
        ax.set_ylabel("Accuracy")
        ax.set_title("Reliability diagram")
        ax.legend(loc="upper left", fontsize=8)
        return _to_svg(fig)


def render_risk_coverage_svg(
    curves: Mapping[str, Sequence[tuple[float, float]]], size: tuple[int, int] = (800, 600)
) -> str:
    """Risk-coverage curves, one line per system."""
    if not curves:
        raise RenderError("No systems to plot", panel="risk_coverage")
    with _RENDER_LOCK:
        fig = _new_figure(*size)
        ax = fig.add_axes((0.1, 0.1, 0.85, 0.8))
        for name, curve in curves.items():
            coverage = [c for c, _ in curve]
            risk = [r for _, r in curve]
            ax.plot(coverage, risk, linewidth=1.2, label=name)
        ax.set_xlim(0, 1)
        ax.set_ylim(bottom=0)
        ax.set_xlabel("Coverage")
        ax.set_ylabel("Risk (error rate)")
        ax.set_title("Risk-coverage")
        ax.legend(loc="upper left", fontsize=8)
        return _to_svg(fig)
