"""Filtering front end: 50 Hz notch and 1-100 Hz bandpass, both 10th-order IIR.

Filters are designed as cascaded second-order sections and applied
forward-backward (zero phase), which doubles the effective order but keeps
waveform morphology intact for the offline pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import NumericalError, RejectedInput
from .timeseries import TimeSeries


@dataclass(frozen=True)
class FilterSpec:
    kind: str  # "notch" | "bandpass"
    order: int = 10
    notch_center: float = 50.0
    notch_bw: float = 1.0
    band: tuple = (1.0, 100.0)

    def __post_init__(self):
        if self.kind not in ("notch", "bandpass"):
            raise RejectedInput(f"unknown filter kind {self.kind!r}")
        if self.order < 2 or self.order % 2 != 0:
            raise RejectedInput("order must be even and >= 2")
        lo, hi = self.band
        if not (0 < lo < hi):
            raise RejectedInput(f"invalid band {self.band}")


def design_sos(spec: FilterSpec, fs: float) -> np.ndarray:
    """Design the second-order-section cascade for a sampling rate."""
    if spec.kind == "notch":
        lo = spec.notch_center - spec.notch_bw / 2.0
        hi = spec.notch_center + spec.notch_bw / 2.0
        sos = signal.butter(spec.order // 2, [lo, hi], btype="bandstop", fs=fs, output="sos")
    else:
        lo, hi = spec.band
        if hi >= fs / 2:
            raise RejectedInput(f"band edge {hi} Hz exceeds Nyquist for fs={fs}")
        sos = signal.butter(spec.order // 2, [lo, hi], btype="bandpass", fs=fs, output="sos")
    if not np.all(np.isfinite(sos)):
        raise NumericalError(f"filter design produced non-finite coefficients for fs={fs}")
    # Each SOS must have poles inside the unit circle.
    z, p, _ = signal.sos2zpk(sos)
    if np.any(np.abs(p) >= 1.0):
        raise NumericalError(f"unstable {spec.kind} design at fs={fs}")
    return sos


def apply_filter(x: TimeSeries, spec: FilterSpec) -> TimeSeries:
    """Zero-phase application of the designed IIR; same length and fs out."""
    if spec.kind == "bandpass" and x.fs <= 2 * max(spec.band):
        raise RejectedInput(f"fs={x.fs} too low for band {spec.band}")
    sos = design_sos(spec, x.fs)
    return x.with_samples(signal.sosfiltfilt(sos, x.samples))


def preprocess(x: TimeSeries) -> TimeSeries:
    """Standard front end: 50 Hz notch followed by the 1-100 Hz bandpass."""
    notched = apply_filter(x, FilterSpec(kind="notch"))
    return apply_filter(notched, FilterSpec(kind="bandpass"))
