"""Synthetic ECG generation.

One cardiac cycle is a sum of five Gaussian bumps (P, Q, R, S, T) placed on a
phase axis that sweeps -pi -> pi over each beat. Beat-to-beat variability
comes from an RR-interval series, and the generator returns ground-truth
R-peak sample indices alongside the waveform.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import RejectedInput
from .timeseries import TimeSeries

RR_MIN_S = 0.2
RR_MAX_S = 2.0

HR_MIN_BPM = 60.0
HR_MAX_BPM = 240.0

#: Fetal peak amplitude never exceeds this (microvolts).
FETAL_PEAK_CAP_UV = 20.0

#: Default gestational band the fetal peak amplitude is drawn from (microvolts).
FETAL_BAND_UV = (5.0, 20.0)


@dataclass(frozen=True)
class GaussianWave:
    label: str
    theta: float  # angular position, radians in (-pi, pi]
    amplitude: float  # mV before any external scaling
    width: float  # radians, > 0


@dataclass(frozen=True)
class ECGModelParams:
    """Five-wave Gaussian description of one cardiac cycle."""

    waves: tuple
    base_amplitude_scale: float = 1.0

    def __post_init__(self):
        waves = tuple(self.waves)
        object.__setattr__(self, "waves", waves)
        if len(waves) != 5:
            raise RejectedInput(f"exactly 5 waves required, got {len(waves)}")
        thetas = [w.theta for w in waves]
        if any(t <= -np.pi or t > np.pi for t in thetas):
            raise RejectedInput("wave positions must lie in (-pi, pi]")
        if any(t2 <= t1 for t1, t2 in zip(thetas, thetas[1:])):
            raise RejectedInput("wave positions must be strictly increasing")
        if any(w.width <= 0 for w in waves):
            raise RejectedInput("wave widths must be positive")

    def scaled(self, factor: float) -> "ECGModelParams":
        return replace(self, base_amplitude_scale=self.base_amplitude_scale * factor)


def default_model() -> ECGModelParams:
    """PQRST parameter set with a dominant positive R wave."""
    return ECGModelParams(
        waves=(
            GaussianWave("P", -np.pi / 3, 0.10, 0.22),
            GaussianWave("Q", -np.pi / 12, -0.12, 0.07),
            GaussianWave("R", 0.0, 1.00, 0.09),
            GaussianWave("S", np.pi / 12, -0.25, 0.08),
            GaussianWave("T", np.pi / 2, 0.28, 0.35),
        )
    )


@dataclass(frozen=True)
class RRSeries:
    """Beat-to-beat intervals in seconds."""

    intervals: np.ndarray

    def __post_init__(self):
        intervals = np.asarray(self.intervals, dtype=np.float64)
        object.__setattr__(self, "intervals", intervals)
        if intervals.size == 0:
            raise RejectedInput("RR series must be non-empty")
        if np.any(intervals < RR_MIN_S) or np.any(intervals > RR_MAX_S):
            raise RejectedInput(
                f"RR intervals must lie in [{RR_MIN_S}, {RR_MAX_S}] s"
            )

    def __len__(self) -> int:
        return int(self.intervals.size)


def make_rr(mean_hr: float, hrv_std: float, n_beats: int, rng: np.random.Generator) -> RRSeries:
    """Draw RR intervals so the instantaneous HR is ~Normal(mean_hr, hrv_std)."""
    if not (HR_MIN_BPM <= mean_hr <= HR_MAX_BPM):
        raise RejectedInput(
            f"mean_hr must lie in [{HR_MIN_BPM}, {HR_MAX_BPM}] bpm, got {mean_hr}"
        )
    if n_beats < 1:
        raise RejectedInput("n_beats must be >= 1")
    hr = mean_hr + hrv_std * rng.standard_normal(n_beats)
    # Guard against nonphysical draws before converting to intervals.
    hr = np.clip(hr, 60.0 / RR_MAX_S, 60.0 / RR_MIN_S)
    intervals = np.clip(60.0 / hr, RR_MIN_S, RR_MAX_S)
    return RRSeries(intervals=intervals)


def wave_sum(params: ECGModelParams, theta: np.ndarray) -> np.ndarray:
    """Evaluate the Gaussian-sum cycle model at the given phases."""
    theta = np.asarray(theta, dtype=np.float64)
    out = np.zeros_like(theta)
    for w in params.waves:
        d = theta - w.theta
        out += w.amplitude * np.exp(-0.5 * (d / w.width) ** 2)
    return out * params.base_amplitude_scale


def synth_ecg(params: ECGModelParams, rr: RRSeries, fs: float):
    """Generate an ECG trace, one cycle per RR interval.

    Returns (TimeSeries, rpeak_indices). The phase ramps -pi -> pi over each
    beat, so the R wave (theta = 0) sits at the midpoint of the cycle; each
    cycle is made zero-mean independently.
    """
    cycles = []
    rpeaks = []
    offset = 0
    for interval in rr.intervals:
        n = int(round(interval * fs))
        # Phase endpoint excluded so consecutive beats do not duplicate -pi.
        theta = -np.pi + 2 * np.pi * np.arange(n) / n
        cycle = wave_sum(params, theta)
        cycle = cycle - cycle.mean()
        cycles.append(cycle)
        rpeaks.append(offset + int(np.argmin(np.abs(theta))))
        offset += n
    samples = np.concatenate(cycles)
    return TimeSeries(samples=samples, fs=fs), np.asarray(rpeaks, dtype=np.int64)


def scale_fetal(
    fecg: TimeSeries,
    rng: np.random.Generator,
    band_uv: tuple = FETAL_BAND_UV,
):
    """Rescale a fetal trace so its peak hits a random gestational amplitude.

    Returns (scaled TimeSeries, drawn peak amplitude in microvolts).
    """
    lo, hi = band_uv
    if not (0 < lo <= hi <= FETAL_PEAK_CAP_UV):
        raise RejectedInput(
            f"band must satisfy 0 < lo <= hi <= {FETAL_PEAK_CAP_UV}, got {band_uv}"
        )
    peak = float(np.max(np.abs(fecg.samples)))
    if peak == 0.0:
        raise RejectedInput("cannot rescale an all-zero fetal trace")
    target = float(rng.uniform(lo, hi))
    return fecg.with_samples(fecg.samples * (target / peak)), target
