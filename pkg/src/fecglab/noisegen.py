"""Dry-electrode noise model.

Three components - band-limited pink noise, band-limited white noise, and a
two-Gaussian impulse mixture - are combined in the frequency domain: each
forward transform is normalized to unit peak magnitude, scaled by a fixed
weight, summed, and inverse-transformed back to the time domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RejectedInput
from .timeseries import TimeSeries, power

PINK_HI_RANGE_HZ = (9.0, 12.0)
WHITE_HI_RANGE_HZ = (60.0, 90.0)

#: Components are zeroed below this edge; preprocessing removes it anyway.
LOW_EDGE_HZ = 1.0


@dataclass(frozen=True)
class NoiseBands:
    pink_hi: float
    white_hi: float

    def __post_init__(self):
        if not (PINK_HI_RANGE_HZ[0] <= self.pink_hi <= PINK_HI_RANGE_HZ[1]):
            raise RejectedInput(f"pink_hi out of {PINK_HI_RANGE_HZ}: {self.pink_hi}")
        if not (WHITE_HI_RANGE_HZ[0] <= self.white_hi <= WHITE_HI_RANGE_HZ[1]):
            raise RejectedInput(f"white_hi out of {WHITE_HI_RANGE_HZ}: {self.white_hi}")


@dataclass(frozen=True)
class MixtureParams:
    sigma0: float = 1.0
    sigma1: float = 10.0
    p: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise RejectedInput(f"p must lie in [0, 1], got {self.p}")
        if self.sigma0 <= 0 or self.sigma1 <= 0:
            raise RejectedInput("mixture standard deviations must be positive")


@dataclass(frozen=True)
class NoiseWeights:
    w_pink: float = 2.0
    w_white: float = 0.2
    w_mixture: float = 0.15

    def __post_init__(self):
        if self.w_pink < 0 or self.w_white < 0 or self.w_mixture < 0:
            raise RejectedInput("noise weights must be non-negative")


def sample_bands(rng: np.random.Generator) -> NoiseBands:
    """Draw randomized band edges for one record."""
    return NoiseBands(
        pink_hi=float(rng.uniform(*PINK_HI_RANGE_HZ)),
        white_hi=float(rng.uniform(*WHITE_HI_RANGE_HZ)),
    )


def gaussian_mixture(n: int, params: MixtureParams, rng: np.random.Generator) -> np.ndarray:
    """x_i = (sigma0*(1-u_i) + sigma1*u_i) * z_i with u_i ~ Bernoulli(p)."""
    if n < 1:
        raise RejectedInput("n must be >= 1")
    z = rng.standard_normal(n)
    u = rng.random(n) < params.p
    sigma = np.where(u, params.sigma1, params.sigma0)
    return sigma * z


def _unit_peak(spectrum: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(spectrum))
    if peak == 0.0:
        return spectrum
    return spectrum / peak


def synthesize_noise(
    n_samples: int,
    fs: float,
    bands: NoiseBands,
    weights: NoiseWeights,
    mix: MixtureParams,
    rng: np.random.Generator,
) -> TimeSeries:
    """Generate one noise realization by frequency-domain combination."""
    if n_samples < fs:
        raise RejectedInput(f"need at least 1 s of samples, got {n_samples} at fs={fs}")
    n_samples = int(n_samples)
    freqs = np.fft.rfftfreq(n_samples, d=1.0 / fs)
    in_band = freqs >= LOW_EDGE_HZ

    # Pink: white Gaussian spectrum shaped by 1/sqrt(f) magnitude (1/f power),
    # brick-wall limited to [LOW_EDGE_HZ, pink_hi].
    pink = np.fft.rfft(rng.standard_normal(n_samples)).astype(np.complex128)
    shaping = np.zeros_like(freqs)
    keep = in_band & (freqs <= bands.pink_hi)
    shaping[keep] = 1.0 / np.sqrt(freqs[keep])
    pink *= shaping

    # White: flat spectrum up to white_hi.
    white = np.fft.rfft(rng.standard_normal(n_samples)).astype(np.complex128)
    white[~(in_band & (freqs <= bands.white_hi))] = 0.0

    # Impulse mixture enters via its forward transform like the other two.
    mixture = np.fft.rfft(gaussian_mixture(n_samples, mix, rng)).astype(np.complex128)
    mixture[~in_band] = 0.0

    combined = (
        weights.w_pink * _unit_peak(pink)
        + weights.w_white * _unit_peak(white)
        + weights.w_mixture * _unit_peak(mixture)
    )
    samples = np.fft.irfft(combined, n=n_samples)
    return TimeSeries(samples=samples, fs=fs)


def measure_snr_db(reference: TimeSeries, noise: TimeSeries) -> float:
    """10*log10(P_reference / P_noise)."""
    p_ref = power(reference.samples)
    p_noise = power(noise.samples)
    if p_noise == 0.0:
        raise RejectedInput("noise has zero power")
    return 10.0 * np.log10(p_ref / p_noise)


def scale_to_snr(noise: TimeSeries, reference: TimeSeries, snr_db: float) -> TimeSeries:
    """Scale noise so 10*log10(P_reference / P_noise) equals snr_db exactly."""
    if len(noise) != len(reference) or noise.fs != reference.fs:
        raise RejectedInput("noise and reference must share length and fs")
    p_ref = power(reference.samples)
    if p_ref == 0.0:
        raise RejectedInput("reference has zero power")
    p_noise = power(noise.samples)
    if p_noise == 0.0:
        raise RejectedInput("noise has zero power")
    target_power = p_ref / 10.0 ** (snr_db / 10.0)
    return noise.with_samples(noise.samples * np.sqrt(target_power / p_noise))
