"""Uniformly sampled 1-D signals, the common currency between modules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInput

#: Upper edge of the physiological band everything in this project cares about.
BAND_OF_INTEREST_HZ = 100.0

#: Project-wide default sampling rate (satisfies Nyquist for 1-100 Hz).
DEFAULT_FS = 250.0


@dataclass(frozen=True)
class TimeSeries:
    """Real-valued signal with its sampling rate.

    Samples are in microvolts unless a caller documents otherwise.
    """

    samples: np.ndarray
    fs: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise RejectedInput(f"samples must be 1-D, got shape {samples.shape}")
        if not self.fs > 2 * BAND_OF_INTEREST_HZ:
            raise RejectedInput(
                f"fs must exceed {2 * BAND_OF_INTEREST_HZ} Hz, got {self.fs}"
            )

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    def with_samples(self, samples: np.ndarray) -> "TimeSeries":
        return TimeSeries(samples=np.asarray(samples, dtype=np.float64), fs=self.fs)


def power(x: np.ndarray) -> float:
    """Mean-square power of a sample vector."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.mean(x * x))
