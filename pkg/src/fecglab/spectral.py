"""STFT/ISTFT between time series and complex spectrograms.

The forward transform is one-sided. With centering enabled the signal is
reflect-padded by half a window on both sides, then zero-padded to a whole
number of hops; the inverse performs windowed overlap-add with the standard
squared-window normalization and trims back to the original length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RejectedInput, StructuralError
from .timeseries import TimeSeries

_WINDOWS = {
    "hann": lambda n: 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n),
    "rectangular": lambda n: np.ones(n),
}


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 256
    hop: int = 64
    window: str = "hann"
    fft_len: int = 256
    center: bool = True

    def __post_init__(self):
        if self.window not in _WINDOWS:
            raise ConfigError(f"unknown window {self.window!r}")
        if self.hop <= 0 or self.hop > self.window_len:
            raise ConfigError("hop must satisfy 0 < hop <= window_len")
        if self.fft_len < self.window_len:
            raise ConfigError("fft_len must be >= window_len")
        if not self._cola_ok():
            raise ConfigError(
                f"window={self.window!r}, window_len={self.window_len}, "
                f"hop={self.hop} violates the constant-overlap-add condition"
            )

    def _cola_ok(self) -> bool:
        # Frames must tile the window evenly, and the squared-window
        # overlap-add must stay bounded away from zero over the interior
        # (edges are handled by padding).
        if self.window_len % self.hop != 0:
            return False
        w2 = self.window_values() ** 2
        acc = np.zeros(2 * self.window_len)
        for start in range(0, self.window_len + 1, self.hop):
            acc[start : start + self.window_len] += w2
        interior = acc[self.window_len - self.hop : self.window_len]
        return bool(np.all(interior > 1e-8))

    def window_values(self) -> np.ndarray:
        return _WINDOWS[self.window](self.window_len)

    @property
    def n_freqs(self) -> int:
        return self.fft_len // 2 + 1


@dataclass(frozen=True)
class ComplexSpectrogram:
    data: np.ndarray  # (F, T) complex
    config: StftConfig
    original_len: int
    fs: float = 250.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise StructuralError(f"spectrogram must be 2-D, got shape {data.shape}")
        if data.shape[0] != self.config.n_freqs:
            raise StructuralError(
                f"expected {self.config.n_freqs} frequency rows, got {data.shape[0]}"
            )

    @property
    def shape(self):
        return self.data.shape


def _frame_count(padded_len: int, cfg: StftConfig) -> int:
    return (padded_len - cfg.window_len) // cfg.hop + 1


def _padded_signal(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    if cfg.center:
        half = cfg.window_len // 2
        x = np.concatenate([x[1 : half + 1][::-1], x, x[-half - 1 : -1][::-1]])
    # Zero-pad so the last frame lands exactly at the end.
    overshoot = (len(x) - cfg.window_len) % cfg.hop
    if overshoot:
        x = np.concatenate([x, np.zeros(cfg.hop - overshoot)])
    return x


def stft(x: TimeSeries, cfg: StftConfig = StftConfig()) -> ComplexSpectrogram:
    """One-sided complex STFT; stores the original length for exact inversion."""
    if len(x) < cfg.window_len:
        raise RejectedInput(
            f"signal length {len(x)} shorter than window_len {cfg.window_len}"
        )
    padded = _padded_signal(x.samples, cfg)
    n_frames = _frame_count(len(padded), cfg)
    idx = np.arange(cfg.window_len)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    frames = padded[idx] * cfg.window_values()[None, :]
    data = np.fft.rfft(frames, n=cfg.fft_len, axis=1).T
    return ComplexSpectrogram(data=data, config=cfg, original_len=len(x), fs=x.fs)


def istft(S: ComplexSpectrogram) -> TimeSeries:
    """Overlap-add reconstruction trimmed to the original length."""
    cfg = S.config
    data = S.data
    n_frames = data.shape[1]
    frames = np.fft.irfft(data.T, n=cfg.fft_len, axis=1)[:, : cfg.window_len]
    win = cfg.window_values()
    frames = frames * win[None, :]

    out_len = cfg.window_len + cfg.hop * (n_frames - 1)
    out = np.zeros(out_len)
    norm = np.zeros(out_len)
    w2 = win * win
    for t in range(n_frames):
        start = t * cfg.hop
        out[start : start + cfg.window_len] += frames[t]
        norm[start : start + cfg.window_len] += w2
    nonzero = norm > 1e-12
    out[nonzero] /= norm[nonzero]

    offset = cfg.window_len // 2 if cfg.center else 0
    if offset + S.original_len > out_len:
        raise StructuralError("spectrogram grid inconsistent with original_len")
    samples = out[offset : offset + S.original_len]
    return TimeSeries(samples=samples, fs=S.fs)
