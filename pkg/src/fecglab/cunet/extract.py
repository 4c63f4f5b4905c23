"""Whole-record fetal ECG extraction: segment, normalize, transform, denoise,
invert, and cross-fade the overlapping segments back together."""

from __future__ import annotations

import numpy as np

from ..errors import RejectedInput
from ..spectral import ComplexSpectrogram, StftConfig, istft, stft
from ..timeseries import TimeSeries
from .model import CUNet
from .training import SEGMENT_HOP, SEGMENT_LEN, segment_starts


def _crossfade_weights(n_segments: int, seg_len: int, overlap: int) -> np.ndarray:
    """Per-segment raised-cosine tapers, flat at the record boundaries."""
    weights = np.ones((n_segments, seg_len))
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(overlap) / overlap)
    for i in range(n_segments):
        if i > 0:
            weights[i, :overlap] = ramp
        if i < n_segments - 1:
            weights[i, seg_len - overlap :] = ramp[::-1]
    return weights


def extract_fecg(model: CUNet, abdominal: TimeSeries,
                 stft_cfg: StftConfig = StftConfig()) -> TimeSeries:
    """Run the denoiser over a full record; output length equals input length."""
    n = len(abdominal)
    if n < SEGMENT_LEN:
        raise RejectedInput(
            f"input of {n} samples is shorter than one segment ({SEGMENT_LEN})"
        )
    starts = segment_starts(n)
    overlap = SEGMENT_LEN - SEGMENT_HOP

    out = np.zeros(n)
    acc = np.zeros(n)
    weights = _crossfade_weights(len(starts), SEGMENT_LEN, overlap)
    for i, start in enumerate(starts):
        seg = abdominal.samples[start : start + SEGMENT_LEN]
        mu, scale = seg.mean(), seg.std()
        if scale == 0.0:
            scale = 1.0
        seg_n = (seg - mu) / scale
        S = stft(TimeSeries(seg_n, abdominal.fs), stft_cfg)
        denoised = model.forward_complex(S.data[None])[0]
        est = istft(
            ComplexSpectrogram(denoised, stft_cfg, SEGMENT_LEN, abdominal.fs)
        ).samples * scale
        out[start : start + SEGMENT_LEN] += est * weights[i]
        acc[start : start + SEGMENT_LEN] += weights[i]
    # The trailing segment is snapped to the record end, so coverage can
    # overlap irregularly there; normalize by the accumulated weight.
    acc[acc == 0.0] = 1.0
    return TimeSeries(out / acc, abdominal.fs)
