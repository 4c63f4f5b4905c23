"""Training loop for the complex UNet.

The loss is the mean squared error on the complex spectrogram (real and
imaginary residuals against the reference fetal spectrogram) plus an equally
weighted time-domain MSE after the differentiable inverse STFT. Optimization
is adaptive-moment gradient descent; everything is single-threaded numpy, so
runs are bit-identical under a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import NumericalError, RejectedInput
from ..spectral import StftConfig, stft
from ..timeseries import TimeSeries
from .layers import ComplexTensor
from .model import CUNet

#: Segment geometry shared by training and inference (~8.2 s at 250 Hz).
SEGMENT_LEN = 2048
SEGMENT_HOP = 1024


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 8
    epochs: int = 10
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


@dataclass
class SegmentExample:
    """One normalized training pair on the spectrogram grid."""

    spec_in: np.ndarray  # complex (F, T)
    spec_target: np.ndarray  # complex (F, T)
    time_target: np.ndarray  # (SEGMENT_LEN,) in normalized units
    scale: float


def segment_starts(n: int, seg_len: int = SEGMENT_LEN, hop: int = SEGMENT_HOP):
    if n < seg_len:
        raise RejectedInput(f"signal of {n} samples is shorter than one segment ({seg_len})")
    starts = list(range(0, n - seg_len + 1, hop))
    if starts[-1] != n - seg_len:
        starts.append(n - seg_len)
    return starts


def make_examples(
    mixture: TimeSeries,
    target: TimeSeries,
    stft_cfg: StftConfig,
) -> list:
    """Cut a record into normalized segment pairs on the spectrogram grid."""
    examples = []
    for start in segment_starts(len(mixture)):
        seg = mixture.samples[start : start + SEGMENT_LEN]
        tgt = target.samples[start : start + SEGMENT_LEN]
        mu = seg.mean()
        scale = seg.std()
        if scale == 0.0:
            scale = 1.0
        seg_n = (seg - mu) / scale
        tgt_n = tgt / scale
        spec_in = stft(TimeSeries(seg_n, mixture.fs), stft_cfg).data
        spec_tgt = stft(TimeSeries(tgt_n, mixture.fs), stft_cfg).data
        examples.append(
            SegmentExample(spec_in=spec_in, spec_target=spec_tgt,
                           time_target=tgt_n, scale=float(scale))
        )
    return examples


def istft_tensor(z: ComplexTensor, cfg: StftConfig, original_len: int) -> Tensor:
    """Differentiable inverse STFT of a (B, 1, F, T) complex pair."""
    b, _, n_freqs, n_frames = z.shape
    re = ad.reshape(z.re, (b, n_freqs, n_frames))
    im = ad.reshape(z.im, (b, n_freqs, n_frames))
    # (B, T, F) frames along the last axis for the inverse transform.
    re_t = Tensor(np.swapaxes(re.data, 1, 2),
                  parents=((re, lambda g: np.swapaxes(g, 1, 2)),))
    im_t = Tensor(np.swapaxes(im.data, 1, 2),
                  parents=((im, lambda g: np.swapaxes(g, 1, 2)),))
    frames = ad.irfft_pair(re_t, im_t, cfg.fft_len)
    frames = ad.slice_last(frames, 0, cfg.window_len)
    win = cfg.window_values()
    frames = frames * Tensor(win)

    out_len = cfg.window_len + cfg.hop * (n_frames - 1)
    sig = ad.overlap_add(frames, cfg.hop, out_len)

    norm = np.zeros(out_len)
    w2 = win * win
    for t in range(n_frames):
        norm[t * cfg.hop : t * cfg.hop + cfg.window_len] += w2
    norm[norm <= 1e-12] = 1.0
    sig = sig * Tensor(1.0 / norm)

    offset = cfg.window_len // 2 if cfg.center else 0
    return ad.slice_last(sig, offset, offset + original_len)


def batch_loss(model: CUNet, batch: list, stft_cfg: StftConfig) -> Tensor:
    """Spectrogram MSE plus time-domain MSE for a batch of segment examples."""
    spec_in = np.stack([ex.spec_in for ex in batch])[:, None]
    x = ComplexTensor.from_complex(spec_in)
    out = model.forward(x)

    tgt = np.stack([ex.spec_target for ex in batch])[:, None]
    d_re = out.re - Tensor(tgt.real)
    d_im = out.im - Tensor(tgt.imag)
    spec_mse = ad.tmean(ad.square(d_re) + ad.square(d_im))

    est = istft_tensor(out, stft_cfg, SEGMENT_LEN)
    time_tgt = np.stack([ex.time_target for ex in batch])
    time_mse = ad.tmean(ad.square(est - Tensor(time_tgt)))

    return spec_mse + time_mse


class Adam:
    def __init__(self, params, cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p.data) for _, p in params]
        self.v = [np.zeros_like(p.data) for _, p in params]
        self.t = 0

    def step(self):
        self.t += 1
        c = self.cfg
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for i, (_, p) in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = c.beta1 * self.m[i] + (1 - c.beta1) * g
            self.v[i] = c.beta2 * self.v[i] + (1 - c.beta2) * g * g
            p.data = p.data - c.lr * (self.m[i] / bc1) / (np.sqrt(self.v[i] / bc2) + c.adam_eps)


def train(model: CUNet, examples: list, cfg: TrainConfig, stft_cfg: StftConfig,
          max_steps: int | None = None, log=None):
    """Mini-batch training; returns the per-step loss history."""
    if not examples:
        raise RejectedInput("training requires at least one example")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.parameters(), cfg)
    history = []
    steps = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(examples))
        for i in range(0, len(order), cfg.batch_size):
            batch = [examples[j] for j in order[i : i + cfg.batch_size]]
            model.zero_grad()
            loss = batch_loss(model, batch, stft_cfg)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NumericalError(
                    f"non-finite loss {value} at epoch {epoch}, step {steps}"
                )
            if cfg.lr != 0.0:
                loss.backward()
                opt.step()
            history.append(value)
            steps += 1
            if max_steps is not None and steps >= max_steps:
                return history
        if log is not None:
            log(epoch, history[-1])
    return history
