"""R-peak detection and extraction-quality metrics.

Detection follows the classic bandpass / differentiate / square / integrate
chain with an adaptive threshold; all stages are zero-phase or centered so
detected peaks line up with the underlying QRS maxima.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import RejectedInput, UndefinedMetric
from .timeseries import TimeSeries

MATCH_TOL_S = 0.050

# Detector presets: passband (Hz) and refractory period (s).
MATERNAL_BAND = (5.0, 15.0)
FETAL_BAND = (10.0, 40.0)
MATERNAL_REFRACTORY_S = 0.200
FETAL_REFRACTORY_S = 0.150


@dataclass(frozen=True)
class PeakMatch:
    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[int, int], ...]  # (reference index, detected index)


def detect_rpeaks(x: TimeSeries, kind: str = "maternal") -> np.ndarray:
    """Detect R peaks; `kind` selects the maternal or fetal preset."""
    if kind == "maternal":
        band, refractory_s = MATERNAL_BAND, MATERNAL_REFRACTORY_S
    elif kind == "fetal":
        band, refractory_s = FETAL_BAND, FETAL_REFRACTORY_S
    else:
        raise RejectedInput(f"unknown detector kind {kind!r}")
    n = len(x.samples)
    if n < 2 * x.fs:
        raise RejectedInput("detection needs at least 2 s of signal")
    if not np.any(x.samples):
        return np.array([], dtype=np.int64)

    sos = sps.butter(3, band, btype="bandpass", fs=x.fs, output="sos")
    bp = sps.sosfiltfilt(sos, x.samples)
    feat = np.diff(bp, prepend=bp[0]) ** 2
    win = max(1, int(round(0.10 * x.fs)))
    feat = np.convolve(feat, np.ones(win) / win, mode="same")

    refractory = max(1, int(round(refractory_s * x.fs)))
    cand, _ = sps.find_peaks(feat, distance=refractory)
    if cand.size == 0:
        return np.array([], dtype=np.int64)

    # Adaptive signal/noise levels in the Pan-Tompkins style.
    spk = float(np.max(feat[: int(2 * x.fs)]))
    npk = float(np.mean(feat[: int(2 * x.fs)]))
    accepted = []
    for c in cand:
        thr = npk + 0.25 * (spk - npk)
        if feat[c] >= thr:
            accepted.append(c)
            spk = 0.875 * spk + 0.125 * feat[c]
        else:
            npk = 0.875 * npk + 0.125 * feat[c]

    # Refine each detection to the local bandpassed maximum.
    search = int(round(0.10 * x.fs))
    peaks = []
    for c in accepted:
        lo, hi = max(0, c - search), min(n, c + search + 1)
        peaks.append(lo + int(np.argmax(bp[lo:hi])))
    peaks = np.unique(np.asarray(peaks, dtype=np.int64))
    # Enforce the refractory period after refinement.
    keep = []
    for p in peaks:
        if not keep or p - keep[-1] >= refractory:
            keep.append(int(p))
        elif bp[p] > bp[keep[-1]]:
            keep[-1] = int(p)
    return np.asarray(keep, dtype=np.int64)


def match_rpeaks(detected, reference, fs: float, tol: float = MATCH_TOL_S) -> PeakMatch:
    """Greedy one-to-one nearest-neighbor matching within `tol` seconds."""
    det = np.asarray(detected, dtype=np.int64)
    ref = np.asarray(reference, dtype=np.int64)
    tol_samples = tol * fs
    cands = []
    for i, r in enumerate(ref):
        d = np.abs(det - r)
        for j in np.nonzero(d <= tol_samples)[0]:
            cands.append((float(d[j]), i, int(j)))
    cands.sort()
    used_ref: set[int] = set()
    used_det: set[int] = set()
    pairs = []
    for _, i, j in cands:
        if i in used_ref or j in used_det:
            continue
        used_ref.add(i)
        used_det.add(j)
        pairs.append((int(ref[i]), int(det[j])))
    pairs.sort()
    tp = len(pairs)
    return PeakMatch(tp=tp, fp=len(det) - tp, fn=len(ref) - tp, pairs=tuple(pairs))


def detection_metrics(m: PeakMatch) -> tuple[float, float]:
    """Sensitivity and F-score in percent."""
    if m.tp + m.fn < 1:
        raise UndefinedMetric("no reference peaks")
    se = 100.0 * m.tp / (m.tp + m.fn)
    f = 100.0 * 2 * m.tp / (2 * m.tp + m.fn + m.fp)
    return se, f


def hr_error(m: PeakMatch, fs: float) -> float:
    """RMS difference of per-beat instantaneous heart rate (bpm), computed on
    consecutive matched beats only."""
    if m.tp < 2:
        raise UndefinedMetric("need at least 2 matched beats")
    ref = np.array([p[0] for p in m.pairs], dtype=np.float64)
    det = np.array([p[1] for p in m.pairs], dtype=np.float64)
    hr_ref = 60.0 * fs / np.diff(ref)
    hr_det = 60.0 * fs / np.diff(det)
    return float(np.sqrt(np.mean((hr_det - hr_ref) ** 2)))


def prd(reference: TimeSeries, estimate: TimeSeries) -> float:
    f = reference.samples
    fhat = estimate.samples
    if len(f) != len(fhat):
        raise RejectedInput("length mismatch")
    denom = float(np.sum(f * f))
    if denom == 0.0:
        raise UndefinedMetric("zero reference")
    return 100.0 * float(np.sqrt(np.sum((f - fhat) ** 2) / denom))


def pcc(reference: TimeSeries, estimate: TimeSeries) -> float:
    """Uncentered correlation scaled to [-100, 100]."""
    f = reference.samples
    fhat = estimate.samples
    if len(f) != len(fhat):
        raise RejectedInput("length mismatch")
    nf = float(np.sqrt(np.sum(f * f)))
    ng = float(np.sqrt(np.sum(fhat * fhat)))
    if nf == 0.0 or ng == 0.0:
        raise UndefinedMetric("zero-norm operand")
    return 100.0 * float(np.sum(f * fhat)) / (nf * ng)


def pcc_centered(reference: TimeSeries, estimate: TimeSeries) -> float:
    """Mean-removed variant, reported alongside the headline score."""
    f = reference.samples - reference.samples.mean()
    fhat = estimate.samples - estimate.samples.mean()
    return pcc(reference.with_samples(f), estimate.with_samples(fhat))
