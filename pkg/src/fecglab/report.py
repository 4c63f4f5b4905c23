"""Per-record extraction, scoring, and aggregation across methods.

Each method maps a preprocessed abdominal recording to a fetal estimate; the
estimate is scored against the clean fetal reference with PRD/PCC and with the
R-peak detection metrics. Aggregates are reported as mean +/- std per method
and binned by fetal-referenced SNR (the fetal trace as the only useful
component, everything else counted as noise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import eval as ev
from .baselines import ekf_denoise, eks_denoise, svd_template_subtract
from .cunet.extract import extract_fecg
from .dataset import Record
from .ecgsynth import default_model
from .errors import FecgLabError, RejectedInput
from .filters import preprocess
from .timeseries import TimeSeries

METHODS = ("cunet", "ekf", "eks", "svd", "passthrough")

#: Fetal-referenced SNR bin edges (dB), lowest to highest.
FETAL_SNR_EDGES = (-25.0, -20.0, -15.0, -10.0, -5.0, 0.0)

SVD_MATERNAL_RANK = 1
SVD_FETAL_RANK = 2


def fetal_snr_db(record: Record) -> float:
    """SNR with the fetal trace as signal and everything else as noise."""
    p_f = np.mean(record.fecg_ref.samples**2)
    p_rest = np.mean((record.mecg_ref.samples + record.noise_ref.samples) ** 2)
    return 10.0 * math.log10(p_f / p_rest)


def _maternal_residual(pre: TimeSeries, denoise_fn) -> TimeSeries:
    rpeaks = ev.detect_rpeaks(pre, "maternal")
    if rpeaks.size == 0:
        return pre
    _, residual = denoise_fn(pre, rpeaks, default_model())
    return residual


def run_method(method: str, record: Record, model=None,
               stft_cfg=None) -> TimeSeries:
    """Produce a fetal estimate from the record's abdominal channel."""
    pre = preprocess(record.abdominal)
    if method == "passthrough":
        return pre
    if method == "cunet":
        if model is None:
            raise RejectedInput("cunet method requires a model")
        return extract_fecg(model, pre) if stft_cfg is None else extract_fecg(
            model, pre, stft_cfg)
    if method == "ekf":
        return _maternal_residual(pre, ekf_denoise)
    if method == "eks":
        return _maternal_residual(pre, eks_denoise)
    if method == "svd":
        rpeaks = ev.detect_rpeaks(pre, "maternal")
        if rpeaks.size < 3:
            return pre
        _, residual = svd_template_subtract(pre, rpeaks, SVD_MATERNAL_RANK)
        try:
            f_peaks = ev.detect_rpeaks(residual, "fetal")
            if f_peaks.size < 3:
                return residual
            cleaned, _ = svd_template_subtract(residual, f_peaks, SVD_FETAL_RANK)
            return cleaned
        except FecgLabError:
            return residual
    raise RejectedInput(f"unknown method {method!r}")


@dataclass(frozen=True)
class RecordScores:
    record_id: int
    method: str
    fetal_snr_db: float
    prd: float
    pcc: float
    pcc_centered: float
    se: float | None
    f_score: float | None
    hr_err: float | None


def score_estimate(record: Record, estimate: TimeSeries, method: str,
                   record_id: int = -1) -> RecordScores:
    ref = record.fecg_ref
    prd_v = ev.prd(ref, estimate)
    pcc_v = ev.pcc(ref, estimate)
    pcc_c = ev.pcc_centered(ref, estimate)
    se = f_score = hr_err = None
    try:
        detected = ev.detect_rpeaks(estimate, "fetal")
        match = ev.match_rpeaks(detected, np.asarray(record.meta["fetal_rpeaks"]),
                                estimate.fs)
        se, f_score = ev.detection_metrics(match)
        if match.tp >= 2:
            hr_err = ev.hr_error(match, estimate.fs)
    except FecgLabError:
        pass
    return RecordScores(record_id, method, fetal_snr_db(record),
                        prd_v, pcc_v, pcc_c, se, f_score, hr_err)


def evaluate_record(record: Record, methods=METHODS, model=None,
                    stft_cfg=None, record_id: int = -1) -> list[RecordScores]:
    return [
        score_estimate(record, run_method(m, record, model, stft_cfg), m, record_id)
        for m in methods
    ]


_METRICS = ("prd", "pcc", "pcc_centered", "se", "f_score", "hr_err")


def _mean_std(values) -> dict:
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None, "n": 0}
    return {"mean": float(np.mean(vals)), "std": float(np.std(vals)), "n": len(vals)}


def aggregate(scores: list[RecordScores]) -> dict:
    """mean +/- std of every metric, per method."""
    out = {}
    for method in sorted({s.method for s in scores}):
        rows = [s for s in scores if s.method == method]
        out[method] = {
            metric: _mean_std([getattr(s, metric) for s in rows])
            for metric in _METRICS
        }
    return out


def snr_bin_label(snr: float) -> str:
    edges = FETAL_SNR_EDGES
    if snr < edges[0]:
        return f"(-inf, {edges[0]:g})"
    for lo, hi in zip(edges, edges[1:]):
        if lo <= snr < hi:
            return f"[{lo:g}, {hi:g})"
    return f"[{edges[-1]:g}, inf)"


def aggregate_by_snr(scores: list[RecordScores]) -> dict:
    """Per-method aggregates inside each fetal-referenced SNR bin."""
    out = {}
    for method in sorted({s.method for s in scores}):
        rows = [s for s in scores if s.method == method]
        bins = {}
        labels = ([f"(-inf, {FETAL_SNR_EDGES[0]:g})"]
                  + [f"[{lo:g}, {hi:g})" for lo, hi in
                     zip(FETAL_SNR_EDGES, FETAL_SNR_EDGES[1:])]
                  + [f"[{FETAL_SNR_EDGES[-1]:g}, inf)"])
        for label in labels:
            members = [s for s in rows if snr_bin_label(s.fetal_snr_db) == label]
            if members:
                bins[label] = {
                    metric: _mean_std([getattr(s, metric) for s in members])
                    for metric in _METRICS
                }
        out[method] = bins
    return out


def scores_to_csv(scores: list[RecordScores]) -> str:
    header = "record_id,method,fetal_snr_db," + ",".join(_METRICS)
    lines = [header]
    for s in sorted(scores, key=lambda s: (s.record_id, s.method)):
        vals = [getattr(s, m) for m in _METRICS]
        cells = [str(s.record_id), s.method, f"{s.fetal_snr_db:.4f}"]
        cells += ["" if v is None else f"{v:.6f}" for v in vals]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
