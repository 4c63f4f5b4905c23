"""Classical single-channel comparators.

- Extended Kalman filter/smoother tracking the maternal ECG through the
  Gaussian-sum cycle model, phase-locked to maternal R peaks; the residual is
  the fetal candidate.
- SVD template subtraction: beats are warped onto a fixed-length grid aligned
  on the QRS, a low-rank reconstruction is unwarped and subtracted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .ecgsynth import ECGModelParams, wave_sum
from .errors import RejectedInput
from .timeseries import TimeSeries

log = logging.getLogger(__name__)


# -- shared helpers -----------------------------------------------------------


def _wrap(theta):
    return (theta + np.pi) % (2 * np.pi) - np.pi


def _phase_from_rpeaks(n: int, rpeaks: np.ndarray) -> np.ndarray:
    """Linear phase ramp hitting 0 at every R peak, -pi..pi per beat."""
    rpeaks = np.asarray(rpeaks, dtype=np.float64)
    if rpeaks.size == 0:
        raise RejectedInput("need at least one R peak")
    if rpeaks.size == 1:
        anchors = np.array([rpeaks[0] - 200.0, rpeaks[0], rpeaks[0] + 200.0])
    else:
        rr_head = rpeaks[1] - rpeaks[0]
        rr_tail = rpeaks[-1] - rpeaks[-2]
        anchors = np.concatenate([[rpeaks[0] - rr_head], rpeaks, [rpeaks[-1] + rr_tail]])
    # Unwrapped phase grows by 2*pi per beat; R peaks sit at even multiples.
    beat_index = np.interp(np.arange(n), anchors, np.arange(len(anchors)) - 1.0)
    return _wrap(2 * np.pi * beat_index)


def _cycle_mean(model: ECGModelParams) -> float:
    """Mean of the wave sum over one cycle; the generator emits zero-mean
    cycles, so the observation template must be centred the same way."""
    grid = np.linspace(-np.pi, np.pi, 4096, endpoint=False)
    return float(wave_sum(model, grid).mean())


def _fit_amplitude_scale(x: np.ndarray, model: ECGModelParams, phase: np.ndarray) -> float:
    """Least-squares projection of the signal onto the phase-locked template.

    The template is centred because the generator emits zero-mean cycles."""
    g = wave_sum(model, phase) - _cycle_mean(model)
    denom = float(np.dot(g, g))
    if denom == 0.0:
        return 1.0
    return float(np.dot(x, g) / denom)


# -- extended Kalman filter / smoother ----------------------------------------


@dataclass(frozen=True)
class EKFNoise:
    """Process/measurement variances, tuned once on synthetic data and frozen.

    q_slope scales a slope-dependent term q_slope * g'(theta)^2 added to the
    amplitude process noise: phase jitter translates into amplitude error in
    proportion to the template slope, so the filter discounts the dynamical
    prediction on the steep QRS flanks.
    """

    q_theta: float = 1e-4
    q_z: float = 1e-7
    r_theta: float = 10.0
    r_z: float = 3e-2
    q_slope: float = 0.0


def _psd_floor_scalar(p00, p01, p11):
    tr = p00 + p11
    gap = math.sqrt((p00 - p11) ** 2 + 4.0 * p01 * p01)
    lam_min = 0.5 * (tr - gap)
    if lam_min < 1e-12:
        if lam_min < -1e-12:
            log.warning("EKF covariance lost PSD (min eig %.3e); flooring", lam_min)
        bump = 1e-12 - lam_min
        p00 += bump
        p11 += bump
    return p00, p01, p11


def _ekf_pass(x, fs, rpeaks, model, noise: EKFNoise, keep_history=False):
    """Scalar 2x2 Kalman recursion; the state is (phase, amplitude)."""
    n = len(x)
    phase_obs = _phase_from_rpeaks(n, rpeaks)
    # Per-sample angular rate from the R-peak grid.
    omega = np.gradient(np.unwrap(phase_obs))
    omega = np.clip(omega, 2 * np.pi / (2.0 * fs), 2 * np.pi / (0.2 * fs))

    # Flattened model parameters for scalar evaluation.
    w_theta = np.array([w.theta for w in model.waves])
    w_amp = np.array([w.amplitude * model.base_amplitude_scale for w in model.waves])
    w_width = np.array([w.width for w in model.waves])

    def g_and_slope(theta):
        d = theta - w_theta
        e = w_amp * np.exp(-0.5 * (d / w_width) ** 2)
        return float(e.sum()), float((-e * d / (w_width**2)).sum())

    qt, qz, rt, rz, qs = (noise.q_theta, noise.q_z, noise.r_theta,
                          noise.r_z, noise.q_slope)
    two_pi = 2.0 * math.pi
    theta = float(phase_obs[0])
    z = float(x[0])
    p00, p01, p11 = 0.1, 0.0, 1.0

    g_cur, _ = g_and_slope(theta)
    est = np.empty(n)
    hist = [] if keep_history else None
    for k in range(n):
        # predict
        theta_pred = theta + omega[k]
        theta_pred = (theta_pred + math.pi) % two_pi - math.pi
        g_pred, slope_pred = g_and_slope(theta_pred)
        _, slope_cur = g_and_slope(theta)
        z_pred = z + g_pred - g_cur
        dgd = slope_pred - slope_cur
        q00 = p00 + qt
        q01 = dgd * p00 + p01
        q11 = dgd * dgd * p00 + 2.0 * dgd * p01 + p11 + qz + qs * slope_pred**2

        # update with the (phase, amplitude) observation, H = I
        iv0 = (phase_obs[k] - theta_pred + math.pi) % two_pi - math.pi
        iv1 = x[k] - z_pred
        s00, s01, s11 = q00 + rt, q01, q11 + rz
        det = s00 * s11 - s01 * s01
        k00 = (q00 * s11 - q01 * s01) / det
        k01 = (-q00 * s01 + q01 * s00) / det
        k10 = (q01 * s11 - q11 * s01) / det
        k11 = (-q01 * s01 + q11 * s00) / det
        theta = (theta_pred + k00 * iv0 + k01 * iv1 + math.pi) % two_pi - math.pi
        z = z_pred + k10 * iv0 + k11 * iv1
        a00, a01 = 1.0 - k00, -k01
        a10, a11 = -k10, 1.0 - k11
        u00 = a00 * q00 + a01 * q01
        u01 = a00 * q01 + a01 * q11
        u10 = a10 * q00 + a11 * q01
        u11 = a10 * q01 + a11 * q11
        p00, p01, p11 = _psd_floor_scalar(u00, 0.5 * (u01 + u10), u11)

        g_cur, _ = g_and_slope(theta)
        est[k] = z
        if keep_history:
            hist.append(((theta_pred, z_pred), (q00, q01, q11),
                         (theta, z), (p00, p01, p11), dgd))
    return est, hist


def _prepare(x: TimeSeries, rpeaks, model):
    """Normalize the signal to unit model amplitude via least squares."""
    sig = x.samples
    if np.all(sig == 0.0):
        return sig, 0.0
    phase = _phase_from_rpeaks(len(sig), rpeaks)
    scale = _fit_amplitude_scale(sig, model, phase)
    if scale == 0.0:
        return sig, 0.0
    return sig / scale, scale


def ekf_denoise(x: TimeSeries, rpeaks, model: ECGModelParams,
                noise: EKFNoise = EKFNoise()):
    """Forward EKF maternal estimate; returns (mecg_estimate, residual)."""
    if len(np.atleast_1d(rpeaks)) == 0:
        raise RejectedInput("rpeaks must be non-empty")
    sig, scale = _prepare(x, rpeaks, model)
    if scale == 0.0:
        zeros = x.with_samples(np.zeros_like(sig))
        return zeros, zeros
    est, _ = _ekf_pass(sig, x.fs, rpeaks, model, noise)
    est = est * scale
    return x.with_samples(est), x.with_samples(x.samples - est)


def eks_denoise(x: TimeSeries, rpeaks, model: ECGModelParams,
                noise: EKFNoise = EKFNoise()):
    """Forward EKF plus backward Rauch-Tung-Striebel smoothing pass."""
    if len(np.atleast_1d(rpeaks)) == 0:
        raise RejectedInput("rpeaks must be non-empty")
    sig, scale = _prepare(x, rpeaks, model)
    if scale == 0.0:
        zeros = x.with_samples(np.zeros_like(sig))
        return zeros, zeros
    _, hist = _ekf_pass(sig, x.fs, rpeaks, model, noise, keep_history=True)

    n = len(sig)
    sm_theta, sm_z = hist[-1][2]
    s00, s01, s11 = hist[-1][3]
    est = np.empty(n)
    est[-1] = sm_z
    for k in range(n - 2, -1, -1):
        (tp, zp), (q00, q01, q11), _, _, dgd = hist[k + 1]
        _, _, (tf, zf), (f00, f01, f11), _ = hist[k]
        # G = P_f F^T P_pred^{-1} with F = [[1, 0], [dgd, 1]]
        b00, b01 = f00, f00 * dgd + f01
        b10, b11 = f01, f01 * dgd + f11
        det = q00 * q11 - q01 * q01
        g00 = (b00 * q11 - b01 * q01) / det
        g01 = (-b00 * q01 + b01 * q00) / det
        g10 = (b10 * q11 - b11 * q01) / det
        g11 = (-b10 * q01 + b11 * q00) / det
        d0 = _wrap(sm_theta - tp)
        d1 = sm_z - zp
        sm_theta = _wrap(tf + g00 * d0 + g01 * d1)
        sm_z = zf + g10 * d0 + g11 * d1
        # P_s = P_f + G (P_s - P_pred) G^T
        e00, e01, e11 = s00 - q00, s01 - q01, s11 - q11
        t00 = g00 * e00 + g01 * e01
        t01 = g00 * e01 + g01 * e11
        t10 = g10 * e00 + g11 * e01
        t11 = g10 * e01 + g11 * e11
        s00 = f00 + t00 * g00 + t01 * g01
        s01 = f01 + t10 * g00 + t11 * g01
        s11 = f11 + t10 * g10 + t11 * g11
        s00, s01, s11 = _psd_floor_scalar(s00, s01, s11)
        est[k] = sm_z
    est = est * scale
    return x.with_samples(est), x.with_samples(x.samples - est)


# -- SVD template subtraction ---------------------------------------------------


def _beat_spans(n: int, rpeaks: np.ndarray):
    """Half-beat boundaries around each R peak, extended to cover the record."""
    r = np.asarray(rpeaks, dtype=np.int64)
    rr = np.diff(r)
    med = int(round(np.median(rr))) if rr.size else 200
    lefts = np.concatenate([[med], rr]) // 2
    rights = np.concatenate([rr, [med]]) - np.concatenate([rr, [med]]) // 2
    spans = [(int(r[i] - lefts[i]), int(r[i]), int(r[i] + rights[i])) for i in range(len(r))]
    # Virtual beats to cover the head and tail of the record.
    while spans[0][0] > 0:
        s, c, _ = spans[0]
        spans.insert(0, (s - med, c - med, s))
    while spans[-1][2] < n:
        _, c, e = spans[-1]
        spans.append((e, c + med, e + med))
    return spans, len(r)


def _warp_matrix(left: int, right: int, half: int) -> np.ndarray:
    """Linear-interpolation operator mapping a beat of left+right samples onto
    a 2*half grid with the R peak pinned at index `half`."""
    total = left + right
    pos_left = left * np.arange(half) / half
    pos_right = left + right * np.arange(half) / half
    pos = np.concatenate([pos_left, pos_right])
    W = np.zeros((2 * half, total))
    lo = np.clip(np.floor(pos).astype(int), 0, total - 1)
    hi = np.clip(lo + 1, 0, total - 1)
    frac = pos - np.floor(pos)
    W[np.arange(2 * half), lo] += 1.0 - frac
    W[np.arange(2 * half), hi] += frac
    return W


def svd_template_subtract(x: TimeSeries, rpeaks, rank: int, row_len: int = 256):
    """Low-rank per-beat template subtraction; returns (reconstruction, residual)."""
    rpeaks = np.asarray(rpeaks, dtype=np.int64)
    if rpeaks.size < 3:
        raise RejectedInput("template subtraction needs at least 3 beats")
    if rank < 1:
        raise RejectedInput("rank must be >= 1")
    sig = x.samples
    n = len(sig)
    spans, _ = _beat_spans(n, rpeaks)

    half = row_len // 2
    longest = max(max(c - s, e - c) for s, c, e in spans)
    while half < longest:  # keep the warp injective for long beats
        half *= 2

    # Warp fully-contained beats onto the common grid.
    rows, warps, full_idx = [], {}, []
    for i, (s, c, e) in enumerate(spans):
        if s >= 0 and e <= n:
            W = _warp_matrix(c - s, e - c, half)
            warps[i] = W
            rows.append(W @ sig[s:e])
            full_idx.append(i)
    if len(rows) < 3:
        raise RejectedInput("fewer than 3 fully-contained beats")
    B = np.vstack(rows)

    U, S, Vt = np.linalg.svd(B, full_matrices=False)
    r = min(rank, len(S))
    recon_rows = (U[:, :r] * S[:r]) @ Vt[:r]
    mean_row = recon_rows.mean(axis=0)

    recon = np.zeros(n)
    row_of = dict(zip(full_idx, range(len(full_idx))))
    for i, (s, c, e) in enumerate(spans):
        if i in warps:
            W = warps[i]
            beat_rec, *_ = np.linalg.lstsq(W, recon_rows[row_of[i]], rcond=None)
            recon[s:e] = beat_rec
        else:
            # Edge beat: unwarp the mean template over the visible part.
            W = _warp_matrix(c - s, e - c, half)
            beat_rec, *_ = np.linalg.lstsq(W, mean_row, rcond=None)
            lo, hi = max(s, 0), min(e, n)
            recon[lo:hi] = beat_rec[lo - s : hi - s]
    return x.with_samples(recon), x.with_samples(sig - recon)
