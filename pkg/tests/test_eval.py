import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fecglab.ecgsynth import default_model, make_rr, synth_ecg
from fecglab.errors import RejectedInput, UndefinedMetric
from fecglab.eval import (
    PeakMatch,
    detect_rpeaks,
    detection_metrics,
    hr_error,
    match_rpeaks,
    pcc,
    pcc_centered,
    prd,
)
from fecglab.timeseries import TimeSeries

FS = 250.0


# -- independent brute-force oracles ------------------------------------------


def oracle_prd(f, fhat):
    num = sum((a - b) ** 2 for a, b in zip(f, fhat))
    den = sum(a * a for a in f)
    return 100.0 * math.sqrt(num / den)


def oracle_pcc(f, fhat):
    dot = sum(a * b for a, b in zip(f, fhat))
    nf = math.sqrt(sum(a * a for a in f))
    ng = math.sqrt(sum(b * b for b in fhat))
    return 100.0 * dot / (nf * ng)


def oracle_detection(tp, fn, fp):
    se = 100.0 * tp / (tp + fn)
    f = 100.0 * 2 * tp / (2 * tp + fn + fp)
    return se, f


def oracle_hr_error(pairs, fs):
    ref = [p[0] for p in pairs]
    det = [p[1] for p in pairs]
    diffs = []
    for i in range(len(pairs) - 1):
        hr_ref = 60.0 * fs / (ref[i + 1] - ref[i])
        hr_det = 60.0 * fs / (det[i + 1] - det[i])
        diffs.append((hr_det - hr_ref) ** 2)
    return math.sqrt(sum(diffs) / len(diffs))


# -- detection -----------------------------------------------------------------


class TestDetectRpeaks:
    def test_clean_maternal_80bpm(self):
        rng = np.random.default_rng(5)
        rr = make_rr(80, 2.0, 80, rng)
        m, annotated = synth_ecg(default_model().scaled(900.0), rr, FS)
        det = detect_rpeaks(m, "maternal")
        match = match_rpeaks(det, annotated, FS)
        se, f = detection_metrics(match)
        assert se == 100.0 and f == 100.0
        assert max(abs(a - b) for a, b in match.pairs) <= 2

    def test_clean_fetal_140bpm(self):
        rng = np.random.default_rng(6)
        rr = make_rr(140, 3.0, 140, rng)
        fecg, annotated = synth_ecg(default_model().scaled(15.0), rr, FS)
        det = detect_rpeaks(fecg, "fetal")
        match = match_rpeaks(det, annotated, FS)
        se, f = detection_metrics(match)
        assert se == 100.0 and f == 100.0
        assert max(abs(a - b) for a, b in match.pairs) <= 2

    def test_zero_signal_no_peaks(self):
        assert detect_rpeaks(TimeSeries(np.zeros(1000), FS)).size == 0

    def test_short_input_rejected(self):
        with pytest.raises(RejectedInput):
            detect_rpeaks(TimeSeries(np.ones(400), FS))

    def test_unknown_kind_rejected(self):
        with pytest.raises(RejectedInput):
            detect_rpeaks(TimeSeries(np.zeros(1000), FS), kind="neonatal")

    def test_refractory_period(self):
        rng = np.random.default_rng(7)
        rr = make_rr(80, 2.0, 40, rng)
        m, _ = synth_ecg(default_model().scaled(900.0), rr, FS)
        det = detect_rpeaks(m, "maternal")
        assert np.diff(det).min() >= int(0.200 * FS)


# -- matching ------------------------------------------------------------------


class TestMatchRpeaks:
    def test_identical_lists(self):
        ref = np.array([100, 300, 500])
        m = match_rpeaks(ref, ref, FS)
        assert (m.tp, m.fp, m.fn) == (3, 0, 0)

    def test_outside_window_not_matched(self):
        # 60 ms at 250 Hz is 15 samples, outside the 12.5-sample window.
        m = match_rpeaks(np.array([115]), np.array([100]), FS)
        assert (m.tp, m.fp, m.fn) == (0, 1, 1)

    def test_hand_enumerated_case(self):
        m = match_rpeaks(np.array([105, 610]), np.array([100, 350, 600]), FS)
        assert (m.tp, m.fp, m.fn) == (2, 0, 1)
        assert m.pairs == ((100, 105), (600, 610))

    def test_one_to_one(self):
        # Two detections near one reference: only one pairs up.
        m = match_rpeaks(np.array([98, 103]), np.array([100]), FS)
        assert (m.tp, m.fp, m.fn) == (1, 1, 0)
        assert m.pairs == ((100, 98),)

    @given(st.lists(st.integers(0, 10_000), min_size=0, max_size=40, unique=True),
           st.lists(st.integers(0, 10_000), min_size=0, max_size=40, unique=True))
    @settings(max_examples=200, deadline=None)
    def test_swap_symmetry(self, a, b):
        a, b = sorted(a), sorted(b)
        m1 = match_rpeaks(np.array(a, dtype=np.int64), np.array(b, dtype=np.int64), FS)
        m2 = match_rpeaks(np.array(b, dtype=np.int64), np.array(a, dtype=np.int64), FS)
        assert m1.tp == m2.tp
        assert (m1.fp, m1.fn) == (m2.fn, m2.fp)


# -- counting metrics ------------------------------------------------------------


class TestDetectionMetrics:
    def test_fixed_examples(self):
        se, f = detection_metrics(PeakMatch(9, 0, 1, ()))
        assert se == 90.0
        assert abs(f - 2 * 9 / (2 * 9 + 1) * 100) < 1e-12
        _, f = detection_metrics(PeakMatch(8, 2, 2, ()))
        assert f == 80.0
        se, f = detection_metrics(PeakMatch(5, 0, 0, ()))
        assert se == 100.0 and f == 100.0

    def test_no_reference_rejected(self):
        with pytest.raises(UndefinedMetric):
            detection_metrics(PeakMatch(0, 3, 0, ()))


class TestHRError:
    @staticmethod
    def _match_from(ref, det):
        pairs = tuple(zip(ref, det))
        return PeakMatch(len(pairs), 0, 0, pairs)

    def test_exact_detection_zero_error(self):
        ref = list(range(0, 2000, 125))
        assert hr_error(self._match_from(ref, ref), FS) == 0.0

    def test_constant_rate_closed_form(self):
        ref = list(range(0, 2000, 125))  # RR 0.5 s -> 120 bpm
        det = list(range(0, 2400, 150))[: len(ref)]  # RR 0.6 s -> 100 bpm
        assert abs(hr_error(self._match_from(ref, det), FS) - 20.0) < 1e-12

    def test_too_few_matches_rejected(self):
        with pytest.raises(UndefinedMetric):
            hr_error(PeakMatch(1, 0, 0, ((100, 100),)), FS)

    def test_jitter_matches_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = rng.integers(3, 30)
            ref = np.cumsum(rng.integers(100, 300, size=n))
            det = ref + rng.integers(-10, 11, size=n)
            m = self._match_from(ref.tolist(), det.tolist())
            assert abs(hr_error(m, FS) - oracle_hr_error(m.pairs, FS)) < 1e-9


# -- waveform metrics ------------------------------------------------------------


def _ts(values):
    return TimeSeries(np.asarray(values, dtype=np.float64), FS)


class TestPRD:
    def test_identity(self):
        f = _ts(np.sin(np.arange(100)))
        assert prd(f, f) == 0.0

    def test_zero_estimate(self):
        f = _ts(np.sin(np.arange(100)))
        assert abs(prd(f, _ts(np.zeros(100))) - 100.0) < 1e-12

    def test_double_estimate(self):
        f = _ts(np.sin(np.arange(100)))
        assert abs(prd(f, _ts(2 * f.samples)) - 100.0) < 1e-12

    def test_zero_reference_rejected(self):
        with pytest.raises(UndefinedMetric):
            prd(_ts(np.zeros(10)), _ts(np.ones(10)))

    def test_length_mismatch_rejected(self):
        with pytest.raises(RejectedInput):
            prd(_ts(np.ones(10)), _ts(np.ones(11)))

    @given(st.floats(-5, 5, allow_nan=False))
    @settings(max_examples=100, deadline=None)
    def test_scale_law(self, a):
        f = _ts(np.sin(0.1 * np.arange(200)) + 0.5)
        assert abs(prd(f, _ts(a * f.samples)) - 100.0 * abs(1 - a)) < 1e-9


class TestPCC:
    def test_identity(self):
        f = _ts(np.sin(np.arange(100)))
        assert abs(pcc(f, f) - 100.0) < 1e-12

    def test_negation(self):
        f = _ts(np.sin(np.arange(100)))
        assert abs(pcc(f, _ts(-f.samples)) + 100.0) < 1e-12

    def test_orthogonal_signals(self):
        t = np.arange(1000) / 1000.0
        s = _ts(np.sin(2 * np.pi * 5 * t))
        c = _ts(np.cos(2 * np.pi * 5 * t))
        assert abs(pcc(s, c)) < 1e-9

    def test_zero_norm_rejected(self):
        with pytest.raises(UndefinedMetric):
            pcc(_ts(np.zeros(10)), _ts(np.ones(10)))

    @given(st.floats(-5, 5, allow_nan=False).filter(lambda a: abs(a) > 1e-6))
    @settings(max_examples=100, deadline=None)
    def test_scale_invariance(self, a):
        rng = np.random.default_rng(3)
        f = _ts(rng.standard_normal(64))
        g = _ts(rng.standard_normal(64))
        assert abs(pcc(f, _ts(a * g.samples)) - pcc(f, g) * np.sign(a)) < 1e-9

    def test_centered_variant_removes_offset(self):
        rng = np.random.default_rng(4)
        f = _ts(rng.standard_normal(256))
        g = _ts(f.samples + 100.0)  # huge DC offset
        assert pcc_centered(f, g) > 99.9
        assert pcc(f, g) < 50.0


class TestFuzzedOracles:
    def test_thousand_fuzzed_cases(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            n = int(rng.integers(4, 64))
            f = rng.standard_normal(n)
            g = f + 0.5 * rng.standard_normal(n)
            assert abs(prd(_ts(f), _ts(g)) - oracle_prd(f, g)) < 1e-9
            assert abs(pcc(_ts(f), _ts(g)) - oracle_pcc(f, g)) < 1e-9
            tp, fn, fp = rng.integers(1, 50), rng.integers(0, 50), rng.integers(0, 50)
            got = detection_metrics(PeakMatch(int(tp), int(fp), int(fn), ()))
            want = oracle_detection(tp, fn, fp)
            assert abs(got[0] - want[0]) < 1e-9 and abs(got[1] - want[1]) < 1e-9

    def test_metrics_match_recount_from_pairs(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            ref = np.unique(rng.integers(0, 5000, size=rng.integers(1, 30)))
            det = np.unique(rng.integers(0, 5000, size=rng.integers(0, 30)))
            m = match_rpeaks(det, ref, FS)
            # Brute-force recount from the raw pair list.
            assert m.tp == len(m.pairs)
            assert m.fn == len(ref) - len(m.pairs)
            assert m.fp == len(det) - len(m.pairs)
            tol = 0.050 * FS
            for r, d in m.pairs:
                assert abs(r - d) <= tol
            assert len({p[0] for p in m.pairs}) == len(m.pairs)
            assert len({p[1] for p in m.pairs}) == len(m.pairs)
