import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fecglab.ecgsynth import (
    ECGModelParams,
    GaussianWave,
    RRSeries,
    default_model,
    make_rr,
    scale_fetal,
    synth_ecg,
)
from fecglab.errors import RejectedInput
from fecglab.timeseries import TimeSeries


def r_only_model(a_r=1.0):
    waves = (
        GaussianWave("P", -np.pi / 3, 0.0, 0.2),
        GaussianWave("Q", -np.pi / 12, 0.0, 0.1),
        GaussianWave("R", 0.0, a_r, 0.09),
        GaussianWave("S", np.pi / 12, 0.0, 0.1),
        GaussianWave("T", np.pi / 2, 0.0, 0.3),
    )
    return ECGModelParams(waves=waves)


class TestSynthEcg:
    def test_single_wave_gives_one_peak_per_cycle(self):
        rr = RRSeries(intervals=[1.0, 1.0, 1.0])
        ts, rpeaks = synth_ecg(r_only_model(), rr, fs=250.0)
        x = ts.samples
        interior = (x[1:-1] > x[:-2]) & (x[1:-1] > x[2:])
        # Count only prominent maxima; the Gaussian tail is flat but noiseless.
        maxima = np.where(interior & (x[1:-1] > 0.5 * x.max()))[0] + 1
        assert len(maxima) == 3
        assert np.all(np.diff(maxima) == 250)
        assert np.array_equal(maxima, rpeaks)

    def test_zero_amplitudes_give_zero_output(self):
        rr = RRSeries(intervals=[0.8] * 4)
        ts, _ = synth_ecg(r_only_model(a_r=0.0), rr, fs=250.0)
        assert np.all(ts.samples == 0.0)

    def test_cycles_zero_mean(self):
        rr = RRSeries(intervals=[0.8, 1.0, 0.6])
        ts, _ = synth_ecg(default_model(), rr, fs=250.0)
        n0 = int(0.8 * 250)
        assert abs(ts.samples[:n0].mean()) < 1e-12

    def test_annotated_rpeaks_are_local_maxima(self):
        rng = np.random.default_rng(0)
        rr = make_rr(80.0, 4.0, 20, rng)
        ts, rpeaks = synth_ecg(default_model(), rr, fs=250.0)
        x = ts.samples
        for r in rpeaks:
            lo, hi = max(0, r - 2), min(len(x), r + 3)
            assert np.argmax(x[lo:hi]) + lo in range(r - 2, r + 3)

    def test_amplitude_linearity(self):
        rr = RRSeries(intervals=[0.75] * 5)
        ts1, _ = synth_ecg(default_model(), rr, fs=250.0)
        ts2, _ = synth_ecg(default_model().scaled(2.0), rr, fs=250.0)
        np.testing.assert_allclose(ts2.samples, 2.0 * ts1.samples, rtol=1e-12)

    def test_determinism(self):
        rr = make_rr(90.0, 3.0, 10, np.random.default_rng(7))
        a, ra = synth_ecg(default_model(), rr, fs=250.0)
        b, rb = synth_ecg(default_model(), rr, fs=250.0)
        assert np.array_equal(a.samples, b.samples)
        assert np.array_equal(ra, rb)

    def test_invalid_rr_rejected(self):
        with pytest.raises(RejectedInput):
            RRSeries(intervals=[0.1])
        with pytest.raises(RejectedInput):
            RRSeries(intervals=[])


class TestModelParams:
    def test_requires_five_waves(self):
        with pytest.raises(RejectedInput):
            ECGModelParams(waves=default_model().waves[:4])

    def test_requires_increasing_theta(self):
        waves = list(default_model().waves)
        waves[1], waves[2] = waves[2], waves[1]
        with pytest.raises(RejectedInput):
            ECGModelParams(waves=tuple(waves))

    def test_requires_positive_width(self):
        waves = list(default_model().waves)
        waves[0] = GaussianWave("P", waves[0].theta, 0.1, -0.1)
        with pytest.raises(RejectedInput):
            ECGModelParams(waves=tuple(waves))


class TestMakeRR:
    def test_zero_variance_120bpm(self):
        rr = make_rr(120.0, 0.0, 5, np.random.default_rng(1))
        np.testing.assert_allclose(rr.intervals, [0.5] * 5)

    def test_zero_variance_60bpm(self):
        rr = make_rr(60.0, 0.0, 3, np.random.default_rng(2))
        np.testing.assert_allclose(rr.intervals, [1.0] * 3)

    def test_monte_carlo_mean_hr(self):
        rr = make_rr(140.0, 5.0, 1000, np.random.default_rng(42))
        assert abs(np.mean(60.0 / rr.intervals) - 140.0) < 0.5

    def test_out_of_range_hr_rejected(self):
        with pytest.raises(RejectedInput):
            make_rr(30.0, 0.0, 5, np.random.default_rng(0))
        with pytest.raises(RejectedInput):
            make_rr(300.0, 0.0, 5, np.random.default_rng(0))

    @given(st.integers(min_value=0, max_value=1000))
    @settings(max_examples=25, deadline=None)
    def test_intervals_always_valid(self, seed):
        rng = np.random.default_rng(seed)
        rr = make_rr(140.0, 30.0, 50, rng)
        assert np.all(rr.intervals >= 0.2)
        assert np.all(rr.intervals <= 2.0)


class TestScaleFetal:
    def test_peak_hits_drawn_target(self):
        ts = TimeSeries(samples=np.sin(np.linspace(0, 20, 2000)), fs=250.0)
        scaled, target = scale_fetal(ts, np.random.default_rng(3))
        assert abs(np.max(np.abs(scaled.samples)) - target) <= 1e-9 * target

    def test_peak_cap_honored_over_seeds(self):
        ts = TimeSeries(samples=np.sin(np.linspace(0, 20, 2000)), fs=250.0)
        targets = [scale_fetal(ts, np.random.default_rng(s))[1] for s in range(1000)]
        assert max(targets) <= 20.0
        assert min(targets) >= 5.0

    def test_full_band_edge_case(self):
        ts = TimeSeries(samples=np.array([0.0, 1.0, 0.0] * 100), fs=250.0)
        scaled, _ = scale_fetal(ts, np.random.default_rng(0), band_uv=(20.0, 20.0))
        assert abs(np.max(np.abs(scaled.samples)) - 20.0) < 1e-12

    def test_zero_input_rejected(self):
        ts = TimeSeries(samples=np.zeros(500), fs=250.0)
        with pytest.raises(RejectedInput):
            scale_fetal(ts, np.random.default_rng(0))
