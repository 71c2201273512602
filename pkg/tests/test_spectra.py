import numpy as np
import pytest

from optotomo.errors import CalibrationError, DomainError, DynamicRangeError, PreconditionError
from optotomo.homodyne import HomodyneConfig
from optotomo.interferometer import EfficiencyBudget, InterferometerConfig
from optotomo.physics import MechanicalMode, thermal_peak_psd, thermal_psd
from optotomo.spectra import (
    CalibrationMarker,
    FlatResponse,
    SecondOrderLowPass,
    SpectralDensity,
    apply_transfer,
    calibrate_displacement,
    detector_transfer_normalize,
    expected_welch,
    flatness,
    inject_marker,
    marker_power,
    welch_psd,
    zero_span_power,
)
from optotomo.timeseries import (
    TimeSeries,
    synthesize_detector_output,
    synthesize_membrane_motion,
    white_noise,
)

RATE = 2e6


def sine(freq, amp, n, rate=RATE, phase=0.3):
    t = np.arange(n) / rate
    return amp * np.sin(2 * np.pi * freq * t + phase)


class TestWelch:
    def test_white_noise_level(self):
        sigma2 = 0.5
        psd = welch_psd(white_noise(2_000_000, RATE, seed=1, variance=sigma2), 10e3)
        assert psd.band_mean(10e3, 990e3) == pytest.approx(2 * sigma2 / RATE, rel=0.05)

    def test_rbw_and_averages(self):
        psd = welch_psd(white_noise(1_000_000, RATE), 10e3)
        assert psd.rbw == pytest.approx(10e3, rel=1e-3)
        assert psd.averages == (1_000_000 - 300) // 150 + 1

    def test_sine_power(self):
        a = 2.5e-12
        ts = TimeSeries(sine(125_000.0, a, 1_000_000), RATE)
        psd = welch_psd(ts, 1e3)
        assert psd.integrate(120e3, 130e3) == pytest.approx(a**2 / 2, rel=0.02)

    def test_offset_does_not_leak(self):
        noise = white_noise(200_000, RATE).values
        a = welch_psd(TimeSeries(noise, RATE, unit="snu"), 10e3)
        b = welch_psd(TimeSeries(3.0 + noise, RATE, unit="snu"), 10e3)
        np.testing.assert_allclose(b.values, a.values, rtol=1e-6, atol=1e-9 * a.values.max())

    def test_parseval(self):
        ts = white_noise(1_000_000, RATE, seed=3, variance=2.0)
        psd = welch_psd(ts, 5e3)
        assert psd.integrate() == pytest.approx(ts.values.var(), rel=0.01)

    def test_rbw_too_fine(self):
        ts = white_noise(1000, RATE)  # 0.5 ms record
        with pytest.raises(PreconditionError):
            welch_psd(ts, 1e3)

    def test_unit_propagates(self):
        ts = TimeSeries(np.zeros(10_000) + white_noise(10_000, RATE).values, RATE, unit="m")
        assert welch_psd(ts, 100e3).unit == "m^2/Hz"

    def test_csv_header(self):
        psd = welch_psd(white_noise(10_000, RATE), 100e3)
        head = psd.to_csv().splitlines()[0]
        assert head == "frequency_hz,psd_value,unit,rbw_hz,averages"

    def test_negative_values_rejected(self):
        with pytest.raises(DomainError):
            SpectralDensity(np.arange(3.0), np.array([1.0, -1.0, 0.0]), "x", 1.0, 1)


def test_expected_welch_tracks_narrow_peak():
    mode = MechanicalMode(quality_factor=100)
    f = np.array([mode.resonance_frequency])
    smoothed = expected_welch(lambda q: thermal_psd(q, mode), f, RATE, 10e3)
    # 10 kHz RBW against a 1.3 kHz line: peak falls well below the model value
    assert smoothed[0] < 0.5 * thermal_peak_psd(mode)
    flat = expected_welch(lambda q: np.ones_like(q), f, RATE, 10e3)
    assert flat[0] == pytest.approx(1.0, rel=1e-12)


class TestZeroSpan:
    fc, rbw, amp = 125e3, 10e3, 0.2
    seg = 0.02

    def scan(self, amp, seed=1, n_seg=40):
        n_per = int(self.seg * RATE)
        theta = np.repeat(np.linspace(0, 2 * np.pi, n_seg, endpoint=False), n_per)
        carrier = sine(self.fc, amp, theta.size)
        noise = white_noise(theta.size, RATE, seed=seed).values
        ts = TimeSeries(np.cos(theta) * carrier + noise, RATE, unit="snu")
        t, p = zero_span_power(ts, self.fc, self.rbw, self.seg)
        return theta[:: n_per], p

    def test_two_periods_over_full_turn(self):
        theta, p = self.scan(self.amp)
        spec = np.abs(np.fft.rfft(p - p.mean()))
        assert np.argmax(spec) == 2

    def test_minimum_is_shot_floor(self):
        theta, p = self.scan(self.amp)
        floor = 2 * 0.5 / RATE * self.rbw  # white level times band
        quiet = p[np.isclose(np.cos(theta) ** 2, 0, atol=0.02)]
        assert quiet.size and np.all(np.abs(quiet / floor - 1) < 0.2)

    @staticmethod
    def cos2_amplitude(theta, p):
        design = np.column_stack([np.ones_like(theta), np.cos(theta) ** 2])
        return np.linalg.lstsq(design, p, rcond=None)[0][1]

    def test_quadratic_in_amplitude(self):
        a1 = self.cos2_amplitude(*self.scan(self.amp, seed=1))
        a2 = self.cos2_amplitude(*self.scan(2 * self.amp, seed=2))
        assert a2 / a1 == pytest.approx(4.0, rel=0.05)

    def test_segment_too_long(self):
        with pytest.raises(PreconditionError):
            zero_span_power(white_noise(1000, RATE), self.fc, self.rbw, 1.0)


class TestCalibration:
    ifo = InterferometerConfig()
    eff = EfficiencyBudget()
    marker = CalibrationMarker(128e3, 1e-12)

    @pytest.fixture(scope="class")
    @classmethod
    def calibrated(cls):
        mode = MechanicalMode()
        x = inject_marker(synthesize_membrane_motion(mode, 0.5, 4e6, seed=11), cls.marker)
        y = synthesize_detector_output(x, cls.ifo, cls.eff, HomodyneConfig(), seed=12)
        return calibrate_displacement(welch_psd(y, 1e3), cls.marker)

    def test_floor_matches_reference_sensitivity(self, calibrated):
        asd = np.sqrt(calibrated.band_mean(150e3, 400e3))
        assert abs(asd / 1.9e-16 - 1) < 0.10

    def test_thermal_peak_against_windowed_model(self, calibrated):
        mode = MechanicalMode()
        f0 = mode.resonance_frequency
        k = np.argmin(np.abs(calibrated.frequencies - f0))
        model = expected_welch(lambda q: thermal_psd(q, mode), calibrated.frequencies[k], 4e6, 1e3)
        assert calibrated.values[k] == pytest.approx(model, rel=0.15)

    def test_marker_scaling_self_consistent(self):
        psd = welch_psd(TimeSeries(sine(128e3, 1.0, 1_000_000) + white_noise(1_000_000, RATE).values,
                                   RATE, unit="snu"), 1e3)
        for a in (1e-12, 3e-11):
            cal = calibrate_displacement(psd, CalibrationMarker(128e3, a))
            assert marker_power(cal, 128e3) == pytest.approx(a**2 / 2, rel=1e-9)

    def test_missing_marker(self):
        psd = welch_psd(white_noise(1_000_000, RATE), 1e3)
        with pytest.raises(CalibrationError):
            calibrate_displacement(psd, self.marker)


class TestTransfer:
    def test_identity(self):
        ts = white_noise(4096, RATE, seed=2)
        out = apply_transfer(ts, FlatResponse())
        np.testing.assert_allclose(out.values, ts.values, atol=1e-14)
        psd = welch_psd(ts, 50e3)
        np.testing.assert_array_equal(detector_transfer_normalize(psd, FlatResponse()).values, psd.values)

    def test_round_trip_flat(self):
        rate, corner = 10e6, 2.5e6
        H = SecondOrderLowPass(corner)
        ts = apply_transfer(white_noise(4_000_000, rate, seed=5), H)
        psd = detector_transfer_normalize(welch_psd(ts, 20e3), H)
        assert flatness(psd, 50e3, 0.8 * corner, 2 * 0.5 / rate) < 0.05

    def test_corner_response(self):
        H = SecondOrderLowPass(25e6)
        assert abs(H(25e6)) ** 2 == pytest.approx(0.5, rel=1e-12)
        assert abs(H(0.0)) == 1.0

    def test_dynamic_range(self):
        f = np.linspace(0, 5e9, 11)
        psd = SpectralDensity(f, np.ones_like(f), "snu^2/Hz", 1.0, 1)
        with pytest.raises(DynamicRangeError) as info:
            detector_transfer_normalize(psd, SecondOrderLowPass(1e6))
        assert info.value.bins == list(range(1, 11))
