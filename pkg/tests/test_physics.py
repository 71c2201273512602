import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from optotomo.errors import DomainError, UnsatisfiableError
from optotomo.physics import (
    CONSTANTS,
    MechanicalMode,
    MembraneOptics,
    PhysicalConstants,
    effective_mass,
    infer_thickness,
    max_reflectivity,
    mech_susceptibility,
    membrane_reflectivity,
    mode_shape_factor,
    sql_peak_asd,
    sql_psd,
    thermal_peak_psd,
    thermal_psd,
)

LAMBDA = 1064e-9
REF_MODE = MechanicalMode(133.88e3, 6e5, 80e-12, 300.0)


def transfer_matrix_reflectivity(n, t, lam):
    """Independent oracle: characteristic-matrix method for a single layer."""
    d = 2 * np.pi / lam * n * t
    M = np.array([[np.cos(d), 1j * np.sin(d) / n], [1j * n * np.sin(d), np.cos(d)]])
    B, C = M @ np.array([1.0, 1.0])
    return abs((B - C) / (B + C)) ** 2


def test_constants_positive():
    assert CONSTANTS.hbar > 0 and CONSTANTS.k_boltzmann > 0 and CONSTANTS.c_light > 0
    with pytest.raises(DomainError):
        PhysicalConstants(hbar=-1.0)


class TestReflectivity:
    def test_reference_membrane(self):
        R = membrane_reflectivity(2.2, 40e-9, LAMBDA)
        assert R == pytest.approx(0.158, abs=1e-3)
        assert abs(R - 0.17) <= 0.02

    def test_zero_thickness(self):
        assert membrane_reflectivity(2.2, 0.0, LAMBDA) == 0.0

    def test_half_wave_null(self):
        assert membrane_reflectivity(2.2, LAMBDA / (2 * 2.2), LAMBDA) == pytest.approx(0, abs=1e-25)

    @pytest.mark.parametrize("t", [5e-9, 30e-9, 40e-9, 120e-9, 333e-9])
    def test_matches_transfer_matrix(self, t):
        assert membrane_reflectivity(2.2, t, LAMBDA) == pytest.approx(
            transfer_matrix_reflectivity(2.2, t, LAMBDA), rel=1e-12
        )

    @pytest.mark.parametrize("args", [(1.0, 40e-9, LAMBDA), (2.2, -1e-9, LAMBDA),
                                      (2.2, 40e-9, 0.0), (np.nan, 40e-9, LAMBDA)])
    def test_domain_errors(self, args):
        with pytest.raises(DomainError):
            membrane_reflectivity(*args)

    @given(st.floats(0.0, 240e-9))
    def test_mirror_symmetry(self, t):
        n = 2.2
        half = LAMBDA / (2 * n)
        if t <= half:
            assert membrane_reflectivity(n, t, LAMBDA) == pytest.approx(
                membrane_reflectivity(n, LAMBDA / n - t, LAMBDA), abs=1e-12
            )

    @given(st.floats(0.0, 1e-6))
    def test_periodic_in_phase(self, t):
        n = 2.2
        period = LAMBDA / (2 * n)
        assert membrane_reflectivity(n, t, LAMBDA) == pytest.approx(
            membrane_reflectivity(n, t + period, LAMBDA), abs=1e-12
        )
        assert 0 <= membrane_reflectivity(n, t, LAMBDA) < 1


class TestInferThickness:
    def test_reference_value(self):
        t = infer_thickness(0.17, 2.2, LAMBDA)
        assert t == pytest.approx(41.96e-9, rel=1e-3)
        assert abs(t / 40e-9 - 1) < 0.10

    def test_round_trip_30nm(self):
        R = membrane_reflectivity(2.2, 30e-9, LAMBDA)
        assert infer_thickness(R, 2.2, LAMBDA) == pytest.approx(30e-9, rel=1e-12)

    def test_continuity_at_zero(self):
        assert infer_thickness(0.0, 2.2) == 0.0
        assert infer_thickness(1e-12, 2.2) < 1e-10

    def test_above_maximum(self):
        with pytest.raises(UnsatisfiableError):
            infer_thickness(max_reflectivity(2.2) + 1e-6, 2.2)

    def test_at_maximum_is_quarter_wave(self):
        assert infer_thickness(max_reflectivity(2.2), 2.2, LAMBDA) == pytest.approx(
            LAMBDA / (4 * 2.2), rel=1e-12
        )

    @settings(max_examples=60)
    @given(st.floats(1e-3, 0.9))
    def test_round_trip(self, frac):
        n = 2.2
        t = frac * LAMBDA / (4 * n)
        R = membrane_reflectivity(n, t, LAMBDA)
        assert infer_thickness(R, n, LAMBDA) == pytest.approx(t, rel=1e-12)


class TestMembraneTypes:
    def test_defaults_consistent(self):
        m = MembraneOptics()
        assert m.amplitude_reflectivity == pytest.approx(np.sqrt(0.17))

    def test_inconsistent_reflectivity_rejected(self):
        with pytest.raises(DomainError):
            MembraneOptics(power_reflectivity=0.5)

    @pytest.mark.parametrize("kw", [dict(quality_factor=1.0), dict(effective_mass=0.0),
                                    dict(resonance_frequency=-1.0), dict(temperature=-1.0)])
    def test_mode_invariants(self, kw):
        with pytest.raises(DomainError):
            MechanicalMode(**kw)


class TestEffectiveMass:
    def test_reference_value(self):
        m = effective_mass(MembraneOptics(side_length=1.5e-3, thickness=40e-9, density=3100.0))
        assert m == pytest.approx(69.75e-12, rel=1e-12)
        assert abs(m / 80e-12 - 1) < 0.25

    def test_zero_thickness(self):
        assert effective_mass(MembraneOptics(), thickness=0.0) == 0.0

    def test_mode_shape_factor_quadrature(self):
        n = 200  # 4e4 midpoint nodes
        x = (np.arange(n) + 0.5) / n
        X, Y = np.meshgrid(x, x)
        oracle = (np.sin(np.pi * X) ** 2 * np.sin(np.pi * Y) ** 2).mean()
        assert mode_shape_factor() == pytest.approx(oracle, abs=1e-6)


class TestSusceptibility:
    def test_dc_compliance(self):
        assert mech_susceptibility(0.0, REF_MODE) == pytest.approx(1.7665e-2, rel=1e-4)

    def test_resonance_magnitude(self):
        chi = mech_susceptibility(REF_MODE.resonance_frequency, REF_MODE)
        assert abs(chi) == pytest.approx(1.0599e4, rel=1e-4)

    def test_undamped_is_real(self):
        mode = MechanicalMode(quality_factor=np.inf)
        chi = mech_susceptibility(np.array([1e3, 50e3, 200e3]), mode)
        assert np.all(chi.imag == 0)

    def test_negative_frequency(self):
        with pytest.raises(DomainError):
            mech_susceptibility(-1.0, REF_MODE)


class TestThermal:
    def test_peak(self):
        S = thermal_psd(REF_MODE.resonance_frequency, REF_MODE)
        assert S == pytest.approx(2.0876e-22, rel=1e-4)
        assert S == pytest.approx(thermal_peak_psd(REF_MODE), rel=1e-12)
        assert np.sqrt(S) == pytest.approx(1.445e-11, rel=1e-3)

    @pytest.mark.parametrize("q", [100.0, 6e5])
    def test_equipartition_quadrature(self, q):
        mode = MechanicalMode(quality_factor=q)
        f0 = mode.resonance_frequency
        lw = f0 / q
        pts = [f0 - 10 * lw, f0 - lw, f0, f0 + lw, f0 + 10 * lw]
        total, _ = integrate.quad(lambda f: thermal_psd(f, mode), 0, 100 * f0,
                                  points=pts, limit=2000, epsabs=0, epsrel=1e-10)
        assert total == pytest.approx(7.3168e-23, rel=5e-3)

    def test_zero_temperature(self):
        mode = MechanicalMode(temperature=0.0)
        f = np.linspace(0, 1e6, 101)
        assert np.all(thermal_psd(f, mode) == 0)

    def test_structural_differs_off_resonance(self):
        mode = MechanicalMode(quality_factor=100)
        f0 = mode.resonance_frequency
        assert thermal_psd(f0, mode, "structural") == pytest.approx(thermal_psd(f0, mode), rel=1e-9)
        assert thermal_psd(0.2 * f0, mode, "structural") > 2 * thermal_psd(0.2 * f0, mode)

    @given(st.floats(0, 1e7))
    def test_non_negative(self, f):
        assert thermal_psd(f, REF_MODE) >= 0


class TestSQL:
    def test_peak_asd(self):
        assert sql_peak_asd(REF_MODE) == pytest.approx(1.4952e-15, rel=1e-4)
        assert np.sqrt(sql_psd(REF_MODE.resonance_frequency, REF_MODE)) == pytest.approx(
            sql_peak_asd(REF_MODE), rel=1e-9
        )
        ratio = sql_peak_asd(REF_MODE) / 1.9e-16
        assert abs(ratio / 8.2 - 1) < 0.10

    def test_free_mass_rolloff(self):
        f = 1e9
        free = 2 * CONSTANTS.hbar / (REF_MODE.effective_mass * (2 * np.pi * f) ** 2)
        assert sql_psd(f, REF_MODE) == pytest.approx(free, rel=1e-6)

    def test_consistent_with_susceptibility(self):
        f = np.linspace(0, 1e6, 1000)
        lhs = (sql_psd(f, REF_MODE) / (2 * CONSTANTS.hbar)) ** 2
        rhs = np.abs(mech_susceptibility(f, REF_MODE)) ** 2
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)

    def test_maximum_location(self):
        mode = MechanicalMode(quality_factor=5.0)
        f = np.linspace(100e3, 160e3, 600001)
        f_peak = f[np.argmax(sql_psd(f, mode))]
        expected = mode.resonance_frequency * np.sqrt(1 - 1 / (2 * 5.0**2))
        assert abs(f_peak - expected) <= f[1] - f[0]


def test_pure_functions_bit_identical():
    f = np.linspace(0, 1e6, 257)
    assert np.array_equal(thermal_psd(f, REF_MODE), thermal_psd(f, REF_MODE))
    assert membrane_reflectivity(2.2, 40e-9) == membrane_reflectivity(2.2, 40e-9)
