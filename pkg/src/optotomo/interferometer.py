"""Michelson-Sagnac signal transfer and shot-noise imprecision.

Convention: a membrane displacement ``x`` shifts the Michelson-mode phase by
``2 k r_m x``. At the dark port this becomes an amplitude-quadrature
sideband; with total detection efficiency ``eta`` the displacement-referred
shot noise is ``hbar*omega_L / (2 eta P_in) / (2 k r_m)^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .physics import CONSTANTS, WAVELENGTH, MechanicalMode, _check_freq, thermal_psd


@dataclass(frozen=True)
class InterferometerConfig:
    wavelength: float = WAVELENGTH
    input_power: float = 0.2
    lo_power: float = 12e-3
    membrane_amplitude_reflectivity: float = float(np.sqrt(0.17))
    dark_port_contrast_defect: float = 1e-3

    def __post_init__(self):
        if not self.wavelength > 0:
            raise DomainError("wavelength must be positive")
        if not self.input_power > 0:
            raise DomainError("input_power must be positive")
        if not self.lo_power > 0:
            raise DomainError("lo_power must be positive")
        if not 0 < self.membrane_amplitude_reflectivity < 1:
            raise DomainError("membrane amplitude reflectivity must lie in (0, 1)")
        if not 0 <= self.dark_port_contrast_defect < 1:
            raise DomainError("dark_port_contrast_defect must lie in [0, 1)")

    @property
    def wavenumber(self):
        return 2 * np.pi / self.wavelength

    @property
    def laser_angular_frequency(self):
        return 2 * np.pi * CONSTANTS.c_light / self.wavelength

    @property
    def photon_energy(self):
        return CONSTANTS.hbar * self.laser_angular_frequency

    @property
    def carrier_leakage_power(self):
        """Carrier power leaking through the dark port (W). Adds no noise."""
        return self.dark_port_contrast_defect * self.input_power

    def with_power(self, input_power):
        return InterferometerConfig(
            wavelength=self.wavelength,
            input_power=input_power,
            lo_power=self.lo_power,
            membrane_amplitude_reflectivity=self.membrane_amplitude_reflectivity,
            dark_port_contrast_defect=self.dark_port_contrast_defect,
        )


@dataclass(frozen=True)
class EfficiencyBudget:
    detector_quantum_efficiency: float = 0.7
    optical_path_efficiency: float = 0.5 / 0.7

    def __post_init__(self):
        for name in ("detector_quantum_efficiency", "optical_path_efficiency"):
            v = getattr(self, name)
            if not (np.isfinite(v) and 0 < v <= 1):
                raise DomainError(f"{name} must lie in (0, 1], got {v}")

    @property
    def total(self):
        return self.detector_quantum_efficiency * self.optical_path_efficiency


def overall_efficiency(qe, optics):
    return EfficiencyBudget(detector_quantum_efficiency=qe, optical_path_efficiency=optics)


def displacement_to_output_gain(config: InterferometerConfig):
    """Dark-port sideband amplitude per metre of displacement.

    Returns ``2 k r_m sqrt(P_in / (hbar omega_L))`` in sqrt(photons/s)/m, so
    that ``G * x`` is the signal amplitude in units where a photon flux is
    its square. The shot-limited displacement PSD is ``1 / (2 eta G^2)``.
    """
    k = config.wavenumber
    flux = config.input_power / config.photon_energy
    return 2 * k * config.membrane_amplitude_reflectivity * np.sqrt(flux)


def shot_imprecision_psd(f, config: InterferometerConfig, eff: EfficiencyBudget):
    """Frequency-flat displacement-referred shot noise in m^2/Hz."""
    f = _check_freq(f)
    gain = 2 * config.wavenumber * config.membrane_amplitude_reflectivity
    level = config.photon_energy / (2 * eff.total * config.input_power) / gain**2
    out = np.full(np.shape(f), level)
    return float(out) if out.ndim == 0 else out


def shot_imprecision_asd(config: InterferometerConfig, eff: EfficiencyBudget):
    return float(np.sqrt(shot_imprecision_psd(0.0, config, eff)))


def total_readout_psd(f, mode: MechanicalMode, config: InterferometerConfig,
                      eff: EfficiencyBudget, dark_noise_psd=0.0):
    """Uncorrelated sum of thermal motion, shot imprecision and dark noise."""
    f = _check_freq(f)
    if np.any(np.asarray(dark_noise_psd) < 0):
        raise DomainError("dark_noise_psd must be non-negative")
    total = thermal_psd(f, mode) + shot_imprecision_psd(f, config, eff) + dark_noise_psd
    return float(total) if np.ndim(total) == 0 else total
