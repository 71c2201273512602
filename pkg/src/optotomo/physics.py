"""Membrane optics and mechanical-mode physics.

All spectral densities are one-sided and expressed per Hz; functions take
ordinary frequency ``f`` in Hz and convert to angular frequency internally.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants as _sc
from scipy.optimize import brentq

from .errors import DomainError, UnsatisfiableError


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA values used throughout. Not meant to be overridden."""

    hbar: float = _sc.hbar
    k_boltzmann: float = _sc.k
    c_light: float = _sc.c

    def __post_init__(self):
        for name in ("hbar", "k_boltzmann", "c_light"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


CONSTANTS = PhysicalConstants()

#: SiN mass density assumed when none is given (kg/m^3).
SIN_DENSITY = 3100.0
#: Wavelength of the Nd:YAG laser (m).
WAVELENGTH = 1064e-9


def _finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return arr


def _slab_phase(n, t, wavelength):
    return n * (2 * np.pi / wavelength) * t


def _slab_reflectivity_from_phase(n, phi):
    r1 = (1 - n) / (1 + n)
    e = np.exp(2j * phi)
    r = r1 * (1 - e) / (1 - r1**2 * e)
    return np.abs(r) ** 2


def membrane_reflectivity(n, t, wavelength=WAVELENGTH):
    """Power reflectivity of a lossless dielectric slab at normal incidence.

    The slab is treated as a Fabry-Perot etalon of index ``n`` and
    thickness ``t`` in vacuum.
    """
    n = float(_finite("n", n))
    wavelength = float(_finite("wavelength", wavelength))
    t = _finite("t", t)
    if n <= 1:
        raise DomainError(f"refractive index must exceed 1, got {n}")
    if wavelength <= 0:
        raise DomainError("wavelength must be positive")
    if np.any(t < 0):
        raise DomainError("thickness must be non-negative")
    R = _slab_reflectivity_from_phase(n, _slab_phase(n, t, wavelength))
    return float(R) if R.ndim == 0 else R


def max_reflectivity(n):
    """Largest reflectivity a slab of index ``n`` reaches (quarter-wave thickness)."""
    r1 = (1 - n) / (1 + n)
    return 4 * r1**2 / (1 + r1**2) ** 2


def infer_thickness(R, n, wavelength=WAVELENGTH):
    """Smallest slab thickness that reflects a power fraction ``R``."""
    R = float(_finite("R", R))
    n = float(_finite("n", n))
    wavelength = float(_finite("wavelength", wavelength))
    if n <= 1:
        raise DomainError(f"refractive index must exceed 1, got {n}")
    if wavelength <= 0:
        raise DomainError("wavelength must be positive")
    if R <= 0:
        if R == 0:
            return 0.0
        raise DomainError("reflectivity must be non-negative")
    r_max = max_reflectivity(n)
    if R > r_max:
        raise UnsatisfiableError(
            f"R={R} exceeds the maximum {r_max:.6f} reachable with n={n}"
        )
    # R(phi) rises monotonically on (0, pi/2]
    if R == r_max:
        phi = np.pi / 2
    else:
        phi = brentq(
            lambda p: _slab_reflectivity_from_phase(n, p) - R,
            0.0,
            np.pi / 2,
            xtol=1e-300,
            rtol=4 * np.finfo(float).eps,
            maxiter=500,
        )
    return phi * wavelength / (2 * np.pi * n)


@dataclass(frozen=True)
class MembraneOptics:
    refractive_index: float = 2.2
    thickness: float = 40e-9
    side_length: float = 1.5e-3
    density: float = SIN_DENSITY
    power_reflectivity: float = 0.17
    wavelength: float = WAVELENGTH
    reflectivity_tolerance: float = 0.02

    def __post_init__(self):
        if not self.refractive_index > 1:
            raise DomainError("refractive_index must exceed 1")
        if not self.thickness > 0:
            raise DomainError("thickness must be positive")
        if not self.side_length > 0:
            raise DomainError("side_length must be positive")
        if not self.density > 0:
            raise DomainError("density must be positive")
        if not 0 <= self.power_reflectivity < 1:
            raise DomainError("power_reflectivity must lie in [0, 1)")
        model = membrane_reflectivity(self.refractive_index, self.thickness, self.wavelength)
        if abs(model - self.power_reflectivity) > self.reflectivity_tolerance:
            raise DomainError(
                f"power_reflectivity {self.power_reflectivity} inconsistent with slab model "
                f"value {model:.4f} (tolerance {self.reflectivity_tolerance})"
            )

    @property
    def amplitude_reflectivity(self):
        return float(np.sqrt(self.power_reflectivity))


@dataclass(frozen=True)
class MechanicalMode:
    resonance_frequency: float = 133.88e3
    quality_factor: float = 6e5
    effective_mass: float = 80e-12
    temperature: float = 300.0

    def __post_init__(self):
        if not self.resonance_frequency > 0:
            raise DomainError("resonance_frequency must be positive")
        if not self.quality_factor > 1:
            raise DomainError("quality_factor must exceed 1")
        if not self.effective_mass > 0:
            raise DomainError("effective_mass must be positive")
        # T = 0 is accepted as the noiseless limit
        if not self.temperature >= 0:
            raise DomainError("temperature must be non-negative")

    @property
    def omega_m(self):
        return 2 * np.pi * self.resonance_frequency

    @property
    def damping_rate(self):
        """Velocity damping rate gamma = Omega_m / Q in rad/s."""
        return self.omega_m / self.quality_factor

    @property
    def thermal_variance(self):
        """Equipartition displacement variance k_B T / (m Omega_m^2)."""
        return CONSTANTS.k_boltzmann * self.temperature / (self.effective_mass * self.omega_m**2)


def mode_shape_factor():
    """Modal-to-physical mass ratio of the (1,1) mode of a square membrane."""
    # integral of sin^2(pi x) sin^2(pi y) over the unit square
    return 0.25


def effective_mass(membrane: MembraneOptics, thickness=None):
    """Modal mass rho * L^2 * t / 4 of the fundamental drum mode."""
    t = membrane.thickness if thickness is None else thickness
    return membrane.density * membrane.side_length**2 * t * mode_shape_factor()


def _check_freq(f):
    f = _finite("f", f)
    if np.any(f < 0):
        raise DomainError("frequency must be non-negative")
    return f


def _scalar_or_array(a):
    return a.item() if np.ndim(a) == 0 else a


def mech_susceptibility(f, mode: MechanicalMode, damping="velocity"):
    """Displacement response per unit force, in m/N.

    ``damping`` selects viscous (``"velocity"``) or hysteretic
    (``"structural"``) loss; the latter uses a frequency-independent loss
    angle 1/Q.
    """
    f = _check_freq(f)
    w = 2 * np.pi * f
    wm = mode.omega_m
    q = mode.quality_factor
    if damping == "velocity":
        loss = w * wm / q
    elif damping == "structural":
        loss = wm**2 / q * np.ones_like(w)
    else:
        raise DomainError(f"unknown damping model {damping!r}")
    chi = 1.0 / (mode.effective_mass * (wm**2 - w**2 + 1j * loss))
    return _scalar_or_array(chi)


def thermal_psd(f, mode: MechanicalMode, damping="velocity"):
    """One-sided thermal displacement PSD in m^2/Hz (fluctuation-dissipation)."""
    f = _check_freq(f)
    w = 2 * np.pi * f
    wm = mode.omega_m
    q = mode.quality_factor
    kT = CONSTANTS.k_boltzmann * mode.temperature
    m = mode.effective_mass
    if damping == "velocity":
        gamma = wm / q
        S = 4 * kT * gamma / (m * ((wm**2 - w**2) ** 2 + (w * gamma) ** 2))
    elif damping == "structural":
        phi = 1.0 / q
        with np.errstate(divide="ignore"):
            S = 4 * kT * wm**2 * phi / (m * w * ((wm**2 - w**2) ** 2 + (wm**2 * phi) ** 2))
    else:
        raise DomainError(f"unknown damping model {damping!r}")
    return _scalar_or_array(S)


def sql_psd(f, mode: MechanicalMode):
    """Standard quantum limit 2*hbar*|chi| in m^2/Hz."""
    chi = np.abs(mech_susceptibility(f, mode))
    return _scalar_or_array(2 * CONSTANTS.hbar * chi)


def sql_peak_asd(mode: MechanicalMode):
    """Peak SQL amplitude spectral density, sqrt(2 hbar Q / (m Omega_m^2))."""
    return float(np.sqrt(2 * CONSTANTS.hbar * mode.quality_factor
                         / (mode.effective_mass * mode.omega_m**2)))


def thermal_peak_psd(mode: MechanicalMode):
    """Thermal PSD at f_res: 4 k_B T Q / (m Omega_m^3)."""
    return (4 * CONSTANTS.k_boltzmann * mode.temperature * mode.quality_factor
            / (mode.effective_mass * mode.omega_m**3))
