"""Seeded synthesis of membrane motion and homodyne detector output."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.signal import lfilter

from .errors import DomainError, PreconditionError
from .homodyne import VACUUM_VARIANCE, HomodyneConfig
from .interferometer import EfficiencyBudget, InterferometerConfig, shot_imprecision_psd
from .physics import CONSTANTS, MechanicalMode

_BLOCK = 1 << 20


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    sample_rate: float
    seed: int | None = None
    unit: str = "m"

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise DomainError("sample_rate must be positive")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def duration(self):
        return self.values.size / self.sample_rate

    @property
    def times(self):
        return np.arange(self.values.size) / self.sample_rate

    def __len__(self):
        return self.values.size


def n_samples(duration, rate):
    return int(round(duration * rate))


def oscillator_step(mode: MechanicalMode, dt):
    """Exact one-step propagator and noise covariance for (x, v).

    The noise covariance follows from stationarity, ``P - Phi P Phi^T``,
    with ``P`` the equipartition covariance.
    """
    wm, gamma = mode.omega_m, mode.damping_rate
    A = np.array([[0.0, 1.0], [-(wm**2), -gamma]])
    phi = expm(A * dt)
    P = stationary_covariance(mode)
    sigma = P - phi @ P @ phi.T
    return phi, 0.5 * (sigma + sigma.T)


def stationary_covariance(mode: MechanicalMode):
    kT = CONSTANTS.k_boltzmann * mode.temperature
    m = mode.effective_mass
    return np.diag([kT / (m * mode.omega_m**2), kT / m])


def _psd_sqrt(cov):
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0, None))


def synthesize_membrane_motion(mode: MechanicalMode, duration, rate, seed=0,
                               initial_state=None, return_velocity=False):
    """Thermally driven membrane displacement sampled at ``rate``.

    The state (x, v) is advanced with the exact discrete-time solution of the
    velocity-damped oscillator under white thermal force. Without an
    ``initial_state`` the start is drawn from the stationary distribution,
    so no burn-in is needed.
    """
    if rate <= 10 * mode.resonance_frequency:
        raise PreconditionError(
            f"sample rate {rate:g} Hz must exceed 10 f_res = {10 * mode.resonance_frequency:g} Hz"
        )
    n = n_samples(duration, rate)
    if n < 2:
        raise PreconditionError("duration too short for two samples")
    rng = np.random.default_rng(seed)
    phi, sigma = oscillator_step(mode, 1.0 / rate)
    if initial_state is None:
        s0 = _psd_sqrt(stationary_covariance(mode)) @ rng.standard_normal(2)
    else:
        s0 = np.asarray(initial_state, dtype=float).reshape(2)
        ringdown = mode.quality_factor / mode.resonance_frequency
        if duration < ringdown:
            warnings.warn(
                f"duration {duration:g} s is shorter than Q/f_res = {ringdown:g} s; "
                "statistics are not stationary",
                stacklevel=2,
            )

    lam, V = np.linalg.eig(phi)
    Vinv = np.linalg.inv(V)
    noise_sqrt = _psd_sqrt(sigma)
    out = np.empty((2, n))
    z = Vinv @ s0
    out[:, 0] = s0
    pos = 1
    while pos < n:
        m = min(_BLOCK, n - pos)
        xi = rng.standard_normal((2, m))
        # small-matrix products written out; np.matmul is slow for 2 x m
        w0 = noise_sqrt[0, 0] * xi[0] + noise_sqrt[0, 1] * xi[1]
        w1 = noise_sqrt[1, 0] * xi[0] + noise_sqrt[1, 1] * xi[1]
        zs = [
            lfilter([1.0], [1.0, -lam[k]], Vinv[k, 0] * w0 + Vinv[k, 1] * w1,
                    zi=[lam[k] * z[k]])[0]
            for k in range(2)
        ]
        for r in range(2):
            out[r, pos : pos + m] = (V[r, 0] * zs[0] + V[r, 1] * zs[1]).real
        z = np.array([zs[0][-1], zs[1][-1]])
        pos += m
    x = TimeSeries(out[0], rate, seed, "m")
    if return_velocity:
        return x, TimeSeries(out[1], rate, seed, "m/s")
    return x


def displacement_scale(config: InterferometerConfig, eff: EfficiencyBudget, rate):
    """Detector shot-noise units per metre of displacement.

    Chosen so a displacement PSD equal to the shot imprecision produces the
    same one-sided PSD as the vacuum noise, ``2 * VACUUM_VARIANCE / rate``.
    """
    s_imp = shot_imprecision_psd(0.0, config, eff)
    return float(np.sqrt(2 * VACUUM_VARIANCE / (s_imp * rate)))


def shot_noise_level(rate):
    """One-sided PSD of the per-sample vacuum noise (snu^2/Hz)."""
    return 2 * VACUUM_VARIANCE / rate


def synthesize_detector_output(x: TimeSeries, config: InterferometerConfig,
                               eff: EfficiencyBudget, cfg: HomodyneConfig, seed=0,
                               angles=None):
    """Homodyne output in shot-noise units for a displacement record ``x``.

    The membrane signal enters the amplitude quadrature only, so the output
    is ``cos(theta) * scale * x + vacuum``. ``angles`` optionally gives a
    per-sample readout angle (e.g. a scan) instead of ``cfg.angle``.
    """
    if x.unit != "m":
        raise DomainError(f"displacement record must be in metres, got {x.unit!r}")
    cfg.check_lo_dominance(config.carrier_leakage_power)
    rng = np.random.default_rng(seed)
    theta = cfg.angle if angles is None else np.asarray(angles, dtype=float)
    if np.ndim(theta) and np.shape(theta) != x.values.shape:
        raise PreconditionError("angles must match the record length")
    scale = displacement_scale(config, eff, x.sample_rate)
    shot = np.sqrt(VACUUM_VARIANCE) * rng.standard_normal(x.values.size)
    y = np.cos(theta) * scale * x.values + shot
    return TimeSeries(y, x.sample_rate, seed, "snu")


def white_noise(n, rate, seed=0, variance=VACUUM_VARIANCE, unit="snu"):
    rng = np.random.default_rng(seed)
    return TimeSeries(np.sqrt(variance) * rng.standard_normal(n), rate, seed, unit)
