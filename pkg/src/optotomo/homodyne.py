"""Balanced homodyne readout, phase-lock error signal and Gaussian tomography.

Quadratures are in shot-noise units where the vacuum variance is 1/2.
Converting a variance ratio ``V / 0.5`` to dB gives the noise power relative
to shot noise as displayed on a spectrum analyzer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    LODominanceError,
    PhysicalityError,
    PreconditionError,
    ReconstructionError,
)

VACUUM_VARIANCE = 0.5
#: LO power must exceed the signal power by this factor for the linear readout.
LO_DOMINANCE = 20.0


@dataclass(frozen=True)
class HomodyneConfig:
    angle: float = 0.0
    lo_amplitude: float = float(np.sqrt(12e-3))
    pm_frequency: float = 10e6
    lock_target: float = 0.0

    def __post_init__(self):
        if not self.lo_amplitude > 0:
            raise DomainError("lo_amplitude must be positive")
        if not self.pm_frequency > 0:
            raise DomainError("pm_frequency must be positive")

    @classmethod
    def from_lo_power(cls, lo_power, **kw):
        return cls(lo_amplitude=float(np.sqrt(lo_power)), **kw)

    @property
    def lo_power(self):
        return self.lo_amplitude**2

    def with_angle(self, angle):
        return HomodyneConfig(angle, self.lo_amplitude, self.pm_frequency, self.lock_target)

    def check_lo_dominance(self, signal_power):
        if self.lo_power < LO_DOMINANCE * signal_power:
            raise LODominanceError(
                f"LO power {self.lo_power:.3e} W is below {LO_DOMINANCE:g}x the "
                f"signal power {signal_power:.3e} W"
            )


@dataclass(frozen=True)
class QuadratureSamples:
    angle: float
    values: np.ndarray
    sample_rate: float = 1.0
    seed: int | None = None
    unit: str = field(default="snu", init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(vals)):
            raise DomainError("quadrature samples must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    covariance: np.ndarray = field(default_factory=lambda: VACUUM_VARIANCE * np.eye(2))

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(2)
        cov = np.asarray(self.covariance, dtype=float).reshape(2, 2)
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise DomainError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise PhysicalityError("covariance is not positive-definite", raw_fit=cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def vacuum(cls):
        return cls()

    @property
    def determinant(self):
        return float(np.linalg.det(self.covariance))

    def is_physical(self, tol=0.0):
        """Uncertainty relation det(V) >= 1/4 in shot-noise units."""
        return self.determinant >= 0.25 - tol

    def sample(self, theta, n, rng):
        """Draw ``n`` homodyne outcomes at angle ``theta``."""
        c, s = np.cos(theta), np.sin(theta)
        mu = c * self.mean[0] + s * self.mean[1]
        return mu + np.sqrt(variance_vs_theta(self, theta)) * rng.standard_normal(n)


def quadrature_readout(x1, x2, cfg: HomodyneConfig, signal_power=0.0):
    """Difference photocurrent of a balanced homodyne detector.

    ``x1`` and ``x2`` are amplitude and phase quadrature records (arrays or
    :class:`QuadratureSamples`). The LO amplitude scale is divided out, so
    the result is ``cos(theta) X1 + sin(theta) X2``.
    """
    cfg.check_lo_dominance(signal_power)
    rate = 1.0
    seed = None
    if isinstance(x1, QuadratureSamples):
        rate, seed = x1.sample_rate, x1.seed
        if isinstance(x2, QuadratureSamples) and x2.sample_rate != x1.sample_rate:
            raise PreconditionError("quadrature records have different sample rates")
    a = np.asarray(getattr(x1, "values", x1), dtype=float)
    b = np.asarray(getattr(x2, "values", x2), dtype=float)
    if a.shape != b.shape:
        raise PreconditionError("quadrature records differ in length")
    th = cfg.angle
    return QuadratureSamples(th, np.cos(th) * a + np.sin(th) * b, rate, seed)


def theta_scan_power(theta, shot_power, membrane_power):
    """Noise power at readout angle ``theta``; membrane signal sits in X1."""
    if np.any(np.asarray(shot_power) < 0) or np.any(np.asarray(membrane_power) < 0):
        raise DomainError("powers must be non-negative")
    return shot_power + membrane_power * np.cos(theta) ** 2


def pm_lock_error_signal(theta, cfg: HomodyneConfig, gain=1.0):
    """Demodulated phase-modulation error signal, idealized as a sine.

    The slope at the lock point is ``gain * lo_amplitude`` and positive, so
    ``lock_target + pi`` is the unstable zero crossing.
    """
    if not gain > 0:
        raise DomainError("gain must be positive")
    return gain * cfg.lo_amplitude * np.sin(np.asarray(theta) - cfg.lock_target)


def variance_vs_theta(state: GaussianState, theta):
    v = state.covariance
    c, s = np.cos(theta), np.sin(theta)
    return v[0, 0] * c**2 + v[1, 1] * s**2 + 2 * v[0, 1] * s * c


def _design_matrix(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.column_stack([c**2, s**2, 2 * s * c])


def _distinct_mod_pi(theta, tol=1e-9):
    t = np.sort(np.mod(theta, np.pi))
    if t.size == 0:
        return 0
    gaps = np.diff(np.concatenate([t, [t[0] + np.pi]]))
    return int(np.sum(gaps > tol)) if t.size > 1 else 1


def reconstruct_covariance(scan, uncertainty_tol=None):
    """Least-squares covariance from (theta, variance) pairs.

    Raises :class:`ReconstructionError` for fewer than three distinct angles
    modulo pi and :class:`PhysicalityError` when the fit is not
    positive-definite. With ``uncertainty_tol`` set, a determinant below
    ``1/4 - uncertainty_tol`` is also rejected.
    """
    scan = list(scan)
    if not scan:
        raise ReconstructionError("empty scan")
    theta = np.array([s[0] for s in scan], dtype=float)
    var = np.array([s[1] for s in scan], dtype=float)
    if np.any(var <= 0) or not np.all(np.isfinite(var)):
        raise DomainError("measured variances must be positive and finite")
    if _distinct_mod_pi(theta) < 3:
        raise ReconstructionError("need at least three distinct angles modulo pi")
    A = _design_matrix(theta)
    if np.linalg.matrix_rank(A) < 3:
        raise ReconstructionError("rank-deficient angle set")
    (v11, v22, v12), *_ = np.linalg.lstsq(A, var, rcond=None)
    raw = np.array([[v11, v12], [v12, v22]])
    if np.linalg.eigvalsh(raw).min() <= 0:
        raise PhysicalityError("fitted covariance is not positive-definite", raw_fit=raw)
    state = GaussianState(np.zeros(2), raw)
    if uncertainty_tol is not None and not state.is_physical(uncertainty_tol):
        raise PhysicalityError(
            f"det(V) = {state.determinant:.4f} violates the uncertainty relation", raw_fit=raw
        )
    return state


def covariance_standard_errors(thetas, state: GaussianState, n_samples):
    """Standard errors of (V11, V22, V12) from sample variances of Gaussian draws.

    Uses var(sample variance) = 2 V^2 / (n - 1) propagated through the
    least-squares design.
    """
    thetas = np.asarray(thetas, dtype=float)
    A = _design_matrix(thetas)
    v = variance_vs_theta(state, thetas)
    w = 2 * v**2 / (n_samples - 1)
    pinv = np.linalg.pinv(A)
    cov = pinv @ np.diag(w) @ pinv.T
    return np.sqrt(np.diag(cov))
