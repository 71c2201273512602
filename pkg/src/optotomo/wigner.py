"""Wigner-function reconstruction from quadrature histograms.

The marginal of W along angle theta is the probability density of the
homodyne outcome X_theta, so W is recovered by the inverse Radon transform
(filtered back-projection with a band-limited ramp filter).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from .errors import CoverageError, DataError, DomainError

MIN_ANGLES = 8


def worker_count():
    """Worker cap from ``OPTO_TOMO_THREADS`` (default: 1)."""
    raw = os.environ.get("OPTO_TOMO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class QuadratureHistogram:
    angle: float
    edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        counts = np.asarray(self.counts, dtype=float)
        if edges.ndim != 1 or counts.shape != (edges.size - 1,):
            raise DataError("histogram needs len(edges) == len(counts) + 1")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def bin_width(self):
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def density(self):
        total = self.counts.sum()
        if total <= 0:
            raise DataError(f"empty histogram at angle {self.angle:.4f}")
        return self.counts / (total * self.bin_width)


def histogram_samples(angle, values, bin_width, extent):
    """Histogram samples on bins of width ``bin_width`` centred on zero,
    covering ``[-extent, extent]``."""
    half = int(np.ceil(extent / bin_width - 0.5))
    edges = (np.arange(-half, half + 2) - 0.5) * bin_width
    counts, _ = np.histogram(values, bins=edges)
    return QuadratureHistogram(angle, edges, counts)


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Square grid of ``n_points`` per axis spanning ``[-extent, extent]``."""

    extent: float
    n_points: int

    def __post_init__(self):
        if not self.extent > 0 or self.n_points < 3:
            raise DomainError("grid needs a positive extent and at least 3 points")

    @property
    def axis(self):
        return np.linspace(-self.extent, self.extent, self.n_points)

    @property
    def spacing(self):
        return 2 * self.extent / (self.n_points - 1)


@dataclass(frozen=True)
class WignerMap:
    grid: PhaseSpaceGrid
    values: np.ndarray  # indexed [i_x2, i_x1]

    @property
    def normalization(self):
        return float(self.values.sum() * self.grid.spacing**2)

    def moments(self):
        """Mean vector and covariance from first and second moments."""
        x = self.grid.axis
        X1, X2 = np.meshgrid(x, x)
        w = self.values / self.values.sum()
        m1, m2 = (w * X1).sum(), (w * X2).sum()
        c11 = (w * (X1 - m1) ** 2).sum()
        c22 = (w * (X2 - m2) ** 2).sum()
        c12 = (w * (X1 - m1) * (X2 - m2)).sum()
        return np.array([m1, m2]), np.array([[c11, c12], [c12, c22]])

    def peak_location(self):
        i2, i1 = np.unravel_index(np.argmax(self.values), self.values.shape)
        x = self.grid.axis
        return np.array([x[i1], x[i2]])

    def fit_gaussian(self):
        """Least-squares fit of an elliptical Gaussian; returns (mean, covariance)."""
        from scipy.optimize import least_squares

        x = self.grid.axis
        X1, X2 = np.meshgrid(x, x)
        mean0, cov0 = self.moments()
        cov0 = cov0 if np.linalg.eigvalsh(cov0).min() > 0 else np.eye(2) * 0.5

        def model(p):
            a, m1, m2, l11, l21, l22 = p
            L = np.array([[l11, 0.0], [l21, l22]])
            cov = L @ L.T
            inv = np.linalg.inv(cov)
            d1, d2 = X1 - m1, X2 - m2
            q = inv[0, 0] * d1**2 + 2 * inv[0, 1] * d1 * d2 + inv[1, 1] * d2**2
            return a * np.exp(-0.5 * q)

        L0 = np.linalg.cholesky(cov0)
        p0 = [self.values.max(), mean0[0], mean0[1], L0[0, 0], L0[1, 0], L0[1, 1]]
        res = least_squares(lambda p: (model(p) - self.values).ravel(), p0)
        _, m1, m2, l11, l21, l22 = res.x
        L = np.array([[l11, 0.0], [l21, l22]])
        return np.array([m1, m2]), L @ L.T

    def angular_profile_asymmetry(self, n_radii=20, n_angles=36):
        """Largest spread of angular averages on rings, relative to the peak."""
        from scipy.interpolate import RegularGridInterpolator

        x = self.grid.axis
        interp = RegularGridInterpolator((x, x), self.values)
        phis = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
        radii = np.linspace(0, 0.7 * self.grid.extent, n_radii)
        peak = self.values.max()
        worst = 0.0
        sector = n_angles // 4
        for r in radii:
            pts = np.column_stack([r * np.sin(phis), r * np.cos(phis)])
            ring = interp(pts)
            # averages over quarter-ring sectors
            avgs = ring.reshape(4, sector).mean(axis=1)
            worst = max(worst, (avgs.max() - avgs.min()) / peak)
        return worst


def _ramp_kernel(n, spacing):
    """Spatial Ram-Lak kernel sampled at ``spacing`` for lags -n..n."""
    lags = np.arange(-n, n + 1)
    h = np.zeros(lags.size)
    h[lags == 0] = 1.0 / (4 * spacing**2)
    odd = lags % 2 == 1
    h[odd] = -1.0 / (np.pi * lags[odd] * spacing) ** 2
    return lags, h


def _filter_projection(density, spacing, cutoff):
    n = density.size
    lags, h = _ramp_kernel(n, spacing)
    size = sp_fft.next_fast_len(density.size + h.size - 1)
    H = sp_fft.rfft(h, size)
    if cutoff < 1.0:
        nu = sp_fft.rfftfreq(size, d=spacing)
        H = H * (nu <= cutoff * 0.5 / spacing)
    conv = sp_fft.irfft(sp_fft.rfft(density, size) * H, size) * spacing
    # full convolution output index j corresponds to lag j - n
    return conv[n : n + density.size]


def _pad_to(centers, density, width, reach):
    """Zero-pad a projection so the filtered profile covers |s| <= reach."""
    lo = max(0, int(np.ceil((centers[0] + reach) / width)) + 1)
    hi = max(0, int(np.ceil((reach - centers[-1]) / width)) + 1)
    centers = centers[0] + width * np.arange(-lo, centers.size + hi)
    return centers, np.concatenate([np.zeros(lo), density, np.zeros(hi)])


def wigner_backprojection(histograms, grid: PhaseSpaceGrid, cutoff=1.0, workers=None):
    """Filtered back-projection of quadrature histograms onto ``grid``.

    ``cutoff`` is the ramp-filter cutoff as a fraction of the Nyquist
    frequency of the histogram binning. Angles must span [0, pi) evenly.
    """
    histograms = list(histograms)
    if len(histograms) < MIN_ANGLES:
        raise CoverageError(f"need at least {MIN_ANGLES} angles, got {len(histograms)}")
    if not 0 < cutoff <= 1:
        raise DomainError("cutoff must lie in (0, 1]")
    thetas = np.mod([h.angle for h in histograms], np.pi)
    order = np.argsort(thetas)
    ts = thetas[order]
    gaps = np.diff(np.concatenate([ts, [ts[0] + np.pi]]))
    expected = np.pi / len(ts)
    if np.any(np.abs(gaps - expected) > 0.1 * expected):
        raise CoverageError("angles must cover [0, pi) uniformly")
    widths = {round(h.bin_width, 12) for h in histograms}
    if len(widths) != 1:
        raise DataError("histograms must share a common bin width")

    x = grid.axis
    X1, X2 = np.meshgrid(x, x)

    reach = grid.extent * np.sqrt(2)

    def project(h):
        centers, dens = _pad_to(h.centers, h.density, h.bin_width, reach)
        filt = _filter_projection(dens, h.bin_width, cutoff)
        s = X1 * np.cos(h.angle) + X2 * np.sin(h.angle)
        return np.interp(s, centers, filt)

    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(project, histograms))
    else:
        parts = [project(h) for h in histograms]
    W = np.zeros_like(X1)
    for p in parts:  # fixed reduction order
        W += p
    W *= np.pi / len(histograms)
    return WignerMap(grid, W)
