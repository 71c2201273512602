import numpy as np
import pytest

from optotomo.errors import CoverageError, DataError
from optotomo.homodyne import GaussianState
from optotomo.wigner import (
    PhaseSpaceGrid,
    QuadratureHistogram,
    histogram_samples,
    wigner_backprojection,
)


def histograms(state, n_angles, n, extent, seed, bin_width=0.1):
    rng = np.random.default_rng(seed)
    th = np.arange(n_angles) * np.pi / n_angles
    return [histogram_samples(t, state.sample(t, n, rng), bin_width, extent) for t in th]


@pytest.fixture(scope="module")
def vacuum_map():
    hs = histograms(GaussianState.vacuum(), 12, 1_000_000, 5.0, seed=1)
    return wigner_backprojection(hs, PhaseSpaceGrid(5.0, 101))


def analytic_gaussian(grid, mean, cov):
    x = grid.axis
    X1, X2 = np.meshgrid(x, x)
    inv = np.linalg.inv(cov)
    d1, d2 = X1 - mean[0], X2 - mean[1]
    q = inv[0, 0] * d1**2 + 2 * inv[0, 1] * d1 * d2 + inv[1, 1] * d2**2
    return np.exp(-0.5 * q) / (2 * np.pi * np.sqrt(np.linalg.det(cov)))


class TestVacuum:
    def test_variance(self, vacuum_map):
        _, cov = vacuum_map.fit_gaussian()
        assert cov[0, 0] == pytest.approx(0.5, rel=0.05)
        assert cov[1, 1] == pytest.approx(0.5, rel=0.05)

    def test_normalization(self, vacuum_map):
        assert vacuum_map.normalization == pytest.approx(1.0, abs=0.02)

    def test_rotational_symmetry(self, vacuum_map):
        assert vacuum_map.angular_profile_asymmetry() < 0.03

    def test_matches_analytic_map_inside_disc(self, vacuum_map):
        # 12 angles only resolve the map within a few widths of the origin
        x = vacuum_map.grid.axis
        X1, X2 = np.meshgrid(x, x)
        disc = X1**2 + X2**2 <= 3.0**2
        ref = analytic_gaussian(vacuum_map.grid, [0, 0], 0.5 * np.eye(2))
        # pointwise error is dominated by ramp-amplified counting noise
        assert np.abs(vacuum_map.values - ref)[disc].max() < 0.06 * ref.max()


def test_displaced_peak():
    hs = histograms(GaussianState([2.0, 0.0]), 12, 1_000_000, 6.0, seed=2)
    W = wigner_backprojection(hs, PhaseSpaceGrid(6.0, 101))
    cell = W.grid.spacing
    assert np.all(np.abs(W.peak_location() - [2.0, 0.0]) <= cell)


def test_thermal_like_state():
    hs = histograms(GaussianState(np.zeros(2), 5 * np.eye(2)), 12, 1_000_000, 12.0, seed=3)
    W = wigner_backprojection(hs, PhaseSpaceGrid(12.0, 101))
    _, cov = W.fit_gaussian()
    assert cov[0, 0] == pytest.approx(5.0, rel=0.05)
    assert cov[1, 1] == pytest.approx(5.0, rel=0.05)
    assert W.normalization == pytest.approx(1.0, abs=0.02)


def test_noiseless_projections_reproduce_gaussian():
    # exact bin-integrated marginals, no sampling noise
    from scipy.stats import norm

    state = GaussianState(np.zeros(2), [[1.2, 0.3], [0.3, 0.6]])
    hs = []
    for t in np.arange(16) * np.pi / 16:
        sd = np.sqrt(state.covariance[0, 0] * np.cos(t) ** 2 + state.covariance[1, 1] * np.sin(t) ** 2
                     + 2 * state.covariance[0, 1] * np.sin(t) * np.cos(t))
        edges = (np.arange(-80, 82) - 0.5) * 0.05
        hs.append(QuadratureHistogram(t, edges, np.diff(norm.cdf(edges, scale=sd)) * 1e9))
    W = wigner_backprojection(hs, PhaseSpaceGrid(4.0, 81))
    ref = analytic_gaussian(W.grid, [0, 0], state.covariance)
    assert np.abs(W.values - ref).max() < 0.01 * ref.max()


def test_cutoff_smooths():
    hs = histograms(GaussianState.vacuum(), 12, 100_000, 5.0, seed=4)
    grid = PhaseSpaceGrid(5.0, 101)
    full = wigner_backprojection(hs, grid)
    soft = wigner_backprojection(hs, grid, cutoff=0.3)
    ref = analytic_gaussian(grid, [0, 0], 0.5 * np.eye(2))
    assert np.abs(soft.values - ref).std() < np.abs(full.values - ref).std()


def test_parallel_matches_serial():
    hs = histograms(GaussianState.vacuum(), 8, 10_000, 4.0, seed=5)
    grid = PhaseSpaceGrid(4.0, 41)
    a = wigner_backprojection(hs, grid, workers=1)
    b = wigner_backprojection(hs, grid, workers=4)
    np.testing.assert_array_equal(a.values, b.values)


def test_insufficient_angles():
    hs = histograms(GaussianState.vacuum(), 6, 1000, 4.0, seed=6)
    with pytest.raises(CoverageError):
        wigner_backprojection(hs, PhaseSpaceGrid(4.0, 41))


def test_non_uniform_angles():
    hs = histograms(GaussianState.vacuum(), 12, 1000, 4.0, seed=7)
    bunched = [QuadratureHistogram(0.1 * i, h.edges, h.counts) for i, h in enumerate(hs)]
    with pytest.raises(CoverageError):
        wigner_backprojection(bunched, PhaseSpaceGrid(4.0, 41))


def test_empty_histogram():
    hs = histograms(GaussianState.vacuum(), 8, 1000, 4.0, seed=8)
    hs[3] = QuadratureHistogram(hs[3].angle, hs[3].edges, np.zeros_like(hs[3].counts))
    with pytest.raises(DataError):
        wigner_backprojection(hs, PhaseSpaceGrid(4.0, 41))


def test_mixed_bin_widths():
    hs = histograms(GaussianState.vacuum(), 8, 1000, 4.0, seed=9)
    hs[0] = histogram_samples(hs[0].angle, np.zeros(10), 0.2, 4.0)
    with pytest.raises(DataError):
        wigner_backprojection(hs, PhaseSpaceGrid(4.0, 41))
