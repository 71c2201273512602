"""Spectral estimation, zero-span band power, calibration and detector response."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import CalibrationError, DomainError, DynamicRangeError, PreconditionError
from .timeseries import TimeSeries

#: Equivalent noise bandwidth of the periodic Hann window, in bins.
HANN_ENBW_BINS = 1.5


@dataclass(frozen=True)
class SpectralDensity:
    frequencies: np.ndarray
    values: np.ndarray
    unit: str
    rbw: float
    averages: int

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if f.shape != v.shape:
            raise DomainError("frequency and value arrays differ in shape")
        if np.any(v < 0):
            raise DomainError("PSD values must be non-negative")
        if f.size > 1 and not np.allclose(np.diff(f), f[1] - f[0]):
            raise DomainError("frequency grid must be uniform")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)

    @property
    def df(self):
        return float(self.frequencies[1] - self.frequencies[0])

    @property
    def asd(self):
        return np.sqrt(self.values)

    def band(self, f_lo, f_hi):
        sel = (self.frequencies >= f_lo) & (self.frequencies <= f_hi)
        return self.frequencies[sel], self.values[sel]

    def band_mean(self, f_lo, f_hi):
        _, v = self.band(f_lo, f_hi)
        if v.size == 0:
            raise DomainError(f"no bins in [{f_lo}, {f_hi}] Hz")
        return float(v.mean())

    def integrate(self, f_lo=None, f_hi=None):
        f_lo = self.frequencies[0] if f_lo is None else f_lo
        f_hi = self.frequencies[-1] if f_hi is None else f_hi
        _, v = self.band(f_lo, f_hi)
        return float(v.sum() * self.df)

    def scaled(self, factor, unit):
        return SpectralDensity(self.frequencies, self.values * factor, unit, self.rbw, self.averages)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frequency_hz", "psd_value", "unit", "rbw_hz", "averages"])
        for f, v in zip(self.frequencies, self.values):
            w.writerow([repr(float(f)), repr(float(v)), self.unit, repr(float(self.rbw)), self.averages])
        return buf.getvalue()


def segment_length(rate, rbw):
    return int(round(HANN_ENBW_BINS * rate / rbw))


def welch_psd(ts: TimeSeries, rbw, window="hann", overlap=0.5):
    """One-sided Welch PSD whose Hann-window noise bandwidth equals ``rbw``."""
    if window != "hann":
        raise DomainError(f"unsupported window {window!r}")
    if not 0 <= overlap <= 0.9:
        raise PreconditionError("overlap must lie in [0, 0.9]")
    if rbw < 2 / ts.duration:
        raise PreconditionError(
            f"RBW {rbw:g} Hz unachievable for a {ts.duration:g} s record (need >= {2 / ts.duration:g} Hz)"
        )
    nperseg = segment_length(ts.sample_rate, rbw)
    if nperseg > len(ts) or nperseg < 4:
        raise PreconditionError(f"segment length {nperseg} incompatible with {len(ts)} samples")
    noverlap = int(round(overlap * nperseg))
    step = nperseg - noverlap
    averages = (len(ts) - nperseg) // step + 1
    f, p = signal.welch(
        ts.values, fs=ts.sample_rate, window="hann", nperseg=nperseg,
        noverlap=noverlap, detrend="constant", scaling="density", return_onesided=True,
    )
    actual_rbw = HANN_ENBW_BINS * ts.sample_rate / nperseg
    return SpectralDensity(f, p, f"{ts.unit}^2/Hz", actual_rbw, averages)


def zero_span_power(ts: TimeSeries, f_center, rbw, segment_duration, overlap=0.5):
    """Band power around ``f_center`` for consecutive time segments.

    Each segment gets its own Welch estimate; the band power is the PSD
    integrated over ``[f_center - rbw/2, f_center + rbw/2]``. Returns
    ``(segment_mid_times, band_powers)``.
    """
    if not 0 < f_center < ts.sample_rate / 2:
        raise PreconditionError("f_center must lie below Nyquist")
    n_seg = int(round(segment_duration * ts.sample_rate))
    count = len(ts) // n_seg
    if count < 1:
        raise PreconditionError("record shorter than one zero-span segment")
    lo, hi = f_center - rbw / 2, f_center + rbw / 2
    grid = np.linspace(lo, hi, 65)
    times = np.empty(count)
    powers = np.empty(count)
    for k in range(count):
        seg = TimeSeries(ts.values[k * n_seg : (k + 1) * n_seg], ts.sample_rate, ts.seed, ts.unit)
        psd = welch_psd(seg, rbw, overlap=overlap)
        powers[k] = np.trapezoid(np.interp(grid, psd.frequencies, psd.values), grid)
        times[k] = (k + 0.5) * n_seg / ts.sample_rate
    return times, powers


@dataclass(frozen=True)
class CalibrationMarker:
    frequency: float
    displacement_amplitude: float

    def __post_init__(self):
        if not self.frequency > 0 or not self.displacement_amplitude > 0:
            raise DomainError("marker frequency and amplitude must be positive")


def inject_marker(x: TimeSeries, marker: CalibrationMarker):
    """Add the sinusoidal calibration drive to a displacement record."""
    if marker.frequency >= x.sample_rate / 2:
        raise PreconditionError("marker frequency above Nyquist")
    t = x.times
    drive = marker.displacement_amplitude * np.sin(2 * np.pi * marker.frequency * t)
    return TimeSeries(x.values + drive, x.sample_rate, x.seed, x.unit)


def marker_power(psd: SpectralDensity, frequency, half_width_bins=4, min_snr=10.0):
    """Integrated power of a line at ``frequency`` above the local floor."""
    f = psd.frequencies
    k0 = int(np.argmin(np.abs(f - frequency)))
    lo, hi = k0 - half_width_bins, k0 + half_width_bins + 1
    if lo < 1 or hi > f.size - 1:
        raise CalibrationError("marker too close to the band edge")
    side = 4 * half_width_bins
    flank = np.concatenate([psd.values[max(0, lo - side) : lo], psd.values[hi : hi + side]])
    floor = float(np.median(flank))
    peak = float(psd.values[lo:hi].max())
    if floor > 0 and peak / floor < min_snr:
        raise CalibrationError(f"marker SNR {peak / floor:.2f} below {min_snr}")
    power = float((psd.values[lo:hi] - floor).sum() * psd.df)
    if power <= 0:
        raise CalibrationError("marker not found above the floor")
    return power


def calibrate_displacement(psd: SpectralDensity, marker: CalibrationMarker, min_snr=10.0):
    """Rescale a detector-unit PSD to m^2/Hz using the injected marker line.

    The factor maps the integrated marker power onto ``a^2 / 2`` for a
    marker of displacement amplitude ``a`` and is applied to every bin.
    """
    p = marker_power(psd, marker.frequency, min_snr=min_snr)
    factor = 0.5 * marker.displacement_amplitude**2 / p
    return psd.scaled(factor, "m^2/Hz")


@dataclass(frozen=True)
class SecondOrderLowPass:
    """Two-pole low-pass response H(f) = 1 / (1 - (f/fc)^2 + i f/(fc q))."""

    corner: float = 25e6
    q: float = 1 / np.sqrt(2)

    def __call__(self, f):
        u = np.asarray(f, dtype=float) / self.corner
        return 1.0 / (1 - u**2 + 1j * u / self.q)


class FlatResponse:
    def __call__(self, f):
        return np.ones_like(np.asarray(f, dtype=float), dtype=complex)


def apply_transfer(ts: TimeSeries, transfer):
    """Filter a record by ``transfer`` in the frequency domain (circular)."""
    n = len(ts)
    spec = np.fft.rfft(ts.values)
    f = np.fft.rfftfreq(n, 1 / ts.sample_rate)
    return TimeSeries(np.fft.irfft(spec * transfer(f), n), ts.sample_rate, ts.seed, ts.unit)


def detector_transfer_normalize(psd: SpectralDensity, transfer=None, floor=1e-6):
    """Divide a PSD by |H(f)|^2 of the detector electronics."""
    transfer = SecondOrderLowPass() if transfer is None else transfer
    gain = np.abs(transfer(psd.frequencies)) ** 2
    bad = np.flatnonzero(gain <= floor)
    if bad.size:
        raise DynamicRangeError(
            f"|H|^2 below {floor:g} in {bad.size} bins", bins=bad.tolist()
        )
    return SpectralDensity(psd.frequencies, psd.values / gain, psd.unit, psd.rbw, psd.averages)


def flatness(psd: SpectralDensity, f_lo, f_hi, level, n_bands=16):
    """Largest relative deviation from ``level`` of log-spaced sub-band means."""
    edges = np.geomspace(f_lo, f_hi, n_bands + 1)
    devs = [abs(psd.band_mean(a, b) / level - 1) for a, b in zip(edges[:-1], edges[1:])]
    return max(devs)


def expected_welch(model, frequencies, rate, rbw, span_bins=8, oversample=32):
    """Expected Hann-window Welch estimate of a model PSD.

    Convolves ``model(f)`` with the normalized spectral window of the
    segment length used by :func:`welch_psd` at this ``rbw``.
    """
    nperseg = segment_length(rate, rbw)
    w = signal.get_window("hann", nperseg)
    nfft = nperseg * oversample
    kernel = np.abs(np.fft.fft(w, nfft)) ** 2
    lag_bins = np.fft.fftfreq(nfft, 1.0 / nfft) / oversample  # in units of rate/nperseg
    keep = np.abs(lag_bins) <= span_bins
    lags = lag_bins[keep] * rate / nperseg
    kern = kernel[keep]
    kern = kern / kern.sum()
    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    out = np.array([np.dot(kern, model(np.abs(fk + lags))) for fk in f])
    return out if np.ndim(frequencies) else float(out[0])
