"""Command-line scenarios: noise budget, theta scan, spectra and tomography.

Each ``run_*`` function returns a :class:`ScenarioResult` holding CSV tables,
optional SVG documents and a :class:`RunReport`; ``main`` writes them out.
Exit codes: 0 success, 2 config error, 3 physics/reconstruction failure or
failed consistency check, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import svg
from .errors import ConfigError, OptoTomoError
from .homodyne import (
    VACUUM_VARIANCE,
    GaussianState,
    QuadratureSamples,
    covariance_standard_errors,
    quadrature_readout,
    reconstruct_covariance,
)
from .interferometer import shot_imprecision_asd, shot_imprecision_psd
from .physics import sql_peak_asd, sql_psd, thermal_peak_psd, thermal_psd
from .spectra import (
    apply_transfer,
    detector_transfer_normalize,
    expected_welch,
    flatness,
    inject_marker,
    marker_power,
    welch_psd,
    zero_span_power,
)
from .timeseries import (
    TimeSeries,
    displacement_scale,
    shot_noise_level,
    synthesize_detector_output,
    synthesize_membrane_motion,
)
from .wigner import PhaseSpaceGrid, histogram_samples, wigner_backprojection

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_IO = 0, 2, 3, 4

REFERENCE_SHOT_ASD = 1.9e-16
REFERENCE_SQL_RATIO = 8.2


@dataclass
class Check:
    name: str
    value: float
    unit: str
    reference: float | None
    tolerance: str
    provenance: str
    passed: bool | None

    @property
    def status(self):
        return {True: "PASS", False: "FAIL", None: "INFO"}[self.passed]


@dataclass
class RunReport:
    scenario: str
    checks: list = field(default_factory=list)

    def add(self, name, value, unit, provenance, reference=None, tolerance="", passed=None):
        self.checks.append(Check(name, float(value), unit, reference, tolerance, provenance,
                                 None if passed is None else bool(passed)))

    @property
    def ok(self):
        return all(c.passed is not False for c in self.checks)

    def lines(self):
        out = [f"scenario: {self.scenario}"]
        for c in self.checks:
            ref = "" if c.reference is None else f" ref {c.reference:.4g} {c.tolerance}"
            out.append(f"  {c.status} {c.name} = {c.value:.4g} {c.unit}{ref} [{c.provenance}]")
        return out

    def to_csv(self):
        return _table(
            ["check", "value", "unit", "reference", "tolerance", "provenance", "status"],
            [[c.name, c.value, c.unit, "" if c.reference is None else c.reference,
              c.tolerance, c.provenance, c.status] for c in self.checks],
        )


@dataclass
class ScenarioResult:
    report: RunReport
    tables: dict = field(default_factory=dict)  # file name -> CSV text
    plots: dict = field(default_factory=dict)   # file name -> SVG text
    data: dict = field(default_factory=dict)    # raw arrays for programmatic use


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _within(value, reference, rel):
    return abs(value / reference - 1) <= rel


def _budget_grid(cfg):
    b = cfg.budget
    f = np.geomspace(b.f_min, b.f_max, b.points)
    return np.unique(np.append(f, cfg.mode.resonance_frequency))


def run_noise_budget(cfg, make_svg=True):
    mode, ifo, eff = cfg.mode, cfg.interferometer, cfg.efficiency
    f = _budget_grid(cfg)
    thermal = np.asarray(thermal_psd(f, mode))
    sql = np.asarray(sql_psd(f, mode))
    shots = {p: shot_imprecision_psd(f, ifo.with_power(p), eff) for p in cfg.powers}
    shot_main = shot_imprecision_psd(f, ifo, eff)
    dark = np.full_like(f, cfg.dark_noise_psd)
    total = thermal + shot_main + dark

    header = ["frequency_hz", "thermal_m2_per_hz"]
    header += [f"shot_{p * 1e3:g}mW_m2_per_hz" for p in cfg.powers]
    header += ["sql_m2_per_hz", "dark_m2_per_hz", f"total_{ifo.input_power * 1e3:g}mW_m2_per_hz"]
    rows = [
        [f[i], thermal[i], *[shots[p][i] for p in cfg.powers], sql[i], dark[i], total[i]]
        for i in range(f.size)
    ]

    report = RunReport(cfg.name)
    shot_asd = shot_imprecision_asd(ifo, eff)
    report.add("shot_asd", shot_asd, "m/rtHz", "model vs reference", REFERENCE_SHOT_ASD, "+/-10%",
               _within(shot_asd, REFERENCE_SHOT_ASD, 0.10))
    sql_peak = sql_peak_asd(mode)
    report.add("sql_peak_asd", sql_peak, "m/rtHz", "model")
    ratio = sql_peak / shot_asd
    report.add("sql_to_shot_ratio", ratio, "1", "model vs reference", REFERENCE_SQL_RATIO, "+/-15%",
               _within(ratio, REFERENCE_SQL_RATIO, 0.15))
    report.add("thermal_peak_asd", math.sqrt(thermal_peak_psd(mode)), "m/rtHz", "model")
    if len(cfg.powers) >= 2:
        lo, hi = min(cfg.powers), max(cfg.powers)
        a_lo = shot_imprecision_asd(ifo.with_power(lo), eff)
        a_hi = shot_imprecision_asd(ifo.with_power(hi), eff)
        expected = math.sqrt(hi / lo)
        report.add("shot_floor_ratio", a_lo / a_hi, "1", "model vs sqrt(P ratio)", expected,
                   "1e-12 rel", _within(a_lo / a_hi, expected, 1e-12))
    report.add("imprecision_below_sql_peak", float(shot_asd < sql_peak), "bool", "model",
               passed=shot_asd < sql_peak)

    res = ScenarioResult(report, data=dict(f=f, thermal=thermal, sql=sql, shots=shots, total=total))
    res.tables["noise_budget.csv"] = _table(header, rows)
    if make_svg:
        series = [("thermal", f, np.sqrt(thermal))]
        series += [(f"shot {p * 1e3:g} mW", f, np.sqrt(shots[p])) for p in cfg.powers]
        series += [("SQL", f, np.sqrt(sql)), ("total", f, np.sqrt(total))]
        res.plots["noise_budget.svg"] = svg.line_plot(
            series, "Displacement noise budget", "frequency [Hz]", "ASD [m/rtHz]", True, True
        )
    return res


def _fit_cos2(theta, power):
    A = np.column_stack([np.ones_like(theta), np.cos(theta) ** 2])
    coef, *_ = np.linalg.lstsq(A, power, rcond=None)
    return coef, A @ coef


def run_theta_scan(cfg, make_svg=True):
    sim = cfg.simulation
    mode = cfg.simulation_mode
    n_seg = int(round(sim.segment_duration * sim.rate))
    n = n_seg * sim.segments
    x = synthesize_membrane_motion(mode, n / sim.rate, sim.rate, seed=sim.seed)
    x = TimeSeries(x.values * sim.membrane_drive, x.sample_rate, x.seed, x.unit)
    step = np.arange(sim.segments) * 2 * np.pi / sim.segments
    angles = np.repeat(step, n_seg)
    y = synthesize_detector_output(x, cfg.interferometer, cfg.efficiency, cfg.homodyne,
                                   seed=sim.seed + 1, angles=angles)
    f0 = mode.resonance_frequency
    t, power = zero_span_power(y, f0, sim.rbw, sim.segment_duration)
    blocked = TimeSeries(np.zeros(n), sim.rate, sim.seed, "m")
    y_shot = synthesize_detector_output(blocked, cfg.interferometer, cfg.efficiency,
                                        cfg.homodyne, seed=sim.seed + 2)
    _, shot_trace = zero_span_power(y_shot, f0, sim.rbw, sim.segment_duration)
    (p_shot, p_mem), model = _fit_cos2(step, power)
    shot_mean, shot_std = float(shot_trace.mean()), float(shot_trace.std(ddof=1))

    report = RunReport(cfg.name)
    report.add("fit_shot_power", p_shot, "snu^2", "fit")
    report.add("fit_membrane_power", p_mem, "snu^2", "fit")
    if p_mem > 10 * shot_std:
        rms = float(np.sqrt(np.mean((power - model) ** 2)) / p_mem)
        report.add("fit_rms_residual", rms, "fraction of P_mem", "fit oracle", 0.05, "< 0.05",
                   rms < 0.05)
    dev = (power.min() - shot_mean) / shot_std
    report.add("min_vs_shot", dev, "sigma", "simulation vs blocked-output trace", 0.0, "|.| <= 3",
               abs(dev) <= 3)
    res = ScenarioResult(report, data=dict(t=t, theta=step, power=power, model=model,
                                           shot=shot_trace, coef=(p_shot, p_mem)))
    res.tables["theta_scan.csv"] = _table(
        ["time_s", "theta_rad", "band_power_snu2", "model_snu2", "shot_reference_snu2"],
        zip(t, step, power, model, shot_trace),
    )
    if make_svg:
        res.plots["theta_scan.svg"] = svg.line_plot(
            [("band power", step, power), ("model", step, model), ("shot", step, shot_trace)],
            f"Zero-span power at {f0 / 1e3:.2f} kHz", "theta [rad]", "power [snu^2]",
            logy=True,
        )
    return res


def _calibrated_floor_band(cfg, psd):
    """Off-resonance band for the calibrated floor, clear of the marker line."""
    f = psd.frequencies
    lo = 3 * cfg.mode.resonance_frequency
    hi = 0.4 * cfg.simulation.rate
    keep = (f >= lo) & (f <= hi)
    if cfg.marker is not None:
        keep &= np.abs(f - cfg.marker.frequency) > 6 * psd.df
    return keep


def run_spectra(cfg, make_svg=True):
    sim = cfg.simulation
    mode = cfg.simulation_mode
    ifo, eff = cfg.interferometer, cfg.efficiency
    x = synthesize_membrane_motion(mode, sim.duration, sim.rate, seed=sim.seed)
    if cfg.marker is not None:
        x = inject_marker(x, cfg.marker)
    psds = []
    for i, th in enumerate(cfg.angles):
        y = synthesize_detector_output(x, ifo, eff, cfg.homodyne.with_angle(th),
                                       seed=sim.seed + 1 + i)
        y = apply_transfer(y, cfg.detector)
        psds.append(detector_transfer_normalize(welch_psd(y, sim.rbw), cfg.detector))
    f = psds[0].frequencies
    f0 = mode.resonance_frequency
    k0 = int(np.argmin(np.abs(f - f0)))
    peaks = np.array([p.values[k0] for p in psds])

    report = RunReport(cfg.name)
    order = np.argsort(-np.abs(np.cos(cfg.angles)), kind="stable")
    monotone = bool(np.all(np.diff(peaks[order]) <= 0))
    report.add("peak_monotone_in_theta", float(monotone), "bool", "simulation", passed=monotone)

    shot = shot_noise_level(sim.rate)
    scale2 = displacement_scale(ifo, eff, sim.rate) ** 2
    for th, p, pk in zip(cfg.angles, psds, peaks):
        c2 = math.cos(th) ** 2

        def model(fr, c2=c2):
            return shot + c2 * scale2 * np.asarray(thermal_psd(fr, mode))

        expected = expected_welch(model, f[k0], sim.rate, sim.rbw)
        tag = f"theta={th:.4f}"
        if c2 > 0.5:
            report.add(f"peak_vs_budget[{tag}]", pk / expected, "ratio", "pipeline oracle",
                       1.0, "+/-20%", _within(pk / expected, 1.0, 0.20))
        if abs(math.cos(th)) < 1e-12:
            flat = flatness(p, max(10e3, 4 * p.df), 0.45 * sim.rate, shot)
            report.add(f"flatness[{tag}]", flat, "max rel dev", "statistical bound", 0.05, "< 0.05",
                       flat < 0.05)
    header = ["frequency_hz"] + [f"psd_theta_{th:.4f}rad_snu2_per_hz" for th in cfg.angles]
    res = ScenarioResult(report, data=dict(f=f, psds=psds, peaks=peaks))
    res.tables["spectra.csv"] = _table(
        header, ([f[i]] + [p.values[i] for p in psds] for i in range(f.size))
    )

    if cfg.marker is not None:
        # one factor from the most sensitive quadrature, applied to every angle
        ref = psds[int(order[0])]
        factor = 0.5 * cfg.marker.displacement_amplitude**2 / marker_power(ref, cfg.marker.frequency)
        cal = [p.scaled(factor, "m^2/Hz") for p in psds]
        band = _calibrated_floor_band(cfg, cal[int(order[0])])
        c2_ref = math.cos(cfg.angles[int(order[0])]) ** 2
        imprecision = float(shot_imprecision_psd(0.0, ifo, eff)) / c2_ref

        def displacement_model(fr):
            return imprecision + np.asarray(thermal_psd(fr, mode))

        measured = float(cal[int(order[0])].values[band].mean())
        predicted = float(np.mean(expected_welch(displacement_model, f[band], sim.rate, sim.rbw)))
        report.add("calibrated_floor_vs_model", measured / predicted, "ratio", "marker calibration",
                   1.0, "+/-10%", _within(measured / predicted, 1.0, 0.10))
        res.data["calibrated"] = cal
        res.tables["spectra_calibrated.csv"] = _table(
            ["frequency_hz"] + [f"psd_theta_{th:.4f}rad_m2_per_hz" for th in cfg.angles],
            ([f[i]] + [p.values[i] for p in cal] for i in range(f.size)),
        )
    if make_svg:
        band = (f > 0.5 * f0) & (f < 1.5 * f0)
        res.plots["spectra.svg"] = svg.line_plot(
            [(f"theta={th:.2f}", f[band], p.values[band]) for th, p in zip(cfg.angles, psds)],
            "Homodyne spectra vs quadrature angle", "frequency [Hz]", "PSD [snu^2/Hz]",
            logy=True,
        )
    return res


def tomography_ground_truth(cfg):
    """Output-light covariance in shot-noise units at the analysis frequency."""
    if cfg.tomography.vacuum_only:
        return GaussianState()
    fa = cfg.tomography.frequency
    excess = thermal_psd(fa, cfg.mode) / shot_imprecision_psd(fa, cfg.interferometer, cfg.efficiency)
    cov = np.diag([VACUUM_VARIANCE * (1 + excess), VACUUM_VARIANCE])
    return GaussianState(np.zeros(2), cov)


def run_tomography(cfg, make_svg=True):
    tom = cfg.tomography
    truth = tomography_ground_truth(cfg)
    rng = np.random.default_rng(cfg.simulation.seed)
    sd1, sd2 = np.sqrt(np.diag(truth.covariance))
    thetas = np.arange(tom.angles) * np.pi / tom.angles
    scan, hists = [], []
    for th in thetas:
        x1 = QuadratureSamples(0.0, sd1 * rng.standard_normal(tom.samples))
        x2 = QuadratureSamples(np.pi / 2, sd2 * rng.standard_normal(tom.samples))
        q = quadrature_readout(x1, x2, cfg.homodyne.with_angle(th))
        scan.append((th, float(np.var(q.values, ddof=1))))
        hists.append(histogram_samples(th, q.values, tom.bin_width, tom.grid_extent))
    se = covariance_standard_errors(thetas, truth, tom.samples)
    state = reconstruct_covariance(scan, uncertainty_tol=3 * float(se.max()))
    grid = PhaseSpaceGrid(tom.grid_extent, tom.grid_points)
    W = wigner_backprojection(hists, grid)
    _, fit_cov = W.fit_gaussian()

    report = RunReport(cfg.name)
    v = state.covariance
    est = np.array([v[0, 0], v[1, 1], v[0, 1]])
    ref = truth.covariance
    ref_vec = np.array([ref[0, 0], ref[1, 1], ref[0, 1]])
    for name, e, r, s in zip(("V11", "V22", "V12"), est, ref_vec, se):
        report.add(name, e, "snu^2", "reconstruction vs config ground truth", r, "3 SE",
                   abs(e - r) <= 3 * s)
    if not tom.vacuum_only:
        report.add("V11_exceeds_V22", v[0, 0] - v[1, 1], "snu^2", "reconstruction",
                   passed=v[0, 0] - v[1, 1] > 3 * se[:2].max())
    report.add("det_cov", state.determinant, "snu^4", "uncertainty relation", 0.25, ">= 1/4 - 3 SE",
               state.is_physical(3 * float(se.max())))
    report.add("wigner_normalization", W.normalization, "1", "grid quadrature", 1.0, "+/-2%",
               _within(W.normalization, 1.0, 0.02))
    report.add("wigner_fit_V11", fit_cov[0, 0], "snu^2", "Gaussian fit", ref[0, 0], "+/-5%",
               _within(fit_cov[0, 0], ref[0, 0], 0.05))
    report.add("wigner_fit_V22", fit_cov[1, 1], "snu^2", "Gaussian fit", ref[1, 1], "+/-5%",
               _within(fit_cov[1, 1], ref[1, 1], 0.05))

    res = ScenarioResult(report, data=dict(state=state, truth=truth, wigner=W, scan=scan, se=se))
    res.tables["covariance.csv"] = _table(
        ["element", "value_snu2", "standard_error_snu2", "ground_truth_snu2"],
        zip(("V11", "V22", "V12"), est, se, ref_vec),
    )
    axis = grid.axis
    res.tables["wigner.csv"] = _table(
        ["x1_snu", "x2_snu", "wigner_per_snu2"],
        ([axis[j], axis[i], W.values[i, j]] for i in range(axis.size) for j in range(axis.size)),
    )
    res.tables["histograms.csv"] = _table(
        ["theta_rad", "bin_center_snu", "count"],
        ([h.angle, c, int(n)] for h in hists for c, n in zip(h.centers, h.counts)),
    )
    if make_svg:
        res.plots["wigner.svg"] = svg.heatmap(W.values, grid.extent, "Reconstructed Wigner function",
                                              "X1 [snu]", "X2 [snu]")
    return res


COMMANDS = {
    "noise-budget": run_noise_budget,
    "theta-scan": run_theta_scan,
    "spectra": run_spectra,
    "tomography": run_tomography,
}


def write_result(res, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in {**res.tables, "report.csv": res.report.to_csv(), **res.plots}.items():
        path = out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def build_parser():
    p = argparse.ArgumentParser(prog="optotomo", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", metavar="PATH", help="scenario file (reference defaults if omitted)")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory")
    p.add_argument("--seed", type=int, help="override simulation.seed")
    p.add_argument("--format", choices=["csv", "csv+svg"], default="csv+svg")
    p.add_argument("--quiet", action="store_true", help="suppress the report on stdout")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_mod.load(args.config) if args.config else config_mod.build({})
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = COMMANDS[args.command](cfg, make_svg=args.format == "csv+svg")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OptoTomoError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        raw = getattr(exc, "raw_fit", None)
        if raw is not None:
            print(f"raw fit:\n{np.array2string(np.asarray(raw))}", file=sys.stderr)
        return EXIT_PHYSICS
    try:
        write_result(res, args.out)
    except OSError as exc:
        print(f"I/O error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    if not args.quiet:
        print("\n".join(res.report.lines()))
    return EXIT_OK if res.report.ok else EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
