"""Scenario configuration: flat ``section.key = value`` files with SI suffixes.

Example::

    # reference defaults
    mode.f_res = 133.88kHz
    mode.mass = 80ng
    interferometer.powers = 20mW, 200mW
    simulation.seed = 7

Values are plain numbers or numbers followed by a unit with an optional SI
prefix (``kHz``, ``nm``, ``mW``, ``ng``...). Every key has a fixed dimension;
unknown keys and mismatched units are rejected.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, OptoTomoError
from .homodyne import HomodyneConfig
from .interferometer import EfficiencyBudget, InterferometerConfig
from .physics import MechanicalMode, MembraneOptics
from .spectra import CalibrationMarker, SecondOrderLowPass

_PREFIX = {
    "f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3,
    "c": 1e-2, "": 1.0, "k": 1e3, "M": 1e6, "G": 1e9,
}
# unit symbol -> (dimension, factor to SI)
_UNITS = {
    "Hz": ("Hz", 1.0),
    "m": ("m", 1.0),
    "W": ("W", 1.0),
    "g": ("kg", 1e-3),
    "K": ("K", 1.0),
    "s": ("s", 1.0),
    "rad": ("rad", 1.0),
}
_SPECIAL = {
    "kg/m3": ("kg/m3", 1.0),
    "g/cm3": ("kg/m3", 1e3),
    "%": ("1", 1e-2),
    "deg": ("rad", math.pi / 180),
    "pi": ("rad", math.pi),
    "m2/Hz": ("m2/Hz", 1.0),
    "m/rtHz": ("m/rtHz", 1.0),
}

_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")

# key -> (dimension, kind) ; kind in {"float", "int", "list", "str"}
SCHEMA = {
    "scenario.name": ("", "str"),
    "membrane.refractive_index": ("1", "float"),
    "membrane.thickness": ("m", "float"),
    "membrane.side_length": ("m", "float"),
    "membrane.density": ("kg/m3", "float"),
    "membrane.reflectivity": ("1", "float"),
    "membrane.reflectivity_tolerance": ("1", "float"),
    "mode.f_res": ("Hz", "float"),
    "mode.q": ("1", "float"),
    "mode.mass": ("kg", "float"),
    "mode.temperature": ("K", "float"),
    "interferometer.wavelength": ("m", "float"),
    "interferometer.input_power": ("W", "float"),
    "interferometer.powers": ("W", "list"),
    "interferometer.lo_power": ("W", "float"),
    "interferometer.contrast_defect": ("1", "float"),
    "interferometer.quantum_efficiency": ("1", "float"),
    "interferometer.optics_efficiency": ("1", "float"),
    "interferometer.dark_noise_asd": ("m/rtHz", "float"),
    "homodyne.angle": ("rad", "float"),
    "homodyne.angles": ("rad", "list"),
    "homodyne.pm_frequency": ("Hz", "float"),
    "homodyne.lock_target": ("rad", "float"),
    "simulation.duration": ("s", "float"),
    "simulation.rate": ("Hz", "float"),
    "simulation.seed": ("1", "int"),
    "simulation.rbw": ("Hz", "float"),
    "simulation.segments": ("1", "int"),
    "simulation.segment_duration": ("s", "float"),
    "simulation.membrane_drive": ("1", "float"),
    "simulation.q": ("1", "float"),
    "calibration.marker_frequency": ("Hz", "float"),
    "calibration.marker_amplitude": ("m", "float"),
    "detector.corner": ("Hz", "float"),
    "tomography.angles": ("1", "int"),
    "tomography.samples": ("1", "int"),
    "tomography.bin_width": ("1", "float"),
    "tomography.grid_extent": ("1", "float"),
    "tomography.grid_points": ("1", "int"),
    "tomography.vacuum_only": ("1", "int"),
    "tomography.frequency": ("Hz", "float"),
    "budget.f_min": ("Hz", "float"),
    "budget.f_max": ("Hz", "float"),
    "budget.points": ("1", "int"),
}


def parse_quantity(text, dimension="1"):
    """Parse ``'133.88kHz'`` style text into an SI float of ``dimension``."""
    m = _NUM.match(text)
    if not m:
        raise ConfigError(f"cannot parse number in {text!r}")
    value = float(m.group(1))
    unit = m.group(2)
    if not unit:
        if dimension not in ("1", "rad", "m2/Hz", "m/rtHz"):
            raise ConfigError(f"{text!r} needs a unit of {dimension}")
        return value
    if unit in _SPECIAL:
        dim, factor = _SPECIAL[unit]
    else:
        for sym in sorted(_UNITS, key=len, reverse=True):
            if unit.endswith(sym) and unit[: -len(sym)] in _PREFIX:
                dim, factor = _UNITS[sym][0], _UNITS[sym][1] * _PREFIX[unit[: -len(sym)]]
                break
        else:
            raise ConfigError(f"unknown unit {unit!r} in {text!r}")
    if dim != dimension:
        raise ConfigError(f"{text!r} has dimension {dim}, expected {dimension}")
    return value * factor


def parse_text(text):
    """Parse config text into a ``{key: value}`` dict of SI values."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        dim, kind = SCHEMA[key]
        try:
            if kind == "str":
                out[key] = value
            elif kind == "int":
                f = parse_quantity(value, dim)
                if f != int(f):
                    raise ConfigError(f"{key} must be an integer")
                out[key] = int(f)
            elif kind == "list":
                out[key] = [parse_quantity(v, dim) for v in value.split(",") if v.strip()]
            else:
                out[key] = parse_quantity(value, dim)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return out


@dataclass(frozen=True)
class SimulationSettings:
    duration: float = 0.5
    rate: float = 2e6
    seed: int = 0
    rbw: float = 10e3
    segments: int = 32
    segment_duration: float = 0.15
    membrane_drive: float = 1.0
    # desk-scale quality factor used for synthesis; 0 means use mode.q
    q: float = 100.0


@dataclass(frozen=True)
class TomographySettings:
    angles: int = 16
    samples: int = 200_000
    bin_width: float = 0.1
    grid_extent: float = 6.0
    grid_points: int = 121
    vacuum_only: bool = False
    frequency: float = 120e3


@dataclass(frozen=True)
class BudgetSettings:
    f_min: float = 10e3
    f_max: float = 1e6
    points: int = 2000


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "reference"
    membrane: MembraneOptics = field(default_factory=MembraneOptics)
    mode: MechanicalMode = field(default_factory=MechanicalMode)
    interferometer: InterferometerConfig = field(default_factory=InterferometerConfig)
    efficiency: EfficiencyBudget = field(default_factory=EfficiencyBudget)
    homodyne: HomodyneConfig = field(default_factory=HomodyneConfig)
    powers: tuple = (0.02, 0.2)
    angles: tuple = (0.0, math.pi / 3, 1.45, math.pi / 2)
    dark_noise_psd: float = 0.0
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    tomography: TomographySettings = field(default_factory=TomographySettings)
    budget: BudgetSettings = field(default_factory=BudgetSettings)
    marker: CalibrationMarker | None = None
    detector: SecondOrderLowPass = field(default_factory=SecondOrderLowPass)

    @property
    def simulation_mode(self):
        """Mechanical mode used by time-domain synthesis."""
        q = self.simulation.q
        return self.mode if not q else replace(self.mode, quality_factor=q)

    def with_seed(self, seed):
        return replace(self, simulation=replace(self.simulation, seed=seed))


def build(values):
    """Assemble a validated :class:`ScenarioConfig` from parsed values."""
    g = values.get
    try:
        wavelength = g("interferometer.wavelength", 1064e-9)
        membrane = MembraneOptics(
            refractive_index=g("membrane.refractive_index", 2.2),
            thickness=g("membrane.thickness", 40e-9),
            side_length=g("membrane.side_length", 1.5e-3),
            density=g("membrane.density", 3100.0),
            power_reflectivity=g("membrane.reflectivity", 0.17),
            wavelength=wavelength,
            reflectivity_tolerance=g("membrane.reflectivity_tolerance", 0.02),
        )
        mode = MechanicalMode(
            resonance_frequency=g("mode.f_res", 133.88e3),
            quality_factor=g("mode.q", 6e5),
            effective_mass=g("mode.mass", 80e-12),
            temperature=g("mode.temperature", 300.0),
        )
        powers = tuple(g("interferometer.powers", [0.02, 0.2]))
        ifo = InterferometerConfig(
            wavelength=wavelength,
            input_power=g("interferometer.input_power", max(powers)),
            lo_power=g("interferometer.lo_power", 12e-3),
            membrane_amplitude_reflectivity=membrane.amplitude_reflectivity,
            dark_port_contrast_defect=g("interferometer.contrast_defect", 1e-3),
        )
        eff = EfficiencyBudget(
            detector_quantum_efficiency=g("interferometer.quantum_efficiency", 0.7),
            optical_path_efficiency=g("interferometer.optics_efficiency", 0.5 / 0.7),
        )
        hom = HomodyneConfig(
            angle=g("homodyne.angle", 0.0),
            lo_amplitude=float(np.sqrt(ifo.lo_power)),
            pm_frequency=g("homodyne.pm_frequency", 10e6),
            lock_target=g("homodyne.lock_target", 0.0),
        )
        sim = SimulationSettings(**{
            k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("simulation.")
        })
        tomo_kw = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("tomography.")}
        if "vacuum_only" in tomo_kw:
            tomo_kw["vacuum_only"] = bool(tomo_kw["vacuum_only"])
        tomo = TomographySettings(**tomo_kw)
        budget = BudgetSettings(**{
            k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("budget.")
        })
        marker = None
        if "calibration.marker_amplitude" in values:
            marker = CalibrationMarker(
                g("calibration.marker_frequency", 128e3), values["calibration.marker_amplitude"]
            )
        dark_asd = g("interferometer.dark_noise_asd", 0.0)
        cfg = ScenarioConfig(
            name=g("scenario.name", "reference"),
            membrane=membrane, mode=mode, interferometer=ifo, efficiency=eff,
            homodyne=hom, powers=powers,
            angles=tuple(g("homodyne.angles", [0.0, math.pi / 3, 1.45, math.pi / 2])),
            dark_noise_psd=dark_asd**2,
            simulation=sim, tomography=tomo, budget=budget, marker=marker,
            detector=SecondOrderLowPass(corner=g("detector.corner", 25e6)),
        )
    except ConfigError:
        raise
    except (OptoTomoError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    _check(cfg)
    return cfg


def _check(cfg):
    sim = cfg.simulation
    if sim.rate <= 0 or sim.duration <= 0 or sim.rbw <= 0:
        raise ConfigError("simulation rate, duration and rbw must be positive")
    if sim.segments < 3 or sim.segment_duration <= 0:
        raise ConfigError("zero-span scan needs at least 3 segments of positive duration")
    if any(p <= 0 for p in cfg.powers):
        raise ConfigError("input powers must be positive")
    if cfg.tomography.angles < 8:
        raise ConfigError("tomography needs at least 8 angles")


def load(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return build(parse_text(text))


def loads(text):
    return build(parse_text(text))
