"""Opto-mechanical interferometer readout: noise budget, homodyne readout,
spectral analysis and quadrature tomography."""
from .homodyne import GaussianState, HomodyneConfig, QuadratureSamples
from .interferometer import EfficiencyBudget, InterferometerConfig
from .physics import CONSTANTS, MechanicalMode, MembraneOptics
from .spectra import CalibrationMarker, SpectralDensity
from .timeseries import TimeSeries

__all__ = [
    "CONSTANTS",
    "CalibrationMarker",
    "EfficiencyBudget",
    "GaussianState",
    "HomodyneConfig",
    "InterferometerConfig",
    "MechanicalMode",
    "MembraneOptics",
    "QuadratureSamples",
    "SpectralDensity",
    "TimeSeries",
]
__version__ = "0.1.0"
