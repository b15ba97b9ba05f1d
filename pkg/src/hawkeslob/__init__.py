"""Order-flow toolkit: mutually exciting point-process simulation, an embedded
price-time-priority matching engine, event reclassification, maximum-likelihood
calibration and residual diagnostics."""

__version__ = "0.1.0"

from .hawkes import (
    EventStream,
    HawkesParams,
    branching_ratios,
    default_params,
    half_life,
    intensity_at,
    simulate_thinning,
    spectral_radius,
)
from .lob import LimitOrderBook, MarketDataLog, Order, Trade, microstructure_series
from .injection import VolumeModel, run_simulation, sample_volume
from .classification import ClassifiedStream, classify_simulation
from .calibration import CalibrationResult, deviation_measures, log_likelihood, mle_fit
from .diagnostics import DiagnosticsReport, run_diagnostics

__all__ = [
    "__version__",
    "EventStream",
    "HawkesParams",
    "branching_ratios",
    "default_params",
    "half_life",
    "intensity_at",
    "simulate_thinning",
    "spectral_radius",
    "LimitOrderBook",
    "MarketDataLog",
    "Order",
    "Trade",
    "microstructure_series",
    "VolumeModel",
    "run_simulation",
    "sample_volume",
    "ClassifiedStream",
    "classify_simulation",
    "CalibrationResult",
    "deviation_measures",
    "log_likelihood",
    "mle_fit",
    "DiagnosticsReport",
    "run_diagnostics",
]
