"""Impulsive delayed Lotka-Volterra systems on the reals and on uniform lattices."""
from .analysis import analyze, check_hypotheses, permanence_bounds, stability_certificate
from .model import bundled_model, compute_stats, load_model, load_model_file
from .sim import SimConfig, empirical_bounds, simulate, stability_gap
from .timescale import TimeScaleSpec

__version__ = "0.1.0"

__all__ = [
    "TimeScaleSpec", "load_model", "load_model_file", "bundled_model", "compute_stats",
    "permanence_bounds", "stability_certificate", "check_hypotheses", "analyze",
    "SimConfig", "simulate", "empirical_bounds", "stability_gap", "__version__",
]
