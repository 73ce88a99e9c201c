"""
raingap - Missing Precipitation Recovery

A Python package for filling gaps in 30-minute precipitation records with a
two-step (rain / amount) machine learning model, benchmarked against surface
fitting over neighbouring rain gauges.
"""

__version__ = "1.0.0"

from .dataset import GaugeCatalog, SeriesTable, load_dataset, save_dataset
from .hurdle import HurdleConfig, HurdleRun, run_hurdle, run_regional
from .surface import run_baseline, solve_weights
from .synth import SynthConfig, generate
from .tuning import TunedStore

__all__ = [
    "GaugeCatalog",
    "HurdleConfig",
    "HurdleRun",
    "SeriesTable",
    "SynthConfig",
    "TunedStore",
    "generate",
    "load_dataset",
    "run_baseline",
    "run_hurdle",
    "run_regional",
    "save_dataset",
    "solve_weights",
]
