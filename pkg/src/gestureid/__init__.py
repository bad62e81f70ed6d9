"""Performer identification from hand-gesture recordings."""

__version__ = "0.1.0"

from .dataset import Corpus, DeviceProfile, Recording, SyntheticSpec, generate_synthetic, load_corpus, save_corpus
from .errors import (ConfigError, ConvergenceError, CorpusFormatError, DataError, GestureIdError,
                     NumericalError)
from .evaluation import CvSpec, GridSpec, ScenarioSpec, run_experiment

__all__ = [
    "__version__", "Corpus", "DeviceProfile", "Recording", "SyntheticSpec", "generate_synthetic",
    "load_corpus", "save_corpus", "ConfigError", "ConvergenceError", "CorpusFormatError", "DataError",
    "GestureIdError", "NumericalError", "CvSpec", "GridSpec", "ScenarioSpec", "run_experiment",
]
