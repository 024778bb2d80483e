"""Conditional branch predictor families and the simulation driver."""

from .base import ConditionalPredictor
from .ensemble import EnsembleConfig, TageSCL, ensemble_config
from .history import FoldedRegister, GlobalHistory, fold_history
from .loop import LoopPredictor
from .perceptron import Perceptron
from .presets import PRESET_NAMES, estimate_storage, load_predictor_config, make_predictor
from .sc import CorrectorConfig, StatisticalCorrector
from .simple import AlwaysTaken, Bimodal, Gshare
from .simulate import MispredictionStream, SimRecord, simulate
from .tage import AllocationStats, Tage, TageConfig, TageLookup

__all__ = [
    "AllocationStats",
    "AlwaysTaken",
    "Bimodal",
    "ConditionalPredictor",
    "CorrectorConfig",
    "EnsembleConfig",
    "FoldedRegister",
    "GlobalHistory",
    "Gshare",
    "LoopPredictor",
    "MispredictionStream",
    "Perceptron",
    "PRESET_NAMES",
    "SimRecord",
    "StatisticalCorrector",
    "Tage",
    "TageConfig",
    "TageLookup",
    "TageSCL",
    "ensemble_config",
    "estimate_storage",
    "fold_history",
    "load_predictor_config",
    "make_predictor",
    "simulate",
]
