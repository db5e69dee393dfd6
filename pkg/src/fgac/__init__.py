"""Fuzzy granular approximation classifier (FGAC).

Learns granularly representable membership degrees by solving structured
LP/QP problems, predicts unseen instances from lower and upper bounds and
explains each prediction by ranked supporting and opposing instances.
"""
from .classifier import FgacModel, FitConfig, OwaPredictionConfig, explain, fit, predict_class, predict_degrees
from .connectives import LUKASIEWICZ, TripletSpec
from .relations import SimilarityConfig, Table
from .solver import Loss

__all__ = ["FgacModel", "FitConfig", "OwaPredictionConfig", "explain", "fit", "predict_class",
           "predict_degrees", "LUKASIEWICZ", "TripletSpec", "SimilarityConfig", "Table", "Loss"]
__version__ = "0.1.0"
