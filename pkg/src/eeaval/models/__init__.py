"""Probabilistic binary classifiers, tuning and temporal cross-fitting."""
from .persist import dumps_model, load_model, loads_model, save_model
from .zoo import (ALGORITHMS, ModelSpec, PredictionSet, TrainedModel, cross_fit, cv_scores,
                  default_grid, fit, fit_arrays, predict_proba, tune_cv, zoo_specs)

__all__ = [
    "ALGORITHMS", "ModelSpec", "PredictionSet", "TrainedModel", "cross_fit", "cv_scores",
    "default_grid", "fit", "fit_arrays", "predict_proba", "tune_cv", "zoo_specs",
    "dumps_model", "loads_model", "save_model", "load_model",
]
