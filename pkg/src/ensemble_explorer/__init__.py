"""Budgeted exploration of feature transforms and estimators, guided by a
linear Q-function, with ensembles chosen by greedy ambiguity-aware selection."""

from .data import Dataset, FeatureColumn, FoldPlan, Target, holdout_split, load_csv, make_folds
from .ensemble import brute_force_select, ege, greedy_select
from .estimators import PredictionVector, cv_predict
from .exploration import Clock, Exploration, RunConfig, RunResult, run
from .metrics import auc, error_reduction, rmse
from .policy import PolicyWeights, default_policy, load_policy, save_policy, train

__version__ = "0.1.0"

__all__ = [
    "Clock", "Dataset", "Exploration", "FeatureColumn", "FoldPlan", "PolicyWeights",
    "PredictionVector", "RunConfig", "RunResult", "Target", "auc", "brute_force_select",
    "cv_predict", "default_policy", "ege", "error_reduction", "greedy_select", "holdout_split",
    "load_csv", "load_policy", "make_folds", "rmse", "run", "save_policy", "train",
]
