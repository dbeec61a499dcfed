"""Interpretable classification with forest-extracted rules and sparse relaxed logistic fitting."""

from .classifier import (FitError, ModelFormatError, ModelVersionError, SR4FitClassifier,
                         load_model, rule_report, save_model)
from .dataset import (DataError, Dataset, SplitSpec, Standardizer, load_csv, split_indices,
                      train_test_split)
from .experiment import ConfigError, ExperimentConfig, grid_search, run_trials, summarize
from .forest import ForestConfig, train_forest
from .metrics import (classification_metrics, confusion_counts, dice_sorensen,
                      interpretability_score, paired_t_test, stability)
from .rules import Condition, Rule, RuleFeatureTransformer, extract_rules, rule_matrix
from .sr3 import HyperParams, OptimizerConfig, fit_sr3, prune, soft_threshold

__version__ = "0.1.0"

__all__ = [
    "SR4FitClassifier", "FitError", "ModelFormatError", "ModelVersionError", "load_model",
    "save_model", "rule_report", "DataError", "Dataset", "SplitSpec", "Standardizer", "load_csv",
    "split_indices", "train_test_split", "ConfigError", "ExperimentConfig", "grid_search",
    "run_trials", "summarize", "ForestConfig", "train_forest", "classification_metrics",
    "confusion_counts", "dice_sorensen", "interpretability_score", "paired_t_test", "stability",
    "Condition", "Rule", "RuleFeatureTransformer", "extract_rules", "rule_matrix", "HyperParams",
    "OptimizerConfig", "fit_sr3", "prune", "soft_threshold",
]
