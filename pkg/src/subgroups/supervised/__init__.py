from ..data import DesignMatrix
from .crossval import ClassifierSpec, EvalResult, RepResult, comparison_csv, crossval, split_indices
from .forest import DecisionTree, RandomForest
from .linear import LDA, LinearSVM, LogisticClassifier, Majority
from .logistic import (
    INTERCEPT,
    LEGEND,
    LogisticFit,
    SignificanceTable,
    fit_logistic,
    log_likelihood,
    per_cluster_significance,
    score,
    stars,
)
from .metrics import accuracy, auc_roc

__all__ = [
    "DesignMatrix",
    "ClassifierSpec",
    "EvalResult",
    "RepResult",
    "comparison_csv",
    "crossval",
    "split_indices",
    "DecisionTree",
    "RandomForest",
    "LDA",
    "LinearSVM",
    "LogisticClassifier",
    "Majority",
    "INTERCEPT",
    "LEGEND",
    "LogisticFit",
    "SignificanceTable",
    "fit_logistic",
    "log_likelihood",
    "per_cluster_significance",
    "score",
    "stars",
    "accuracy",
    "auc_roc",
]
