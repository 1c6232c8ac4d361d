"""Regressors written from scratch plus the train/evaluate/compare harness."""

from scootflow.regress.evaluation import (
    EvalReport,
    ImportanceEntry,
    evaluate,
    feature_importance,
    pearson,
    rank_models,
)
from scootflow.regress.forest import ForestModel, ForestParams, Tree, fit_rfr, fit_tree
from scootflow.regress.glm import NbrModel, deviance, estimate_alpha, fit_nbr, fit_poisson_irls
from scootflow.regress.harness import Comparison, compare_models
from scootflow.regress.matrix import (
    FeatureMatrix,
    Standardization,
    read_matrix_csv,
    standardize,
    train_test_split,
    write_matrix_csv,
)
from scootflow.regress.nn import NnConfig, NnModel, fit_nn, gradient_check, loss_and_grad
from scootflow.regress.search import GridResult, grid_search
from scootflow.regress.serialize import load_model, save_model

__all__ = [
    "Comparison",
    "EvalReport",
    "FeatureMatrix",
    "ForestModel",
    "ForestParams",
    "GridResult",
    "ImportanceEntry",
    "NbrModel",
    "NnConfig",
    "NnModel",
    "Standardization",
    "Tree",
    "compare_models",
    "deviance",
    "estimate_alpha",
    "evaluate",
    "feature_importance",
    "fit_nbr",
    "fit_nn",
    "fit_poisson_irls",
    "fit_rfr",
    "fit_tree",
    "gradient_check",
    "grid_search",
    "load_model",
    "loss_and_grad",
    "pearson",
    "rank_models",
    "read_matrix_csv",
    "save_model",
    "standardize",
    "train_test_split",
    "write_matrix_csv",
]
