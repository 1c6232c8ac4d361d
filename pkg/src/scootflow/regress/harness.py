"""Split, fit every model family, evaluate on the held-out rows, rank."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from scootflow.errors import DomainError, SingularMatrixError
from scootflow.regress.evaluation import EvalReport, evaluate, rank_models
from scootflow.regress.forest import ForestParams, fit_rfr
from scootflow.regress.glm import fit_nbr
from scootflow.regress.matrix import FeatureMatrix, Standardization, standardize, train_test_split
from scootflow.regress.nn import NnConfig, fit_nn
from scootflow.regress.search import grid_search

logger = logging.getLogger(__name__)

MODEL_TAGS = ("NBR", "RFR", "NN")
DEFAULT_NN_GRID = {"batch_size": (16, 64), "epochs": (50, 200)}


@dataclass
class Comparison:
    reports: list[EvalReport]
    models: dict[str, Any]
    standardization: Standardization
    ranked: list[EvalReport]  # standardized-scale reports only, best first
    nbr_dropped: tuple[str, ...] = ()
    nn_grid_scores: tuple = ()
    train_ids: tuple[str, ...] = field(default=(), repr=False)
    test_ids: tuple[str, ...] = field(default=(), repr=False)

    @property
    def best_tag(self) -> str | None:
        return self.ranked[0].model_tag if self.ranked else None


def _fit_nbr_dropping_collinear(train: FeatureMatrix):
    """NBR on raw features; exactly collinear columns are dropped and refit."""
    dropped: list[str] = []
    m = train
    while True:
        try:
            return fit_nbr(m), tuple(dropped)
        except SingularMatrixError as exc:
            bad = [c for c in exc.columns if c in m.column_names]
            if not bad:
                raise
            logger.warning("NBR: dropping collinear column(s) %s", ", ".join(bad))
            dropped.extend(bad)
            m = m.select_columns([c for c in m.column_names if c not in bad])


def compare_models(
    m: FeatureMatrix,
    models: Sequence[str] = MODEL_TAGS,
    seed: int = 0,
    ratio: float = 0.7,
    forest_params: ForestParams = ForestParams(),
    nn_grid: Mapping | Sequence = DEFAULT_NN_GRID,
    nn_hidden: tuple[int, int] = (16, 8),
    nn_learning_rate: float = 0.01,
) -> Comparison:
    """NBR sees raw features and target; the other models see both
    standardized with training statistics, and are ranked on that scale."""
    unknown = [t for t in models if t not in MODEL_TAGS]
    if unknown:
        raise DomainError(f"unknown model tag(s) {unknown}; choose from {MODEL_TAGS}")
    train, test = train_test_split(m, ratio, seed)
    train_z, test_z, state = standardize(train, test)

    reports, fitted = [], {}
    dropped: tuple[str, ...] = ()
    grid_scores: tuple = ()
    for tag in models:
        if tag == "NBR":
            model, dropped = _fit_nbr_dropping_collinear(train)
            pred = model.predict(test.select_columns(model.column_names))
            reports.append(evaluate(pred, test.y, tag, scale="raw"))
        elif tag == "RFR":
            model = fit_rfr(train_z, forest_params, seed)
            reports.append(evaluate(model.predict(test_z), test_z.y, tag))
        else:
            def fit(mm, **kw):
                return fit_nn(mm, NnConfig(nn_hidden, nn_learning_rate, seed=seed, **kw))

            search = grid_search(fit, nn_grid, train_z, seed=seed)
            grid_scores = search.scores
            model = fit(train_z, **search.best)
            reports.append(evaluate(model.predict(test_z), test_z.y, tag))
        fitted[tag] = model

    ranked = rank_models([r for r in reports if r.scale == "standardized"]) if any(
        r.scale == "standardized" for r in reports) else []
    return Comparison(reports, fitted, state, ranked, dropped, grid_scores, train.row_ids, test.row_ids)
