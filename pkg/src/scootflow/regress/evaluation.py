"""Error metrics, model ranking, Pearson correlation and importance reporting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from scootflow.errors import DomainError
from scootflow.regress.forest import ForestModel
from scootflow.regress.matrix import FeatureMatrix


@dataclass(frozen=True)
class EvalReport:
    """Test-set errors.  ``mape`` is a fraction (0.375, not 37.5) over rows
    with a non-zero actual; ``n_mape_excluded`` counts the rest.  ``scale``
    says whether errors are in standardized or raw target units."""

    model_tag: str
    mae: float
    mse: float
    rmse: float
    mape: float
    n: int
    n_mape_excluded: int = 0
    scale: str = "standardized"


def evaluate(predictions, actuals, model_tag: str = "", scale: str = "standardized") -> EvalReport:
    pred = np.asarray(predictions, dtype=float).ravel()
    act = np.asarray(actuals, dtype=float).ravel()
    if len(pred) != len(act):
        raise DomainError(f"{len(pred)} predictions for {len(act)} actuals")
    if not len(act):
        raise DomainError("nothing to evaluate")
    err = pred - act
    mse = float(np.mean(err * err))
    nz = act != 0
    # MAPE is undefined when every actual is zero
    # tiny nonzero actuals can push a ratio to inf, which is the honest value
    with np.errstate(over="ignore"):
        mape = float(np.mean(np.abs(err[nz] / act[nz]))) if nz.any() else math.nan
    return EvalReport(
        model_tag,
        float(np.mean(np.abs(err))),
        mse,
        math.sqrt(mse),
        mape,
        len(act),
        int((~nz).sum()),
        scale,
    )


def rank_models(reports: Sequence[EvalReport]) -> list[EvalReport]:
    """Best first by MAE, then MSE, then RMSE.  MAPE is reported, not ranked."""
    if not reports:
        raise DomainError("no reports to rank")
    return sorted(reports, key=lambda r: (r.mae, r.mse, r.rmse))


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("pearson needs two 1-D arrays of equal length")
    if len(x) < 2:
        raise DomainError("pearson needs at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DomainError("correlation undefined for a zero-variance input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class ImportanceEntry:
    feature: str
    score: float
    pearson_r: float


def feature_importance(forest: ForestModel, matrix: FeatureMatrix) -> list[ImportanceEntry]:
    """Impurity importance per feature with the raw feature-target correlation.

    Sorted by score, highest first, ties in column order.  A feature that is
    constant in ``matrix`` has no defined correlation and gets ``pearson_r = 0``.
    """
    scores = forest.importances()
    cols = matrix.select_columns(forest.column_names)
    out = []
    for j, name in enumerate(forest.column_names):
        try:
            r = pearson(cols.X[:, j], cols.y)
        except DomainError:
            r = 0.0
        out.append(ImportanceEntry(name, float(scores[j]), r))
    order = sorted(range(len(out)), key=lambda j: (-out[j].score, j))
    return [out[j] for j in order]
