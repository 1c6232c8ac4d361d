"""Exhaustive hyperparameter grid search on a held-out slice of the training rows."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from scootflow.errors import DomainError, TrainingDivergedError
from scootflow.regress.matrix import FeatureMatrix

logger = logging.getLogger(__name__)


def expand_grid(grid: Mapping[str, Sequence] | Sequence[Mapping[str, Any]]) -> list[dict]:
    """A dict of value lists becomes their product in key order; a list of
    dicts is taken as-is."""
    if isinstance(grid, Mapping):
        keys = list(grid)
        return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    return [dict(g) for g in grid]


@dataclass(frozen=True)
class GridResult:
    best: dict
    scores: tuple[tuple[dict, float], ...]  # (params, validation MSE) in grid order


def grid_search(
    fit_fn: Callable[..., Any],
    grid,
    train: FeatureMatrix,
    validation_fraction: float = 0.2,
    seed: int = 0,
) -> GridResult:
    """Pick the grid point with the lowest validation squared error.

    ``fit_fn(matrix, **params)`` must return an object with ``predict``.
    Only ``train`` is ever seen; ties go to the earlier grid point.
    """
    points = expand_grid(grid)
    if not points:
        raise DomainError("empty hyperparameter grid")
    if not 0 < validation_fraction < 1:
        raise DomainError("validation_fraction must be in (0, 1)")
    if train.n < 2:
        raise DomainError("grid search needs at least 2 training rows")
    perm = np.random.default_rng(seed).permutation(train.n)
    n_val = min(train.n - 1, max(1, int(round(validation_fraction * train.n))))
    val, fit = train.take(perm[:n_val]), train.take(perm[n_val:])

    scores = []
    best, best_score = None, math.inf
    for params in points:
        try:
            model = fit_fn(fit, **params)
            err = model.predict(val) - val.y
            score = float(np.mean(err * err))
        except TrainingDivergedError as exc:
            logger.warning("grid point %s diverged: %s", params, exc)
            score = math.inf
        if not math.isfinite(score):
            score = math.inf
        scores.append((params, score))
        if score < best_score:
            best, best_score = params, score
    if best is None:
        raise DomainError("every grid point diverged")
    return GridResult(best, tuple(scores))
