"""Count regression: Poisson and NB2 negative binomial with a log link, via IRLS."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from scootflow.errors import DomainError, SingularMatrixError
from scootflow.regress.matrix import FeatureMatrix

MAX_ITER = 100
DEVIANCE_TOL = 1e-8
_ETA_CLIP = 50.0


@dataclass(frozen=True, eq=False)
class NbrModel:
    """Fitted log-link count model; ``alpha == 0`` is the Poisson case."""

    column_names: tuple[str, ...]
    coef: np.ndarray  # intercept first
    alpha: float
    fit_trace: tuple[float, ...] = ()
    converged: bool = True
    tag: str = field(default="NBR", compare=False)

    def predict(self, X) -> np.ndarray:
        X = X.X if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)
        eta = self.coef[0] + X @ self.coef[1:]
        return np.exp(np.clip(eta, -_ETA_CLIP, _ETA_CLIP))

    @property
    def n_iter(self) -> int:
        return len(self.fit_trace)


def deviance(y: np.ndarray, mu: np.ndarray, alpha: float = 0.0) -> float:
    """Poisson (alpha = 0) or NB2 deviance."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ylog = np.where(y > 0, y * np.log(y / mu), 0.0)
    if alpha == 0:
        return float(2 * np.sum(ylog - (y - mu)))
    inv = 1.0 / alpha
    return float(2 * np.sum(ylog - (y + inv) * np.log((1 + alpha * y) / (1 + alpha * mu))))


def _design(m: FeatureMatrix) -> np.ndarray:
    return np.column_stack([np.ones(m.n), m.X])


def _check_rank(X1: np.ndarray, names: tuple[str, ...]) -> None:
    scale = np.abs(X1).max(axis=0)
    scale[scale == 0] = 1.0
    Xs = X1 / scale
    if np.linalg.matrix_rank(Xs) == Xs.shape[1]:
        return
    labels = ("(intercept)",) + tuple(names)
    kept, collinear = [], []
    for j in range(Xs.shape[1]):
        if np.linalg.matrix_rank(Xs[:, kept + [j]]) > len(kept):
            kept.append(j)
        else:
            collinear.append(labels[j])
    raise SingularMatrixError(collinear)


def _irls(X1, y, alpha, beta0=None, max_iter=MAX_ITER, tol=DEVIANCE_TOL):
    if beta0 is None:
        mu = 0.5 * (y + y.mean())
        eta = np.log(mu)
    else:
        eta = np.clip(X1 @ beta0, -_ETA_CLIP, _ETA_CLIP)
        mu = np.exp(eta)
    beta = beta0
    dev = np.inf
    trace = []
    converged = False
    for _ in range(max_iter):
        w = mu / (1.0 + alpha * mu)
        z = eta + (y - mu) / mu
        sw = np.sqrt(w)
        cand, *_ = np.linalg.lstsq(X1 * sw[:, None], z * sw, rcond=None)
        new_dev = deviance(y, np.exp(np.clip(X1 @ cand, -_ETA_CLIP, _ETA_CLIP)), alpha)
        if beta is not None:
            # step-halving keeps the deviance sequence monotone
            step = 1.0
            while not new_dev <= dev and step > 1e-10:
                step *= 0.5
                trial = beta + step * (cand - beta)
                new_dev = deviance(y, np.exp(np.clip(X1 @ trial, -_ETA_CLIP, _ETA_CLIP)), alpha)
                cand = trial if new_dev <= dev else cand
            if not new_dev <= dev:
                converged = True
                break
        beta = cand
        eta = np.clip(X1 @ beta, -_ETA_CLIP, _ETA_CLIP)
        mu = np.exp(eta)
        trace.append(new_dev)
        if abs(dev - new_dev) < tol:
            converged = True
            break
        dev = new_dev
    return beta, tuple(trace), converged


def _check_counts(m: FeatureMatrix) -> None:
    if np.any(m.y < 0):
        raise DomainError("count models need a non-negative target")
    if not np.any(m.y > 0):
        raise DomainError("target is all zero; a log-link model has no finite fit")


def fit_poisson_irls(m: FeatureMatrix, max_iter: int = MAX_ITER, tol: float = DEVIANCE_TOL) -> NbrModel:
    _check_counts(m)
    X1 = _design(m)
    _check_rank(X1, m.column_names)
    beta, trace, ok = _irls(X1, m.y, 0.0, max_iter=max_iter, tol=tol)
    return NbrModel(m.column_names, beta, 0.0, trace, ok, tag="Poisson")


def estimate_alpha(y, mu) -> float:
    """NB2 dispersion from the auxiliary no-intercept OLS of
    ((y - mu)^2 - y) / mu on mu; negative estimates clamp to 0."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != y.shape or not np.all(np.isfinite(mu)) or np.any(mu <= 0):
        raise DomainError("fitted means must be positive and finite")
    aux = ((y - mu) ** 2 - y) / mu
    alpha = float(np.dot(aux, mu) / np.dot(mu, mu))
    return max(0.0, alpha)


def fit_nbr(
    m: FeatureMatrix,
    alpha: float | None = None,
    max_iter: int = MAX_ITER,
    tol: float = DEVIANCE_TOL,
) -> NbrModel:
    """NB2 regression: Poisson IRLS, auxiliary-OLS alpha, then IRLS at fixed alpha.

    Pass ``alpha`` to skip estimation.
    """
    pois = fit_poisson_irls(m, max_iter, tol)
    if alpha is None:
        alpha = estimate_alpha(m.y, pois.predict(m))
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    beta, trace, ok = _irls(_design(m), m.y, alpha, beta0=pois.coef, max_iter=max_iter, tol=tol)
    return NbrModel(m.column_names, beta, alpha, trace, ok)
