"""Feed-forward regressor: two ReLU hidden layers, linear output, MSE loss,
plain mini-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from scootflow.errors import DomainError, TrainingDivergedError
from scootflow.regress.matrix import FeatureMatrix


@dataclass(frozen=True)
class NnConfig:
    hidden: tuple[int, int] = (16, 8)
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if len(self.hidden) != 2 or min(self.hidden) < 1:
            raise DomainError("the network has exactly two hidden layers of width >= 1")
        if self.batch_size < 1 or self.epochs < 0 or not self.learning_rate > 0:
            raise DomainError(f"invalid training config {self}")


Params = list[tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True, eq=False)
class NnModel:
    column_names: tuple[str, ...]
    params: Params  # (W, b) per layer, W shaped (fan_in, fan_out)
    config: NnConfig
    loss_trace: tuple[float, ...] = field(default=())
    tag: str = "NN"

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.params[0][0].shape[0],) + tuple(W.shape[1] for W, _ in self.params)

    def predict(self, X) -> np.ndarray:
        X = X.X if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)
        return forward(self.params, X)[0]


def init_params(sizes, rng: np.random.Generator) -> Params:
    """He-uniform weights, zero biases."""
    out = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / fan_in)
        out.append((rng.uniform(-lim, lim, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return out


def forward(params: Params, X: np.ndarray):
    """Output vector plus the cached activations backprop needs."""
    acts = [X]
    h = X
    for i, (W, b) in enumerate(params):
        z = h @ W + b
        h = z if i == len(params) - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return h[:, 0], acts


def loss_and_grad(params: Params, X: np.ndarray, y: np.ndarray) -> tuple[float, Params]:
    """Mean squared error and its exact gradient."""
    pred, acts = forward(params, X)
    resid = pred - y
    loss = float(np.mean(resid * resid))
    delta = (2.0 / len(y)) * resid[:, None]
    grads: Params = []
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        grads.append((acts[i].T @ delta, delta.sum(axis=0)))
        if i:
            delta = (delta @ W.T) * (acts[i] > 0)
    return loss, grads[::-1]


def _flatten(params: Params) -> np.ndarray:
    return np.concatenate([a.ravel() for W, b in params for a in (W, b)])


def _unflatten(vec: np.ndarray, like: Params) -> Params:
    out, k = [], 0
    for W, b in like:
        Wn = vec[k:k + W.size].reshape(W.shape).copy()
        k += W.size
        bn = vec[k:k + b.size].copy()
        k += b.size
        out.append((Wn, bn))
    return out


def _relu_pattern(params: Params, X: np.ndarray) -> list[np.ndarray]:
    _, acts = forward(params, X)
    return [a > 0 for a in acts[1:-1]]


def gradient_check(
    params: Params,
    X: np.ndarray,
    y: np.ndarray,
    steps: tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
) -> float:
    """Max elementwise relative error between backprop and central differences.

    With the ReLU on/off pattern held fixed, the loss is exactly quadratic in
    any single parameter, so a central difference has no truncation error.
    Each coordinate therefore uses the largest step in ``steps`` that leaves
    the pattern unchanged at both probes, which keeps roundoff small.
    Entries where both gradients are below 1e-10 are compared against that
    floor, so exact zeros from dead units count as agreement.
    """
    _, grads = loss_and_grad(params, X, y)
    analytic = _flatten(grads)
    theta = _flatten(params)
    base = _relu_pattern(params, X)
    numeric = np.empty_like(theta)
    for k in range(len(theta)):
        old = theta[k]
        for h in steps:
            theta[k] = old + h
            plus = _unflatten(theta, params)
            theta[k] = old - h
            minus = _unflatten(theta, params)
            theta[k] = old
            same = all(
                np.array_equal(a, b) and np.array_equal(a, c)
                for a, b, c in zip(base, _relu_pattern(plus, X), _relu_pattern(minus, X))
            )
            if same:
                break
        lp, _ = loss_and_grad(plus, X, y)
        lm, _ = loss_and_grad(minus, X, y)
        numeric[k] = (lp - lm) / (2 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-10)
    return float(np.max(np.abs(analytic - numeric) / denom))


def fit_nn(m: FeatureMatrix, config: NnConfig = NnConfig()) -> NnModel:
    """Train on a standardized matrix; deterministic given ``config.seed``."""
    # overflow is detected below and reported as divergence
    with np.errstate(over="ignore", invalid="ignore"):
        return _train(m, config)


def _train(m: FeatureMatrix, config: NnConfig) -> NnModel:
    rng = np.random.default_rng(config.seed)
    params = init_params((m.p, *config.hidden, 1), rng)
    X, y = m.X, m.y
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(m.n)
        for start in range(0, m.n, config.batch_size):
            rows = order[start:start + config.batch_size]
            loss, grads = loss_and_grad(params, X[rows], y[rows])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became {loss} in epoch {epoch}; try a smaller learning rate "
                    f"than {config.learning_rate}"
                )
            params = [
                (W - config.learning_rate * gW, b - config.learning_rate * gb)
                for (W, b), (gW, gb) in zip(params, grads)
            ]
        epoch_loss = float(np.mean((forward(params, X)[0] - y) ** 2))
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(
                f"loss became {epoch_loss} in epoch {epoch}; try a smaller learning rate "
                f"than {config.learning_rate}"
            )
        trace.append(epoch_loss)
    return NnModel(m.column_names, params, config, tuple(trace))

