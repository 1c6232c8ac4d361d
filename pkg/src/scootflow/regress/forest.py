"""Bootstrap random forest of CART regression trees (squared-error impurity)."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from scootflow.errors import DomainError, NotFittedError
from scootflow.regress.matrix import FeatureMatrix

LEAF = -1


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 20
    min_samples_leaf: int = 17
    min_samples_split: int = 10
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_estimators < 1 or self.min_samples_leaf < 1 or self.min_samples_split < 2:
            raise DomainError(f"invalid forest hyperparameters {self}")


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays; ``feature[i] == LEAF`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    impurity: np.ndarray
    n_samples: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(np.asarray(X, dtype=float))]

    def raw_importances(self, p: int) -> np.ndarray:
        """Impurity decrease per feature, weighted by node sample counts."""
        out = np.zeros(p)
        for i in np.flatnonzero(self.feature != LEAF):
            l, r = self.left[i], self.right[i]
            gain = (
                self.n_samples[i] * self.impurity[i]
                - self.n_samples[l] * self.impurity[l]
                - self.n_samples[r] * self.impurity[r]
            )
            out[self.feature[i]] += gain
        return out / self.n_samples[0]


def best_split(x: np.ndarray, y: np.ndarray, min_leaf: int) -> tuple[float, float] | None:
    """Best midpoint threshold on one feature as (score, threshold).

    The score is sum_L^2/n_L + sum_R^2/n_R, which is maximal exactly where the
    summed child squared error is minimal.  Ties go to the lowest threshold.
    """
    res = best_splits(x[:, None], y, min_leaf)
    return None if res is None else (res[0], res[2])


def best_splits(X: np.ndarray, y: np.ndarray, min_leaf: int) -> tuple[float, int, float] | None:
    """Best (score, feature, threshold) over all columns of ``X``.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    n, p = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    csum = np.cumsum(y[order], axis=0)
    total = csum[-1]
    n_left = np.arange(1, n)[:, None]
    ok = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not ok.any():
        return None
    sl = csum[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(ok, sl * sl / n_left + (total - sl) ** 2 / (n - n_left), -np.inf)
    # column-major flattening makes argmax honour feature order first
    flat = int(np.argmax(score.T))
    j, pos = divmod(flat, n - 1)
    lo, hi = xs[pos, j], xs[pos + 1, j]
    thr = 0.5 * (lo + hi)
    # guard against the midpoint rounding up onto the right-hand value
    if thr >= hi:
        thr = lo
    return float(score[pos, j]), j, float(thr)


def fit_tree(X: np.ndarray, y: np.ndarray, min_samples_leaf: int = 1, min_samples_split: int = 2) -> Tree:
    """Greedy CART on all features; ties go to the lowest feature index."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    feature, threshold, left, right, value, impurity, count = [], [], [], [], [], [], []

    def new_node(rows):
        yy = y[rows]
        feature.append(LEAF)
        threshold.append(np.nan)
        left.append(LEAF)
        right.append(LEAF)
        lo, hi = yy.min(), yy.max()
        if lo == hi:
            value.append(float(lo))
            impurity.append(0.0)
        else:
            # clip so summation roundoff never leaves the node's range
            mean = float(np.clip(yy.mean(), lo, hi))
            value.append(mean)
            impurity.append(float(np.mean((yy - mean) ** 2)))
        count.append(len(rows))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)))]
    while stack:
        node, rows = stack.pop()
        if len(rows) < min_samples_split or len(rows) < 2 * min_samples_leaf or impurity[node] <= 0:
            continue
        best = best_splits(X[rows], y[rows], min_samples_leaf)
        if best is None:
            continue
        _, j, thr = best
        mask = X[rows, j] <= thr
        feature[node], threshold[node] = j, thr
        l_rows, r_rows = rows[mask], rows[~mask]
        left[node] = new_node(l_rows)
        right[node] = new_node(r_rows)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], r_rows))
        stack.append((left[node], l_rows))

    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=float),
        np.array(impurity, dtype=float),
        np.array(count, dtype=np.int64),
    )


@dataclass(frozen=True, eq=False)
class ForestModel:
    column_names: tuple[str, ...]
    trees: tuple[Tree, ...]
    params: ForestParams
    seed: int
    tag: str = "RFR"

    def predict(self, X) -> np.ndarray:
        if not self.trees:
            raise NotFittedError("forest has no trees")
        X = X.X if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def importances(self) -> np.ndarray:
        """Mean decrease in impurity, normalized per tree then across trees.

        Trees that never split carry no information and are left out of the
        average; if no tree split at all, every score is 0.
        """
        if not self.trees:
            raise NotFittedError("forest has no trees")
        p = len(self.column_names)
        per_tree = []
        for t in self.trees:
            raw = t.raw_importances(p)
            s = raw.sum()
            if t.node_count > 1 and s > 0:
                per_tree.append(raw / s)
        if not per_tree:
            return np.zeros(p)
        mean = np.mean(per_tree, axis=0)
        return mean / mean.sum()


def tree_seeds(seed: int, n_estimators: int) -> list[np.random.SeedSequence]:
    """One independent seed per tree, so results do not depend on scheduling."""
    return np.random.SeedSequence(seed).spawn(n_estimators)


def bootstrap_rows(seed_seq: np.random.SeedSequence, n: int) -> np.ndarray:
    return np.random.default_rng(seed_seq).integers(0, n, size=n)


def fit_rfr(
    m: FeatureMatrix,
    params: ForestParams = ForestParams(),
    seed: int = 0,
    n_jobs: int = 1,
) -> ForestModel:
    if m.n <= params.min_samples_split:
        raise DomainError(
            f"random forest needs more than {params.min_samples_split} rows, got {m.n}"
        )

    def grow(ss):
        rows = bootstrap_rows(ss, m.n) if params.bootstrap else np.arange(m.n)
        return fit_tree(m.X[rows], m.y[rows], params.min_samples_leaf, params.min_samples_split)

    seeds = tree_seeds(seed, params.n_estimators)
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = tuple(pool.map(grow, seeds))
    else:
        trees = tuple(grow(ss) for ss in seeds)
    return ForestModel(m.column_names, trees, params, seed)
