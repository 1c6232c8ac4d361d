"""Design matrices, seeded train/test splitting, and standardization."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from scootflow.errors import DomainError, SchemaError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Standardization:
    """Per-column train mean/std, plus the target's when it was scaled."""

    columns: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    target_mean: float = 0.0
    target_std: float = 1.0

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.std + self.mean

    def transform_target(self, y: np.ndarray) -> np.ndarray:
        return (y - self.target_mean) / self.target_std

    def inverse_target(self, z: np.ndarray) -> np.ndarray:
        return z * self.target_std + self.target_mean


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    column_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    row_ids: tuple[str, ...] = ()
    standardization: Standardization | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        names = tuple(self.column_names)
        if X.ndim != 2:
            X = X.reshape(len(y), -1)
        if X.shape[1] != len(names):
            raise DomainError(f"{X.shape[1]} columns but {len(names)} names")
        if X.shape[0] != len(y):
            raise DomainError(f"{X.shape[0]} rows but {len(y)} targets")
        if np.isnan(X).any() or np.isnan(y).any():
            raise DomainError("design matrix contains NaN")
        ids = tuple(self.row_ids) or tuple(str(i) for i in range(len(y)))
        if len(ids) != len(y):
            raise DomainError("row_ids length does not match rows")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "row_ids", ids)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return len(self.column_names)

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return replace(self, X=self.X[idx], y=self.y[idx],
                       row_ids=tuple(self.row_ids[i] for i in idx))

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.column_names.index(name)]

    def select_columns(self, names) -> "FeatureMatrix":
        idx = [self.column_names.index(c) for c in names]
        return replace(self, column_names=tuple(names), X=self.X[:, idx])

    def with_target(self, y) -> "FeatureMatrix":
        return replace(self, y=np.asarray(y, dtype=float))


def train_test_split(m: FeatureMatrix, ratio: float = 0.7, seed: int = 0):
    """Seeded uniform shuffle; the first round(ratio * n) rows train."""
    if m.n < 10:
        raise DomainError(f"need at least 10 rows to split, got {m.n}")
    if not 0 < ratio < 1:
        raise DomainError("ratio must be in (0, 1)")
    perm = np.random.default_rng(seed).permutation(m.n)
    n_train = int(np.floor(ratio * m.n + 0.5))
    return m.take(perm[:n_train]), m.take(perm[n_train:])


def standardize(train: FeatureMatrix, test: FeatureMatrix, standardize_target: bool = True):
    """z-score both matrices with training statistics.

    Columns constant on the training rows are dropped (with a warning).
    Returns ``(train_z, test_z, state)``.
    """
    std = train.X.std(axis=0, ddof=0)
    keep = std > 0
    if not keep.any():
        raise DomainError("every column is constant on the training rows")
    if not keep.all():
        dropped = [c for c, k in zip(train.column_names, keep) if not k]
        logger.warning("dropping constant column(s): %s", ", ".join(dropped))
    names = tuple(c for c, k in zip(train.column_names, keep) if k)
    mean = train.X[:, keep].mean(axis=0)
    std = std[keep]
    t_mean, t_std = 0.0, 1.0
    if standardize_target:
        t_mean = float(train.y.mean())
        t_std = float(train.y.std()) or 1.0
    state = Standardization(names, mean, std, t_mean, t_std)

    def apply(m):
        return FeatureMatrix(
            names,
            state.transform(m.X[:, keep]),
            state.transform_target(m.y),
            m.row_ids,
            state,
        )

    return apply(train), apply(test), state


def write_matrix_csv(path: Path | str, m: FeatureMatrix, header_comment: str = "",
                     id_column: str = "row_id", target_column: str = "target") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([id_column, *m.column_names, target_column])
        for rid, row, t in zip(m.row_ids, m.X, m.y):
            w.writerow([rid, *(repr(float(v)) for v in row), repr(float(t))])


def read_matrix_csv(path: Path | str, id_column: str = "row_id",
                    target_column: str = "target") -> FeatureMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if not header or header[0] != id_column or header[-1] != target_column:
            raise SchemaError(
                f"{path}: expected header '{id_column},...,{target_column}', got {header}"
            )
        ids, rows, ys = [], [], []
        for rec in reader:
            ids.append(rec[0])
            rows.append([float(v) for v in rec[1:-1]])
            ys.append(float(rec[-1]))
    return FeatureMatrix(tuple(header[1:-1]), np.array(rows).reshape(len(ys), -1), ys, ids)
