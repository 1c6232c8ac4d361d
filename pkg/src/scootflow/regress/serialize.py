"""Versioned JSON model artifacts.

Floats are written with ``repr`` precision, so a load reproduces predictions
bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from scootflow.errors import SchemaError
from scootflow.regress.forest import ForestModel, ForestParams, Tree
from scootflow.regress.glm import NbrModel
from scootflow.regress.matrix import Standardization
from scootflow.regress.nn import NnConfig, NnModel

FORMAT = "scootflow-model"
VERSION = 1


def _tree_to_dict(t: Tree) -> dict:
    return {
        "feature": t.feature.tolist(),
        "threshold": [None if np.isnan(v) else float(v) for v in t.threshold],
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "value": t.value.tolist(),
        "impurity": t.impurity.tolist(),
        "n_samples": t.n_samples.tolist(),
    }


def _tree_from_dict(d: dict) -> Tree:
    return Tree(
        np.array(d["feature"], dtype=np.int64),
        np.array([np.nan if v is None else v for v in d["threshold"]], dtype=float),
        np.array(d["left"], dtype=np.int64),
        np.array(d["right"], dtype=np.int64),
        np.array(d["value"], dtype=float),
        np.array(d["impurity"], dtype=float),
        np.array(d["n_samples"], dtype=np.int64),
    )


def model_to_dict(model, standardization: Standardization | None = None) -> dict:
    out: dict = {"format": FORMAT, "version": VERSION, "columns": list(model.column_names)}
    if isinstance(model, NbrModel):
        out.update(kind="nbr", tag=model.tag, coef=model.coef.tolist(), alpha=model.alpha,
                   fit_trace=list(model.fit_trace), converged=model.converged)
    elif isinstance(model, ForestModel):
        p = model.params
        out.update(
            kind="forest",
            seed=model.seed,
            params={"n_estimators": p.n_estimators, "min_samples_leaf": p.min_samples_leaf,
                    "min_samples_split": p.min_samples_split, "bootstrap": p.bootstrap},
            trees=[_tree_to_dict(t) for t in model.trees],
        )
    elif isinstance(model, NnModel):
        c = model.config
        out.update(
            kind="nn",
            config={"hidden": list(c.hidden), "learning_rate": c.learning_rate,
                    "batch_size": c.batch_size, "epochs": c.epochs, "seed": c.seed},
            layers=[{"W": W.tolist(), "b": b.tolist()} for W, b in model.params],
            loss_trace=list(model.loss_trace),
        )
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    if standardization is not None:
        s = standardization
        out["standardization"] = {
            "columns": list(s.columns), "mean": s.mean.tolist(), "std": s.std.tolist(),
            "target_mean": s.target_mean, "target_std": s.target_std,
        }
    return out


def model_from_dict(d: dict):
    """Returns ``(model, standardization or None)``."""
    if d.get("format") != FORMAT:
        raise SchemaError(f"not a {FORMAT} artifact")
    if d.get("version") != VERSION:
        raise SchemaError(f"unsupported artifact version {d.get('version')}")
    cols = tuple(d["columns"])
    kind = d.get("kind")
    if kind == "nbr":
        model = NbrModel(cols, np.array(d["coef"]), d["alpha"], tuple(d["fit_trace"]),
                         d["converged"], d.get("tag", "NBR"))
    elif kind == "forest":
        model = ForestModel(cols, tuple(_tree_from_dict(t) for t in d["trees"]),
                            ForestParams(**d["params"]), d["seed"])
    elif kind == "nn":
        c = d["config"]
        cfg = NnConfig(tuple(c["hidden"]), c["learning_rate"], c["batch_size"], c["epochs"], c["seed"])
        params = [(np.array(layer["W"], dtype=float).reshape(len(layer["W"]), -1),
                   np.array(layer["b"], dtype=float)) for layer in d["layers"]]
        model = NnModel(cols, params, cfg, tuple(d["loss_trace"]))
    else:
        raise SchemaError(f"unknown model kind {kind!r}")
    state = None
    if "standardization" in d:
        s = d["standardization"]
        state = Standardization(tuple(s["columns"]), np.array(s["mean"]), np.array(s["std"]),
                                s["target_mean"], s["target_std"])
    return model, state


def dumps(model, standardization: Standardization | None = None) -> str:
    return json.dumps(model_to_dict(model, standardization), sort_keys=True, indent=1) + "\n"


def save_model(path: Path | str, model, standardization: Standardization | None = None) -> None:
    Path(path).write_text(dumps(model, standardization), encoding="utf-8")


def load_model(path: Path | str):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at offset {exc.pos}") from exc
    return model_from_dict(d)
