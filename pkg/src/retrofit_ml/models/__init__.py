"""The three regressors behind one fit/predict/serialise surface."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping, Union

import numpy as np

from ..errors import DataError
from .forest import ForestModel, ForestParams, fit_forest
from .lasso import LassoModel, fit_lasso, soft_threshold
from .tree import Split, TreeModel, TreeParams, best_split, fit_tree

TrainedModel = Union[LassoModel, TreeModel, ForestModel]
MODEL_KINDS = ("lasso", "tree", "forest")
_TREE_KEYS = ("max_depth", "min_samples_split", "min_samples_leaf", "min_impurity_decrease")
_CLASSES = {"lasso": LassoModel, "tree": TreeModel, "forest": ForestModel}

__all__ = [
    "ForestModel",
    "ForestParams",
    "LassoModel",
    "MODEL_KINDS",
    "Split",
    "TrainedModel",
    "TreeModel",
    "TreeParams",
    "best_split",
    "fit_forest",
    "fit_lasso",
    "fit_model",
    "fit_tree",
    "load_model",
    "model_from_dict",
    "predict",
    "save_model",
    "soft_threshold",
]


def predict(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(f"model expects {model.n_features} features, got array of shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("prediction input contains non-finite values")
    return model.predict(X)


def tree_params(settings: Mapping[str, Any]) -> TreeParams:
    return TreeParams(**{k: settings[k] for k in _TREE_KEYS if k in settings})


def fit_model(
    kind: str,
    X,
    y,
    settings: Mapping[str, Any] | None = None,
    seed: int = 0,
    threads: int = 1,
    feature_names: list[str] | None = None,
) -> TrainedModel:
    """Fit a model of ``kind`` from a flat settings mapping.

    Unknown keys are rejected so a misspelt hyperparameter cannot silently
    fall back to its default.
    """
    settings = dict(settings or {})
    if kind == "lasso":
        allowed = {"lambda", "tol", "max_iter"}
    elif kind == "tree":
        allowed = set(_TREE_KEYS)
    elif kind == "forest":
        allowed = set(_TREE_KEYS) | {"n_trees", "bootstrap", "max_features_fraction"}
    else:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    extra = sorted(set(settings) - allowed)
    if extra:
        raise ValueError(f"{kind} does not take settings {extra}")

    if kind == "lasso":
        return fit_lasso(
            X,
            y,
            lam=float(settings.get("lambda", 1.0)),
            tol=float(settings.get("tol", 1e-6)),
            max_iter=int(settings.get("max_iter", 1000)),
            feature_names=feature_names,
        )
    if kind == "tree":
        return fit_tree(X, y, tree_params(settings), feature_names=feature_names)
    params = ForestParams(
        n_trees=int(settings.get("n_trees", 100)),
        bootstrap=bool(settings.get("bootstrap", True)),
        max_features_fraction=float(settings.get("max_features_fraction", 0.5)),
        tree=tree_params(settings),
        seed=int(seed),
    )
    return fit_forest(X, y, params, threads=threads, feature_names=feature_names)


def model_from_dict(d: Mapping[str, Any]) -> TrainedModel:
    try:
        cls = _CLASSES[d["kind"]]
    except KeyError:
        raise DataError(f"not a serialised model (kind={d.get('kind')!r})") from None
    return cls.from_dict(dict(d))


def save_model(model: TrainedModel, path: str | Path, extra: Mapping[str, Any] | None = None) -> None:
    doc = model.to_dict()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
