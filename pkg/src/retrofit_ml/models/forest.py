"""Bagged regression trees with per-node feature subsampling."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DataError
from ..parallel import ordered_map
from ..rng import derive_seed, make_rng
from .tree import TreeModel, TreeParams, check_xy, fit_tree


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    bootstrap: bool = True
    max_features_fraction: float = 0.5
    tree: TreeParams = field(default_factory=TreeParams)
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if not 0 < self.max_features_fraction <= 1:
            raise ValueError(f"max_features_fraction must be in (0, 1], got {self.max_features_fraction}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ForestParams:
        d = dict(d)
        d["tree"] = TreeParams(**d["tree"])
        return cls(**d)


@dataclass
class ForestModel:
    trees: list[TreeModel]
    params: ForestParams
    feature_names: list[str] | None = None

    kind = "forest"

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params.to_dict(),
            "feature_names": self.feature_names,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ForestModel:
        return cls(
            [TreeModel.from_dict(t) for t in d["trees"]],
            ForestParams.from_dict(d["params"]),
            d.get("feature_names"),
        )


def tree_seed(forest_seed: int, i: int) -> int:
    """Seed of tree ``i``: a pure function of the forest seed and the index."""
    return derive_seed(forest_seed, "forest-tree", i)


def fit_forest(
    X,
    y,
    params: ForestParams = ForestParams(),
    threads: int = 1,
    feature_names: list[str] | None = None,
) -> ForestModel:
    """Fit ``n_trees`` trees, each on its own bootstrap draw and RNG stream.

    Each node of each tree searches ``ceil(max_features_fraction * d)``
    features. Tree ``i`` depends only on ``tree_seed(seed, i)``, so the model
    is the same for any ``threads``.
    """
    X, y = check_xy(X, y)
    n, d = X.shape
    if n == 0:
        raise DataError("cannot fit a forest on zero rows")
    m = max(1, math.ceil(params.max_features_fraction * d))

    def grow(i: int) -> TreeModel:
        rng = make_rng(tree_seed(params.seed, i))
        rows = rng.integers(0, n, size=n) if params.bootstrap else None
        return fit_tree(X, y, params.tree, sample_indices=rows, max_features=m, rng=rng)

    trees = ordered_map(grow, range(params.n_trees), threads)
    return ForestModel(trees, params, feature_names)
