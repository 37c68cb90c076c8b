"""CART regression tree grown greedily on squared error."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ..errors import DataError

MAX_DEPTH_CAP = 32


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = MAX_DEPTH_CAP
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    min_impurity_decrease: float = 0.0

    def __post_init__(self):
        if not 1 <= self.max_depth <= MAX_DEPTH_CAP:
            raise ValueError(f"max_depth must be in [1, {MAX_DEPTH_CAP}], got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ValueError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if not self.min_impurity_decrease >= 0:
            raise ValueError(f"min_impurity_decrease must be >= 0, got {self.min_impurity_decrease}")


class Split(NamedTuple):
    feature: int
    threshold: float
    sse_decrease: float


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    node_indices: Sequence[int] | np.ndarray,
    params: TreeParams,
    features: np.ndarray | None = None,
) -> Split | None:
    """Exhaustive search for the split that most reduces the node's SSE.

    Candidate thresholds are midpoints between consecutive distinct values of
    a feature; rows with ``x < threshold`` go left. Both children must hold
    at least ``min_samples_leaf`` rows. Ties go to the lowest feature index,
    then the lowest threshold. Returns ``None`` when no split reduces the SSE
    by at least ``min_impurity_decrease`` (and by a strictly positive amount).
    """
    idx = np.asarray(node_indices, dtype=np.intp)
    m = idx.size
    leaf = params.min_samples_leaf
    if m < params.min_samples_split or m < 2 * leaf:
        return None
    feats = np.arange(X.shape[1]) if features is None else np.asarray(features, dtype=np.intp)
    if feats.size == 0:
        return None

    yn = y[idx]
    yc = yn - yn.mean()
    parent = float(yc @ yc)
    if parent <= 0.0:
        return None

    Xn = X[np.ix_(idx, feats)]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    csum = np.cumsum(yc[order], axis=0)
    left_sum, total = csum[:-1], csum[-1]
    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    # SSE(parent) - SSE(left) - SSE(right), written without sums of squares
    dec = left_sum**2 / n_left + (total - left_sum) ** 2 / n_right - total**2 / m

    valid = xs[1:] > xs[:-1]
    if leaf > 1:
        valid[: leaf - 1] = False
        valid[m - leaf :] = False
    if not valid.any():
        return None
    flat = np.where(valid, dec, -np.inf).T.ravel()
    best = flat.max()
    eps = 1e-12 * parent
    if best <= eps or best < params.min_impurity_decrease:
        return None
    pos = int(np.flatnonzero(flat >= best - eps)[0])
    f_local, i = divmod(pos, m - 1)
    lo, hi = xs[i, f_local], xs[i + 1, f_local]
    thr = lo + (hi - lo) / 2.0
    if not lo < thr <= hi:
        thr = hi
    return Split(int(feats[f_local]), float(thr), float(flat[pos]))


@dataclass
class TreeModel:
    """Flat node arrays; ``feature[i] < 0`` marks a leaf.

    Every node keeps its training sample count, mean target and SSE so the
    structure can be audited and printed.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    sse: np.ndarray
    sse_decrease: np.ndarray
    n_features: int
    params: TreeParams
    feature_names: list[str] | None = None

    kind = "tree"

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] >= 0:
                stack += [(self.left[node], d + 1), (self.right[node], d + 1)]
        return best

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = np.arange(X.shape[0])
        while active.size:
            f = self.feature[node[active]]
            internal = f >= 0
            active = active[internal]
            if not active.size:
                break
            cur = node[active]
            go_left = X[active, self.feature[cur]] < self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        def node(i: int) -> dict:
            out = {"n": int(self.n_samples[i]), "value": float(self.value[i]), "sse": float(self.sse[i])}
            if self.feature[i] >= 0:
                out.update(
                    feature=int(self.feature[i]),
                    threshold=float(self.threshold[i]),
                    sse_decrease=float(self.sse_decrease[i]),
                    left=node(int(self.left[i])),
                    right=node(int(self.right[i])),
                )
            return out

        return {
            "kind": self.kind,
            "n_features": self.n_features,
            "params": asdict(self.params),
            "feature_names": self.feature_names,
            "root": node(0),
        }

    @classmethod
    def from_dict(cls, d: dict) -> TreeModel:
        b = _Builder()

        def walk(nd: dict) -> int:
            i = b.add(nd["n"], nd["value"], nd["sse"])
            if "feature" in nd:
                left, right = walk(nd["left"]), walk(nd["right"])
                b.split(i, nd["feature"], nd["threshold"], left, right, nd["sse_decrease"])
            return i

        walk(d["root"])
        return b.build(d["n_features"], TreeParams(**d["params"]), d.get("feature_names"))


class _Builder:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.n: list[int] = []
        self.sse: list[float] = []
        self.decrease: list[float] = []

    def add(self, n: int, value: float, sse: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.n.append(n)
        self.sse.append(sse)
        self.decrease.append(0.0)
        return len(self.value) - 1

    def split(self, i: int, feature: int, threshold: float, left: int, right: int, decrease: float) -> None:
        self.feature[i] = feature
        self.decrease[i] = decrease
        self.threshold[i] = threshold
        self.left[i] = left
        self.right[i] = right

    def build(self, n_features: int, params: TreeParams, names: list[str] | None) -> TreeModel:
        return TreeModel(
            np.array(self.feature, dtype=np.intp),
            np.array(self.threshold, dtype=float),
            np.array(self.left, dtype=np.intp),
            np.array(self.right, dtype=np.intp),
            np.array(self.value, dtype=float),
            np.array(self.n, dtype=np.intp),
            np.array(self.sse, dtype=float),
            np.array(self.decrease, dtype=float),
            n_features,
            params,
            names,
        )


def _node_stats(y: np.ndarray, idx: np.ndarray) -> tuple[float, float]:
    yn = y[idx]
    mean = float(yn.mean())
    r = yn - mean
    return mean, float(r @ r)


def check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise DataError(f"X must be a nonempty 2-D array, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise DataError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("inputs contain non-finite values")
    return X, y


def fit_tree(
    X,
    y,
    params: TreeParams = TreeParams(),
    *,
    sample_indices: np.ndarray | None = None,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    feature_names: list[str] | None = None,
) -> TreeModel:
    """Grow a tree depth-first.

    ``sample_indices`` (possibly with repeats, as in a bootstrap) selects the
    training rows. With ``max_features`` below the feature count, each node
    searches a fresh uniform subset of that many features drawn from ``rng``.
    """
    X, y = check_xy(X, y)
    d = X.shape[1]
    idx0 = np.arange(X.shape[0]) if sample_indices is None else np.asarray(sample_indices, dtype=np.intp)
    if idx0.size == 0:
        raise DataError("cannot fit a tree on zero rows")
    subsample = max_features is not None and max_features < d
    if subsample and rng is None:
        raise ValueError("feature subsampling needs an rng")

    b = _Builder()
    root = b.add(idx0.size, *_node_stats(y, idx0))
    stack = [(root, idx0, 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= params.max_depth:
            continue
        feats = np.sort(rng.choice(d, size=max_features, replace=False)) if subsample else None
        s = best_split(X, y, idx, params, feats)
        if s is None:
            continue
        go_left = X[idx, s.feature] < s.threshold
        li, ri = idx[go_left], idx[~go_left]
        left = b.add(li.size, *_node_stats(y, li))
        right = b.add(ri.size, *_node_stats(y, ri))
        b.split(node, s.feature, s.threshold, left, right, s.sse_decrease)
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return b.build(d, params, feature_names)
