import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_split
from retrofit_ml.errors import DataError
from retrofit_ml.models import (
    ForestModel,
    ForestParams,
    TreeParams,
    best_split,
    fit_forest,
    fit_lasso,
    fit_model,
    fit_tree,
    load_model,
    model_from_dict,
    predict,
    save_model,
    soft_threshold,
)
from retrofit_ml.models.lasso import lasso_gradient

X4 = np.array([[1.0], [2.0], [3.0], [4.0]])
Y4 = np.array([0.0, 0.0, 10.0, 10.0])


# ----------------------------------------------------------------- lasso

@pytest.mark.parametrize("z, g, out", [(3, 1, 2), (-3, 1, -2), (0.5, 1, 0)])
def test_soft_threshold(z, g, out):
    assert soft_threshold(z, g) == out


def test_lasso_least_squares_limit():
    m = fit_lasso(np.array([[-1.0], [0.0], [1.0]]), np.array([-2.0, 0.0, 2.0]), 0.0)
    assert m.coefficients[0] == pytest.approx(2.0, abs=1e-12)
    assert m.intercept == pytest.approx(0.0, abs=1e-12)


def test_lasso_kill_condition():
    X, y = np.array([[-1.0], [0.0], [1.0]]), np.array([-2.0, 0.0, 2.0])
    assert fit_lasso(X, y, 4 / 3).coefficients[0] == 0.0
    assert fit_lasso(X, y, 4 / 3 * (1 - 1e-9)).coefficients[0] != 0.0


def test_lasso_constant_target():
    X = np.random.default_rng(0).normal(size=(20, 3))
    m = fit_lasso(X, np.full(20, 7.5), 0.1)
    assert np.all(m.coefficients == 0) and m.intercept == 7.5


def test_lasso_predict_and_validation():
    m = fit_lasso(np.array([[-1.0], [0.0], [1.0]]), np.array([-2.0, 0.0, 2.0]), 0.0)
    assert predict(m, np.array([[3.0]]))[0] == pytest.approx(6.0)
    with pytest.raises(ValueError):
        fit_lasso(X4, Y4, -1.0)
    with pytest.raises(DataError):
        predict(m, np.array([[1.0, 2.0]]))
    with pytest.raises(DataError):
        predict(m, np.array([[np.nan]]))


def test_lasso_sparsity_grows_with_lambda():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(80, 6))
    y = X @ np.array([3.0, -2.0, 0.5, 0, 0, 0]) + rng.normal(0, 0.1, size=80)
    counts = [int(np.count_nonzero(fit_lasso(X, y, lam).coefficients)) for lam in (0.001, 0.3, 1.0, 10.0)]
    assert counts == sorted(counts, reverse=True) and counts[-1] == 0


def test_lasso_gradient_shape_check():
    m = fit_lasso(X4, Y4, 0.1)
    with pytest.raises(DataError):
        lasso_gradient(m, np.ones((4, 2)), Y4)


# ------------------------------------------------------------------ tree

def test_best_split_example():
    s = best_split(X4, Y4, np.arange(4), TreeParams())
    assert (s.feature, s.threshold) == (0, 2.5)
    # parent SSE is 4 * 25 = 100 and both children are pure
    assert s.sse_decrease == pytest.approx(100.0)


def test_best_split_constant_y():
    assert best_split(X4, np.full(4, 3.0), np.arange(4), TreeParams()) is None


def test_best_split_tie_prefers_lower_feature():
    X = np.hstack([X4, X4])
    assert best_split(X, Y4, np.arange(4), TreeParams()).feature == 0


def test_best_split_respects_leaf_size():
    y = np.array([0.0, 10.0, 10.0, 10.0])
    assert best_split(X4, y, np.arange(4), TreeParams(min_samples_leaf=2)).threshold == 2.5


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 40), st.integers(1, 4), st.integers(1, 3))
def test_best_split_matches_oracle(seed, n, d, leaf):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, size=(n, d)).astype(float)
    y = rng.normal(size=n)
    got = best_split(X, y, np.arange(n), TreeParams(min_samples_leaf=leaf))
    want = brute_force_split(X, y, leaf)
    if want is None:
        assert got is None
    else:
        assert (got.feature, got.threshold) == want[:2]
        assert got.sse_decrease == pytest.approx(want[2], abs=1e-9)


def test_tree_two_leaves():
    m = fit_tree(X4, Y4, TreeParams(max_depth=1))
    assert m.n_leaves == 2
    assert predict(m, np.array([[2.0], [3.0], [2.5]])).tolist() == [0.0, 10.0, 10.0]


def test_tree_constant_target_is_single_leaf():
    m = fit_tree(X4, np.full(4, 5.0), TreeParams())
    assert m.n_nodes == 1 and predict(m, X4).tolist() == [5.0] * 4


def test_tree_param_bounds():
    for bad in ({"max_depth": 0}, {"max_depth": 33}, {"min_samples_split": 1}, {"min_samples_leaf": 0},
                {"min_impurity_decrease": -1.0}):
        with pytest.raises(ValueError):
            TreeParams(**bad)


def _random_tree(seed, **kw):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(120, 4))
    y = np.sin(X[:, 0]) + X[:, 1] ** 2 + rng.normal(0, 0.1, size=120)
    return X, y, fit_tree(X, y, TreeParams(**kw))


def test_tree_memorizes_distinct_rows():
    X, y, m = _random_tree(2)
    assert np.array_equal(m.predict(X), y)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 3, 6]), st.sampled_from([1, 4, 10]))
def test_tree_invariants(seed, depth, leaf):
    X, y, m = _random_tree(seed, max_depth=depth, min_samples_leaf=leaf)
    assert m.depth() <= depth
    leaves = m.apply(X)
    for node in np.unique(leaves):
        routed = y[leaves == node]
        assert routed.size == m.n_samples[node] >= leaf
        assert m.value[node] == pytest.approx(routed.mean(), rel=1e-12, abs=1e-12)
    internal = np.flatnonzero(m.feature >= 0)
    for i in internal:
        l, r = m.left[i], m.right[i]
        assert m.sse[i] == pytest.approx(m.sse[l] + m.sse[r] + m.sse_decrease[i], rel=1e-9, abs=1e-9)
        assert m.sse_decrease[i] > 0


def test_tree_min_impurity_decrease_blocks_weak_splits():
    X, y, m = _random_tree(5, min_impurity_decrease=1.0)
    assert np.all(m.sse_decrease[m.feature >= 0] >= 1.0)


# ---------------------------------------------------------------- forest

def test_forest_degenerate_equals_tree():
    X, y, _ = _random_tree(3)
    tp = TreeParams(max_depth=6)
    f = fit_forest(X, y, ForestParams(n_trees=1, bootstrap=False, max_features_fraction=1.0, tree=tp))
    t = fit_tree(X, y, tp)
    assert np.array_equal(f.predict(X), t.predict(X))


def test_forest_deterministic_and_thread_independent():
    X, y, _ = _random_tree(4)
    p = ForestParams(n_trees=8, seed=11, tree=TreeParams(max_depth=5))
    a = fit_forest(X, y, p, threads=1).to_dict()
    b = fit_forest(X, y, p, threads=4).to_dict()
    assert json.dumps(a) == json.dumps(b)


def test_forest_constant_target():
    X, _, _ = _random_tree(6)
    f = fit_forest(X, np.full(len(X), 2.5), ForestParams(n_trees=3))
    assert np.all(f.predict(X) == 2.5)


def test_forest_mean_of_trees():
    X, y, _ = _random_tree(7)
    f = fit_forest(X, y, ForestParams(n_trees=5, seed=3))
    assert np.allclose(f.predict(X), np.mean([t.predict(X) for t in f.trees], axis=0), rtol=0, atol=1e-12)


def test_forest_two_constant_trees_average():
    t4 = fit_tree(X4, np.full(4, 4.0), TreeParams())
    t6 = fit_tree(X4, np.full(4, 6.0), TreeParams())
    f = ForestModel([t4, t6], ForestParams(n_trees=2))
    assert predict(f, np.array([[1.0]]))[0] == 5.0


def test_forest_bad_params():
    with pytest.raises(ValueError):
        ForestParams(n_trees=0)
    with pytest.raises(ValueError):
        ForestParams(max_features_fraction=0.0)


# --------------------------------------------------------- serialization

@pytest.mark.parametrize("kind, settings_", [
    ("lasso", {"lambda": 0.05}),
    ("tree", {"max_depth": 5}),
    ("forest", {"n_trees": 4, "max_depth": 4}),
])
def test_roundtrip(tmp_path, kind, settings_):
    X, y, _ = _random_tree(8)
    m = fit_model(kind, X, y, settings_, seed=2, feature_names=["a", "b", "c", "d"])
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(back.predict(X), m.predict(X))
    assert back.feature_names == ["a", "b", "c", "d"]


def test_fit_model_rejects_unknown_setting():
    with pytest.raises(ValueError, match="max_dpeth"):
        fit_model("tree", X4, Y4, {"max_dpeth": 3})
    with pytest.raises(ValueError):
        fit_model("svm", X4, Y4)


def test_model_from_dict_rejects_garbage():
    with pytest.raises(DataError):
        model_from_dict({"kind": "svm"})
