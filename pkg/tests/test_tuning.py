import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retrofit_ml.errors import RetrofitError
from retrofit_ml.rng import make_rng
from retrofit_ml.tuning import (
    Chromosome,
    GaTuneParams,
    HyperSpace,
    default_forest_space,
    default_lasso_space,
    default_tree_space,
    ga_tune,
    grid_search,
    mutate_one_gene,
    tournament_select,
    uniform_crossover,
)

DEPTH = HyperSpace.from_mapping({"max_depth": [1, 2, 3, 4, 5]})


def parabola(s):
    return (s["max_depth"] - 3) ** 2


def test_default_spaces():
    assert default_tree_space().size == 5 * 3 * 4 * 3
    lam = default_lasso_space().genes[0].values
    assert len(lam) == 10 and lam[0] == pytest.approx(1e-4) and lam[-1] == pytest.approx(100.0)
    assert default_forest_space().size == 9


def test_space_validation():
    with pytest.raises(ValueError):
        HyperSpace.from_mapping({"a": []})
    with pytest.raises(ValueError):
        HyperSpace(())


# ------------------------------------------------------------------ grid

def test_grid_picks_minimum():
    res = grid_search(DEPTH, parabola)
    assert res.best_settings == {"max_depth": 3} and len(res.rows) == 5


def test_grid_single_combination():
    calls = []
    res = grid_search(HyperSpace.from_mapping({"a": [7]}), lambda s: calls.append(s) or 1.0)
    assert res.best_settings == {"a": 7} and len(calls) == 1


def test_grid_tie_keeps_first():
    res = grid_search(HyperSpace.from_mapping({"a": ["x", "y"]}), lambda s: 1.0)
    assert res.best_settings == {"a": "x"}


def test_grid_cap():
    with pytest.raises(ValueError, match="cap"):
        grid_search(default_tree_space(), parabola, cap=10)


def test_grid_failures_recorded():
    def flaky(s):
        if s["a"] == 1:
            raise RuntimeError("boom")
        return float(s["a"])

    res = grid_search(HyperSpace.from_mapping({"a": [1, 2, 3]}), flaky)
    assert res.best_settings == {"a": 2}
    assert res.rows[0].metric is None and "boom" in res.rows[0].error
    with pytest.raises(RetrofitError):
        grid_search(HyperSpace.from_mapping({"a": [1]}), flaky)


def test_grid_matches_reenumeration():
    space = HyperSpace.from_mapping({"a": [0, 1, 2], "b": [0.5, -1.0], "c": ["p", "q"]})

    def f(s):
        return (s["a"] - 1.2) ** 2 + s["b"] * (s["c"] == "q")

    res = grid_search(space, f)
    combos = [dict(zip(["a", "b", "c"], v)) for v in itertools.product([0, 1, 2], [0.5, -1.0], ["p", "q"])]
    assert res.best_settings == min(combos, key=f)


def test_grid_threads_same_result():
    space = default_tree_space()

    def f(s):
        return math.sin(s["max_depth"] * s["min_samples_leaf"]) + s["min_impurity_decrease"]

    a = grid_search(space, f, threads=1)
    b = grid_search(space, f, threads=4)
    assert [r.metric for r in a.rows] == [r.metric for r in b.rows]


# ------------------------------------------------------------ operators

def _pop(fits):
    return [Chromosome((i,), f) for i, f in enumerate(fits)]


def test_tournament_full():
    assert tournament_select(_pop([5, 1, 9]), 3, make_rng(0)).fitness == 1


def test_tournament_ties_first_drawn():
    rng = make_rng(4)
    drawn = make_rng(4).choice(3, size=3, replace=False)
    assert tournament_select(_pop([2, 2, 2]), 3, rng).alleles == (int(drawn[0]),)


def test_tournament_needs_fitness():
    with pytest.raises(ValueError):
        tournament_select([Chromosome((0,))], 1, make_rng(0))


def test_mutate_single_valued_genes():
    space = HyperSpace.from_mapping({"a": [1], "b": ["x"]})
    out = mutate_one_gene(Chromosome((0, 0), 3.0), space, make_rng(0))
    assert out.alleles == (0, 0) and out.fitness is None


def test_mutate_forced_flip():
    space = HyperSpace.from_mapping({"a": ["a", "b"]})
    assert mutate_one_gene(Chromosome((0,)), space, make_rng(1)).alleles == (1,)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=1, max_size=5), st.integers(0, 2**32), st.data())
def test_operators_keep_alleles_in_bounds(sizes, seed, data):
    space = HyperSpace.from_mapping({f"g{i}": list(range(n)) for i, n in enumerate(sizes)})
    a = Chromosome(tuple(data.draw(st.integers(0, n - 1)) for n in sizes))
    b = Chromosome(tuple(data.draw(st.integers(0, n - 1)) for n in sizes))
    rng = make_rng(seed)
    m = mutate_one_gene(a, space, rng)
    assert space.contains(m.alleles)
    assert sum(x != y for x, y in zip(a.alleles, m.alleles)) <= 1
    for c in uniform_crossover(a, b, rng):
        assert space.contains(c.alleles)
        assert all(x in (p, q) for x, p, q in zip(c.alleles, a.alleles, b.alleles))


# ------------------------------------------------------------------- GA

def test_ga_converges_on_parabola():
    res = ga_tune(DEPTH, parabola, GaTuneParams(generations=20, seed=0))
    assert res.best_settings == {"max_depth": 3}


def test_ga_degenerate_run():
    res = ga_tune(DEPTH, parabola, GaTuneParams(population_size=2, generations=0, tournament_size=2, seed=9))
    assert len(res.trace) == 1
    assert res.best_metric == min(r.metric for r in res.rows)


def test_ga_trace_monotone_and_reproducible():
    space = default_tree_space()

    def f(s):
        return abs(s["max_depth"] - 8) + s["min_samples_leaf"] / 7 + s["min_impurity_decrease"]

    a = ga_tune(space, f, GaTuneParams(seed=3))
    b = ga_tune(space, f, GaTuneParams(seed=3), threads=3)
    fits = [x for _, x in a.trace]
    assert all(q <= p for p, q in zip(fits, fits[1:]))
    assert a.trace == b.trace and a.best_settings == b.best_settings


def test_ga_failures_are_infinite():
    def f(s):
        if s["max_depth"] != 4:
            raise RuntimeError("no")
        return 1.0

    res = ga_tune(DEPTH, f, GaTuneParams(generations=10, seed=1))
    assert res.best_settings == {"max_depth": 4}


def test_ga_params_bounds():
    with pytest.raises(ValueError):
        GaTuneParams(mutation_prob=2.0)
    with pytest.raises(ValueError):
        GaTuneParams(population_size=2, tournament_size=3)


def test_search_csvs(tmp_path):
    res = ga_tune(DEPTH, parabola, GaTuneParams(generations=2))
    res.write_rows(tmp_path / "rows.csv", DEPTH.names)
    res.write_trace(tmp_path / "trace.csv")
    assert (tmp_path / "rows.csv").read_text().startswith("max_depth,metric,error\n")
    assert len((tmp_path / "trace.csv").read_text().splitlines()) == 4
    assert np.isfinite(res.best_metric)
