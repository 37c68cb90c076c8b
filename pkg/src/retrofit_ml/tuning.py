"""Hyperparameter search: exhaustive grid and a GA over per-gene value lists."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping, Sequence

import numpy as np

from .errors import RetrofitError
from .parallel import ordered_map
from .rng import make_rng

Settings = dict[str, Any]
Evaluator = Callable[[Settings], float]


@dataclass(frozen=True)
class Gene:
    name: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError(f"gene {self.name!r} has no admissible values")


@dataclass(frozen=True)
class HyperSpace:
    genes: tuple[Gene, ...]

    def __post_init__(self):
        object.__setattr__(self, "genes", tuple(self.genes))
        names = [g.name for g in self.genes]
        if len(set(names)) != len(names):
            raise ValueError(f"gene names must be unique: {names}")
        if not self.genes:
            raise ValueError("a hyperparameter space needs at least one gene")

    @classmethod
    def from_mapping(cls, m: Mapping[str, Sequence]) -> HyperSpace:
        return cls(tuple(Gene(k, tuple(v)) for k, v in m.items()))

    @property
    def names(self) -> list[str]:
        return [g.name for g in self.genes]

    @property
    def size(self) -> int:
        return math.prod(len(g.values) for g in self.genes)

    def settings(self, alleles: Sequence[int]) -> Settings:
        return {g.name: g.values[a] for g, a in zip(self.genes, alleles)}

    def allele_grid(self) -> Iterator[tuple[int, ...]]:
        """All allele tuples in lexicographic order of value indices."""
        return itertools.product(*(range(len(g.values)) for g in self.genes))

    def contains(self, alleles: Sequence[int]) -> bool:
        return len(alleles) == len(self.genes) and all(0 <= a < len(g.values) for a, g in zip(alleles, self.genes))


def default_tree_space() -> HyperSpace:
    return HyperSpace.from_mapping(
        {
            "max_depth": (3, 5, 8, 12, 32),
            "min_samples_split": (2, 10, 40),
            "min_samples_leaf": (1, 5, 20, 50),
            "min_impurity_decrease": (0.0, 1e-4, 1e-2),
        }
    )


def default_lasso_space() -> HyperSpace:
    return HyperSpace.from_mapping({"lambda": tuple(float(v) for v in np.logspace(-4, 2, 10))})


def default_forest_space() -> HyperSpace:
    return HyperSpace.from_mapping({"n_trees": (50, 100, 200), "max_features_fraction": (0.33, 0.5, 1.0)})


DEFAULT_SPACES = {"lasso": default_lasso_space, "tree": default_tree_space, "forest": default_forest_space}


# ------------------------------------------------------------------ grid

@dataclass
class GridRow:
    alleles: tuple[int, ...]
    settings: Settings
    metric: float | None
    error: str | None = None


@dataclass
class SearchResult:
    best_settings: Settings
    best_metric: float
    rows: list[GridRow] = field(default_factory=list)
    trace: list[tuple[int, float]] = field(default_factory=list)

    def write_rows(self, path: str | Path, names: Sequence[str]) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*names, "metric", "error"])
            for r in self.rows:
                metric = "" if r.metric is None else repr(float(r.metric))
                w.writerow([*(r.settings[n] for n in names), metric, r.error or ""])

    def write_trace(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["generation", "best_fitness"])
            for gen, fit in self.trace:
                w.writerow([gen, repr(float(fit))])


def _safe(evaluator: Evaluator, settings: Settings) -> tuple[float | None, str | None]:
    try:
        value = float(evaluator(settings))
    except Exception as exc:  # a failing combination is recorded, not fatal
        return None, f"{type(exc).__name__}: {exc}"
    if math.isnan(value):
        return None, "metric is NaN"
    return value, None


def grid_search(space: HyperSpace, evaluator: Evaluator, cap: int = 10_000, threads: int = 1) -> SearchResult:
    """Score every combination once and return the minimiser.

    Ties keep the earliest combination in enumeration order.
    """
    if space.size > cap:
        raise ValueError(f"grid has {space.size} combinations, above the cap of {cap}")
    combos = list(space.allele_grid())
    scored = ordered_map(lambda a: _safe(evaluator, space.settings(a)), combos, threads)
    rows = [GridRow(a, space.settings(a), m, e) for a, (m, e) in zip(combos, scored)]
    ok = [r for r in rows if r.metric is not None]
    if not ok:
        raise RetrofitError(f"every grid combination failed; first error: {rows[0].error}")
    best = min(ok, key=lambda r: r.metric)  # min() keeps the first of equals
    return SearchResult(best.settings, best.metric, rows)


# ------------------------------------------------------------------- GA

@dataclass
class Chromosome:
    alleles: tuple[int, ...]
    fitness: float | None = None


@dataclass(frozen=True)
class GaTuneParams:
    population_size: int = 20
    generations: int = 25
    crossover_prob: float = 0.8
    mutation_prob: float = 0.3
    tournament_size: int = 3
    elitism_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_prob", "mutation_prob"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must be in [1, population_size]")
        if not 0 <= self.elitism_count <= self.population_size:
            raise ValueError("elitism_count must be in [0, population_size]")


def tournament_select(population: Sequence[Chromosome], k: int, rng: np.random.Generator) -> Chromosome:
    """Lowest-fitness individual among ``k`` distinct random draws; the first drawn wins ties."""
    if not population:
        raise ValueError("empty population")
    if not 1 <= k <= len(population):
        raise ValueError(f"tournament size {k} outside [1, {len(population)}]")
    if any(c.fitness is None for c in population):
        raise ValueError("every individual needs a fitness before selection")
    drawn = rng.choice(len(population), size=k, replace=False)
    return population[int(min(drawn, key=lambda i: population[i].fitness))]


def mutate_one_gene(c: Chromosome, space: HyperSpace, rng: np.random.Generator) -> Chromosome:
    """Resample one uniformly chosen gene to a different admissible value.

    A single-valued gene stays as it is. The returned chromosome carries no
    fitness.
    """
    alleles = list(c.alleles)
    g = int(rng.integers(len(space.genes)))
    n_values = len(space.genes[g].values)
    if n_values > 1:
        shift = int(rng.integers(1, n_values))
        alleles[g] = (alleles[g] + shift) % n_values
    return Chromosome(tuple(alleles))


def uniform_crossover(
    a: Chromosome, b: Chromosome, rng: np.random.Generator
) -> tuple[Chromosome, Chromosome]:
    swap = rng.random(len(a.alleles)) < 0.5
    c1 = tuple(y if s else x for x, y, s in zip(a.alleles, b.alleles, swap))
    c2 = tuple(x if s else y for x, y, s in zip(a.alleles, b.alleles, swap))
    return Chromosome(c1), Chromosome(c2)


def ga_tune(
    space: HyperSpace,
    evaluator: Evaluator,
    params: GaTuneParams = GaTuneParams(),
    threads: int = 1,
) -> SearchResult:
    """Genetic search over allele indices, minimising the evaluator.

    A failing evaluation counts as infinite fitness. Every distinct
    chromosome is evaluated once; ``rows`` lists them in first-seen order and
    ``trace`` gives the best-ever fitness per generation (0 is the initial
    population).
    """
    rng = make_rng(params.seed, "ga-tune")
    cache: dict[tuple[int, ...], GridRow] = {}

    def score(pop: list[Chromosome]) -> None:
        new = list(dict.fromkeys(c.alleles for c in pop if c.alleles not in cache))
        results = ordered_map(lambda a: _safe(evaluator, space.settings(a)), new, threads)
        for a, (m, e) in zip(new, results):
            cache[a] = GridRow(a, space.settings(a), m, e)
        for c in pop:
            m = cache[c.alleles].metric
            c.fitness = math.inf if m is None else m

    pop = [
        Chromosome(tuple(int(rng.integers(len(g.values))) for g in space.genes))
        for _ in range(params.population_size)
    ]
    trace: list[tuple[int, float]] = []
    best: Chromosome | None = None
    for gen in range(params.generations + 1):
        score(pop)
        leader = min(pop, key=lambda c: c.fitness)
        if best is None or leader.fitness < best.fitness:
            best = Chromosome(leader.alleles, leader.fitness)
        trace.append((gen, best.fitness))
        if gen == params.generations:
            break
        ranked = sorted(pop, key=lambda c: c.fitness)
        nxt = [Chromosome(c.alleles, c.fitness) for c in ranked[: params.elitism_count]]
        while len(nxt) < params.population_size:
            a = tournament_select(pop, params.tournament_size, rng)
            b = tournament_select(pop, params.tournament_size, rng)
            if rng.random() < params.crossover_prob:
                kids = uniform_crossover(a, b, rng)
            else:
                kids = (Chromosome(a.alleles), Chromosome(b.alleles))
            for kid in kids:
                if len(nxt) == params.population_size:
                    break
                if rng.random() < params.mutation_prob:
                    kid = mutate_one_gene(kid, space, rng)
                nxt.append(kid)
        pop = nxt
    if best.fitness == math.inf:
        raise RetrofitError("every evaluated chromosome failed")
    return SearchResult(space.settings(best.alleles), best.fitness, list(cache.values()), trace)
