"""Wrapper feature selection over boolean feature masks.

All three selectors minimise a :class:`FitnessEvaluator` (lower is better)
and never propose the empty mask. Masks are 1-D ``numpy`` bool arrays.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetExhausted
from .models import fit_model
from .parallel import ordered_map
from .rng import make_rng


class FitnessEvaluator:
    """Memoising, budgeted wrapper around a mask -> fitness function.

    Subclasses implement :meth:`_fitness`. ``budget`` caps the number of
    distinct masks ever scored; repeated masks are served from the memo and
    cost nothing.
    """

    def __init__(self, n_features: int, budget: int | None = None, threads: int = 1):
        if budget is not None and budget < 1:
            raise ValueError(f"budget must be >= 1, got {budget}")
        self.n_features = n_features
        self.budget = budget
        self.threads = threads
        self.memo: dict[bytes, float] = {}
        self.calls = 0

    def _fitness(self, mask: np.ndarray) -> float:
        raise NotImplementedError

    def _check(self, mask) -> np.ndarray:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.n_features,):
            raise ValueError(f"mask must have shape ({self.n_features},), got {mask.shape}")
        if not mask.any():
            raise ValueError("the empty mask cannot be evaluated")
        return mask

    @property
    def remaining(self) -> float:
        return math.inf if self.budget is None else self.budget - self.calls

    def evaluate(self, mask) -> float:
        return self.evaluate_many([mask])[0]

    def evaluate_many(self, masks: Sequence) -> list[float]:
        """Score masks in order; new distinct masks may run concurrently.

        If the budget cannot cover every new mask, the affordable prefix is
        scored and memoised before :class:`BudgetExhausted` is raised.
        """
        masks = [self._check(m) for m in masks]
        fresh: dict[bytes, np.ndarray] = {}
        for m in masks:
            key = m.tobytes()
            if key not in self.memo and key not in fresh:
                fresh[key] = m
        todo = list(fresh.items())
        short = len(todo) > self.remaining
        if short:
            todo = todo[: int(self.remaining)]
        scores = ordered_map(lambda km: float(self._fitness(km[1])), todo, self.threads)
        for (key, _), s in zip(todo, scores):
            self.memo[key] = s
        self.calls += len(todo)
        if short:
            raise BudgetExhausted(f"fitness budget of {self.budget} evaluations spent")
        return [self.memo[m.tobytes()] for m in masks]

    def best_seen(self) -> tuple[np.ndarray, float] | None:
        if not self.memo:
            return None
        key = min(self.memo, key=lambda k: (self.memo[k], k))
        return np.frombuffer(key, dtype=bool).copy(), self.memo[key]


class CallableEvaluator(FitnessEvaluator):
    def __init__(self, fn: Callable[[np.ndarray], float], n_features: int, budget: int | None = None, threads: int = 1):
        super().__init__(n_features, budget, threads)
        self.fn = fn

    def _fitness(self, mask: np.ndarray) -> float:
        return self.fn(mask)


class ModelEvaluator(FitnessEvaluator):
    """Validation RMSE of a model retrained on the training rows restricted to the mask."""

    def __init__(
        self,
        kind: str,
        settings: dict,
        X_train: np.ndarray,
        y_train: np.ndarray,
        X_val: np.ndarray,
        y_val: np.ndarray,
        seed: int = 0,
        budget: int | None = None,
        threads: int = 1,
    ):
        super().__init__(X_train.shape[1], budget, threads)
        self.kind = kind
        self.settings = dict(settings)
        self.X_train, self.y_train = X_train, y_train
        self.X_val, self.y_val = X_val, y_val
        self.seed = seed

    def _fitness(self, mask: np.ndarray) -> float:
        model = fit_model(self.kind, self.X_train[:, mask], self.y_train, self.settings, seed=self.seed)
        resid = self.y_val - model.predict(self.X_val[:, mask])
        return math.sqrt(float(resid @ resid) / resid.size)


@dataclass
class SelectionResult:
    mask: np.ndarray
    fitness: float
    trace: list[tuple[int, float, int]] = field(default_factory=list)
    truncated: bool = False
    evaluations: int = 0

    @property
    def k(self) -> int:
        return int(self.mask.sum())

    def write_trace(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "best_fitness", "popcount"])
            for step, fit, k in self.trace:
                w.writerow([step, repr(float(fit)), k])


def _repair(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if not mask.any():
        mask[rng.integers(mask.size)] = True
    return mask


def _fallback(ev: FitnessEvaluator, trace: list, best: tuple | None) -> SelectionResult:
    seen = ev.best_seen()
    if best is None or (seen is not None and seen[1] < best[1]):
        best = seen
    if best is None:
        raise BudgetExhausted("budget spent before any mask was scored")
    return SelectionResult(best[0], best[1], trace, truncated=True, evaluations=ev.calls)


# ---------------------------------------------------------- forward selection

def _accepts(score: float, previous: float, step: int, rel_tol: float, abs_tol: float) -> bool:
    if step == 0:
        return True
    gain = previous - score
    return gain > abs_tol and gain >= rel_tol * previous


def forward_select(
    evaluator: FitnessEvaluator,
    max_features: int | None = None,
    rel_tol: float = 1e-3,
    abs_tol: float = 1e-12,
) -> SelectionResult:
    """Greedy forward selection.

    Each step scores every single-feature addition and keeps the best one.
    Stops when the best addition improves fitness by less than
    ``rel_tol * previous`` or by no more than ``abs_tol`` (rounding noise
    around a perfect fit), when ``max_features`` is reached,
    or when the previous fitness was already zero. The trace holds one row per
    accepted step and is strictly decreasing.
    """
    d = evaluator.n_features
    if d < 1:
        raise ValueError("need at least one feature")
    max_features = d if max_features is None else max_features
    if max_features < 1:
        raise ValueError(f"max_features must be >= 1, got {max_features}")
    if rel_tol < 0:
        raise ValueError(f"rel_tol must be >= 0, got {rel_tol}")

    mask = np.zeros(d, dtype=bool)
    best_fit = math.inf
    trace: list[tuple[int, float, int]] = []
    step = 0
    while mask.sum() < min(max_features, d) and best_fit > 0:
        candidates = np.flatnonzero(~mask)
        trials = []
        for j in candidates:
            m = mask.copy()
            m[j] = True
            trials.append(m)
        try:
            scores = evaluator.evaluate_many(trials)
        except BudgetExhausted:
            done = [(evaluator.memo[t.tobytes()], i) for i, t in enumerate(trials) if t.tobytes() in evaluator.memo]
            if done:
                s, i = min(done)
                if _accepts(s, best_fit, step, rel_tol, abs_tol):
                    mask, best_fit = trials[i], s
                    trace.append((step + 1, s, int(mask.sum())))
            if not mask.any():
                raise
            return SelectionResult(mask, best_fit, trace, truncated=True, evaluations=evaluator.calls)
        i = int(np.argmin(scores))  # first minimum: lowest feature index wins ties
        s = scores[i]
        if not _accepts(s, best_fit, step, rel_tol, abs_tol):
            break
        mask, best_fit = trials[i], s
        step += 1
        trace.append((step, s, int(mask.sum())))
    return SelectionResult(mask, best_fit, trace, evaluations=evaluator.calls)


# ----------------------------------------------------------- binary GA

@dataclass(frozen=True)
class GaSelectParams:
    population_size: int = 30
    generations: int = 40
    crossover_prob: float = 0.8
    per_bit_mutation_prob: float | None = None  # None means 1/d
    tournament_size: int = 3
    elitism_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_prob", "per_bit_mutation_prob"):
            p = getattr(self, name)
            if p is not None and not 0 <= p <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must be in [1, population_size]")
        if not 0 <= self.elitism_count <= self.population_size:
            raise ValueError("elitism_count must be in [0, population_size]")


def _tournament(fitness: Sequence[float], k: int, rng: np.random.Generator) -> int:
    drawn = rng.choice(len(fitness), size=k, replace=False)
    # min() keeps the first drawn among equals
    return int(min(drawn, key=lambda i: fitness[i]))


def _ranked(fitness: Sequence[float]) -> list[int]:
    return sorted(range(len(fitness)), key=lambda i: fitness[i])


def ga_select(evaluator: FitnessEvaluator, d: int, params: GaSelectParams = GaSelectParams()) -> SelectionResult:
    """Generational binary GA over feature masks.

    Tournament selection, uniform crossover with ``crossover_prob``, per-bit
    flip mutation and ``elitism_count`` unchanged survivors. Empty offspring
    get one random bit set. The trace has one row per generation (0 is the
    initial population) holding the best-ever fitness.
    """
    if d < 1:
        raise ValueError("need at least one feature")
    rng = make_rng(params.seed, "ga-select")
    p_mut = 1.0 / d if params.per_bit_mutation_prob is None else params.per_bit_mutation_prob
    pop = [_repair(rng.random(d) < 0.5, rng) for _ in range(params.population_size)]
    trace: list[tuple[int, float, int]] = []
    best: tuple[np.ndarray, float] | None = None

    for gen in range(params.generations + 1):
        try:
            fitness = evaluator.evaluate_many(pop)
        except BudgetExhausted:
            return _fallback(evaluator, trace, best)
        order = _ranked(fitness)
        if best is None or fitness[order[0]] < best[1]:
            best = (pop[order[0]].copy(), fitness[order[0]])
        trace.append((gen, best[1], int(best[0].sum())))
        if gen == params.generations:
            break

        nxt = [pop[i].copy() for i in order[: params.elitism_count]]
        while len(nxt) < params.population_size:
            a = pop[_tournament(fitness, params.tournament_size, rng)]
            b = pop[_tournament(fitness, params.tournament_size, rng)]
            if rng.random() < params.crossover_prob:
                take = rng.random(d) < 0.5
                c1, c2 = np.where(take, a, b), np.where(take, b, a)
            else:
                c1, c2 = a.copy(), b.copy()
            for child in (c1, c2):
                if len(nxt) == params.population_size:
                    break
                child ^= rng.random(d) < p_mut
                nxt.append(_repair(child, rng))
        pop = nxt
    return SelectionResult(best[0], best[1], trace, evaluations=evaluator.calls)


# ----------------------------------------------------------- binary PSO

@dataclass(frozen=True)
class PsoSelectParams:
    swarm_size: int = 30
    iterations: int = 40
    inertia: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    v_max: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.v_max > 0:
            raise ValueError(f"v_max must be > 0, got {self.v_max}")


def _sigmoid(v: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-v))


def pso_select(evaluator: FitnessEvaluator, d: int, params: PsoSelectParams = PsoSelectParams()) -> SelectionResult:
    """Binary PSO with the sigmoid transfer function.

    Velocities follow ``v <- w v + c1 r1 (pbest - x) + c2 r2 (gbest - x)``,
    clamped to ``[-v_max, v_max]``; bit ``j`` is set when a uniform draw falls
    below ``sigmoid(v_j)``. The trace has one row per iteration (0 is the
    initial swarm) holding the global-best fitness.
    """
    if d < 1:
        raise ValueError("need at least one feature")
    rng = make_rng(params.seed, "pso-select")
    n = params.swarm_size
    x = rng.random((n, d)) < 0.5
    for row in x:
        _repair(row, rng)
    v = rng.uniform(-params.v_max, params.v_max, size=(n, d))
    trace: list[tuple[int, float, int]] = []
    best: tuple[np.ndarray, float] | None = None

    try:
        fit = np.array(evaluator.evaluate_many(list(x)))
    except BudgetExhausted:
        return _fallback(evaluator, trace, best)
    pbest, pbest_fit = x.copy(), fit.copy()
    g = int(np.argmin(pbest_fit))
    best = (pbest[g].copy(), float(pbest_fit[g]))
    trace.append((0, best[1], int(best[0].sum())))

    for it in range(1, params.iterations + 1):
        r1 = rng.random((n, d))
        r2 = rng.random((n, d))
        xf = x.astype(float)
        v = params.inertia * v + params.c1 * r1 * (pbest - xf) + params.c2 * r2 * (best[0] - xf)
        np.clip(v, -params.v_max, params.v_max, out=v)
        x = rng.random((n, d)) < _sigmoid(v)
        for row in x:
            _repair(row, rng)
        try:
            fit = np.array(evaluator.evaluate_many(list(x)))
        except BudgetExhausted:
            return _fallback(evaluator, trace, best)
        improved = fit < pbest_fit
        pbest[improved] = x[improved]
        pbest_fit[improved] = fit[improved]
        g = int(np.argmin(pbest_fit))
        if pbest_fit[g] < best[1]:
            best = (pbest[g].copy(), float(pbest_fit[g]))
        trace.append((it, best[1], int(best[0].sum())))
    return SelectionResult(best[0], best[1], trace, evaluations=evaluator.calls)


SELECTORS = ("forward", "ga", "pso")
