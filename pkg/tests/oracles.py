"""Slow, obviously-correct reference implementations used by the tests."""
from __future__ import annotations

import itertools

import numpy as np


def sse(v: np.ndarray) -> float:
    return float(((v - v.mean()) ** 2).sum()) if v.size else 0.0


def brute_force_split(X, y, min_samples_leaf=1, tie_tol=1e-9):
    """Every feature, every midpoint; children SSE computed directly.

    Returns (feature, threshold, decrease) or None. Among candidates within
    ``tie_tol`` of the best decrease the lowest (feature, threshold) wins.
    """
    n, d = X.shape
    parent = sse(y)
    cands = []
    for j in range(d):
        values = np.unique(X[:, j])
        for lo, hi in zip(values[:-1], values[1:]):
            thr = lo + (hi - lo) / 2.0
            left = X[:, j] < thr
            nl = int(left.sum())
            if nl < min_samples_leaf or n - nl < min_samples_leaf:
                continue
            cands.append((parent - sse(y[left]) - sse(y[~left]), j, thr))
    if not cands:
        return None
    best = max(c[0] for c in cands)
    if best <= 1e-12 * parent:
        return None
    dec, j, thr = min((c for c in cands if c[0] >= best - tie_tol), key=lambda c: (c[1], c[2]))
    return j, thr, dec


def all_masks(d: int):
    for bits in itertools.product([False, True], repeat=d):
        if any(bits):
            yield np.array(bits)


def brute_force_mask(fitness, d: int):
    best = min(all_masks(d), key=lambda m: fitness(m))
    return best, fitness(best)


def planted_rmse(X: np.ndarray, planted: np.ndarray, w: np.ndarray, spurious: np.ndarray):
    """Fitness whose unique minimiser is ``planted``.

    The target uses coefficients ``w`` on the planted features; a mask
    predicts with ``w`` on its planted members and ``spurious`` on the rest,
    so every wrong bit adds error.
    """
    y = X @ np.where(planted, w, 0.0)
    v = np.where(planted, w, spurious)

    def fitness(mask: np.ndarray) -> float:
        r = y - X @ np.where(mask, v, 0.0)
        return float(np.sqrt(r @ r / r.size))

    return fitness
