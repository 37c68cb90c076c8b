"""Descriptive statistics exported as plot-ready CSV files.

Output files and the figure each one feeds:

``summary.csv``
    per-column counts, moments and category frequencies (single-feature bars).
``grouped_<g>_<v>.csv``
    mean of ``v`` per category of ``g`` (bar charts such as incentives by
    customer type, or savings by heating fuel).
``corr_matrix.csv``
    square Pearson matrix with a header row and column (heatmap).
``scatter_<x>_<y>.csv``
    ``x``, ``y`` and up to three hue columns (colour-coded scatter).

Standard deviations use the population (divide-by-n) convention.
"""
from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .dataset import MISSING, FeatureMatrix, Table
from .errors import DataError
from .stats import pearson_columns


@dataclass
class SummaryStats:
    column: str
    count: int
    missing: int
    mean: float | None = None
    std: float | None = None
    min: float | None = None
    max: float | None = None
    frequencies: list[tuple[str, int]] = field(default_factory=list)


def summarize(t: Table) -> list[SummaryStats]:
    out = []
    for col in t.columns:
        present = [v for v in col.values if v is not MISSING]
        s = SummaryStats(col.name, len(present), len(col.values) - len(present))
        if col.is_numeric and present:
            a = np.asarray(present, dtype=float)
            s.mean, s.std = float(a.mean()), float(a.std())
            s.min, s.max = float(a.min()), float(a.max())
        elif not col.is_numeric:
            counts = Counter(str(v) for v in present)
            s.frequencies = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        out.append(s)
    return out


def write_summary(stats: Sequence[SummaryStats], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column", "count", "missing", "mean", "std", "min", "max", "frequencies"])
        for s in stats:
            nums = ["" if v is None else repr(v) for v in (s.mean, s.std, s.min, s.max)]
            freq = "; ".join(f"{k}:{n}" for k, n in s.frequencies)
            w.writerow([s.column, s.count, s.missing, *nums, freq])


@dataclass
class GroupedMean:
    group: str
    count: int
    mean: float


@dataclass
class GroupedResult:
    groups: list[GroupedMean]
    excluded: int


def grouped_mean(t: Table, group_col: str, value_col: str) -> GroupedResult:
    """Mean of ``value_col`` per category of ``group_col``; rows missing either are excluded."""
    g, v = t.column(group_col), t.column(value_col)
    if not v.is_numeric:
        raise DataError(f"value column {value_col!r} is not numeric")
    sums: dict[str, list[float]] = {}
    excluded = 0
    for key, val in zip(g.values, v.values):
        if key is MISSING or val is MISSING:
            excluded += 1
            continue
        sums.setdefault(str(key), []).append(float(val))
    groups = [GroupedMean(k, len(vals), float(np.mean(vals))) for k, vals in sorted(sums.items())]
    return GroupedResult(groups, excluded)


def write_grouped(res: GroupedResult, group_col: str, value_col: str, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([group_col, "count", f"mean {value_col}"])
        for gm in res.groups:
            w.writerow([gm.group, gm.count, repr(gm.mean)])


def pearson(x, y) -> float | None:
    """Pearson correlation, or ``None`` when either input is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"pearson needs equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise DataError("pearson needs at least two points")
    r = float(pearson_columns(x[:, None], y)[0])
    return None if math.isnan(r) else r


@dataclass
class CorrMatrix:
    """Pearson matrix; NaN entries mark pairs involving a constant column."""

    names: list[str]
    values: np.ndarray

    def get(self, a: str, b: str) -> float | None:
        v = self.values[self.names.index(a), self.names.index(b)]
        return None if math.isnan(v) else float(v)

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["", *self.names])
            for name, row in zip(self.names, self.values):
                w.writerow([name, *("NA" if math.isnan(v) else repr(float(v)) for v in row)])


def correlation_matrix(fm: FeatureMatrix, include_targets: bool = True) -> CorrMatrix:
    if fm.n_rows < 2:
        raise DataError("correlation needs at least two rows")
    names = list(fm.feature_names)
    cols = [fm.X]
    if include_targets:
        names += list(fm.targets)
        cols += [np.column_stack(list(fm.targets.values()))] if fm.targets else []
    M = np.hstack(cols)
    d = M.shape[1]
    values = np.full((d, d), np.nan)
    for j in range(d):
        values[j] = pearson_columns(M, M[:, j])
    const = np.ptp(M, axis=0) == 0
    values = (values + values.T) / 2  # exact symmetry
    values[np.diag_indices(d)] = np.where(const, np.nan, 1.0)
    return CorrMatrix(names, values)


def table_correlation(t: Table, a: str, b: str) -> float | None:
    """Pearson r of two numeric table columns over rows where both are present."""
    ca, cb = t.column(a), t.column(b)
    pairs = [(x, y) for x, y in zip(ca.values, cb.values) if x is not MISSING and y is not MISSING]
    if len(pairs) < 2:
        return None
    xs, ys = zip(*pairs)
    return pearson(xs, ys)


@dataclass
class ScatterExtract:
    columns: list[str]
    rows: list[tuple[Any, ...]]
    excluded: int


def scatter_extract(t: Table, x_col: str, y_col: str, hue_cols: Sequence[str] = ()) -> ScatterExtract:
    if len(hue_cols) > 3:
        raise DataError(f"at most three hue columns, got {len(hue_cols)}")
    cols = [t.column(x_col), t.column(y_col)] + [t.column(h) for h in hue_cols]
    for c in cols[:2]:
        if not c.is_numeric:
            raise DataError(f"scatter axis {c.name!r} is not numeric")
    rows, excluded = [], 0
    for cells in zip(*(c.values for c in cols)):
        if any(v is MISSING for v in cells):
            excluded += 1
        else:
            rows.append(cells)
    return ScatterExtract([c.name for c in cols], rows, excluded)


def write_scatter(s: ScatterExtract, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(s.columns)
        w.writerows(s.rows)


def slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower() or "col"
