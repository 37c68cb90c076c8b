"""Regression metrics, AIC, k-fold cross-validation and model ranking."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DataError
from .rng import make_rng


@dataclass(frozen=True)
class MetricsReport:
    """Error metrics for one prediction set.

    ``r2`` is ``None`` when the true values are constant (undefined R^2).
    """

    n: int
    mse: float
    rmse: float
    mae: float
    r2: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def metrics(y_true, y_pred) -> MetricsReport:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size == 0:
        raise DataError(f"need equal nonzero-length vectors, got {y_true.shape} and {y_pred.shape}")
    if not (np.all(np.isfinite(y_true)) and np.all(np.isfinite(y_pred))):
        raise DataError("metrics inputs contain non-finite values")
    resid = y_true - y_pred
    sse = float(resid @ resid)
    mse = sse / y_true.size
    centred = y_true - y_true.mean()
    sst = float(centred @ centred)
    # sst can underflow to zero for tiny but nonconstant truth; treat that as constant
    r2 = None if sst == 0.0 else 1.0 - sse / sst
    return MetricsReport(
        n=int(y_true.size),
        mse=mse,
        rmse=math.sqrt(mse),
        mae=float(np.abs(resid).mean()),
        r2=r2,
    )


def aic(n: int, mse: float, k: int) -> float:
    """``n * ln(mse) + 2k``; a perfect fit (``mse == 0``) gives ``-inf``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if mse < 0 or math.isnan(mse):
        raise ValueError(f"mse must be >= 0, got {mse}")
    if mse == 0:
        return -math.inf
    return n * math.log(mse) + 2 * k


def is_perfect_fit(aic_value: float) -> bool:
    return aic_value == -math.inf


# ------------------------------------------------------------ cross-validation

@dataclass(frozen=True)
class FoldResult:
    fold: int
    train: MetricsReport
    held_out: MetricsReport


@dataclass(frozen=True)
class CVResult:
    folds: list[FoldResult]
    mean: MetricsReport

    def to_dict(self) -> dict:
        return {
            "folds": [
                {"fold": f.fold, "train": f.train.to_dict(), "held_out": f.held_out.to_dict()} for f in self.folds
            ],
            "mean": self.mean.to_dict(),
        }


def fold_assignment(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle cut into ``folds`` contiguous blocks whose sizes differ by at most one."""
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if folds > n:
        raise DataError(f"cannot make {folds} folds from {n} rows")
    perm = make_rng(seed, "kfold").permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def kfold_cv(
    X,
    y,
    folds: int,
    fit: Callable[[np.ndarray, np.ndarray, int], object],
    seed: int = 0,
) -> CVResult:
    """Refit from scratch on every fold.

    ``fit(X_train, y_train, fold_index)`` must return an object with
    ``predict``. The mean report averages the held-out fold metrics; its
    ``r2`` is ``None`` if any fold's is.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    parts = fold_assignment(len(y), folds, seed)
    results = []
    for i, held in enumerate(parts):
        train = np.setdiff1d(np.arange(len(y)), held, assume_unique=True)
        model = fit(X[train], y[train], i)
        results.append(
            FoldResult(i, metrics(y[train], model.predict(X[train])), metrics(y[held], model.predict(X[held])))
        )
    outs = [r.held_out for r in results]
    r2s = [r.r2 for r in outs]
    mean = MetricsReport(
        n=len(y),
        mse=float(np.mean([r.mse for r in outs])),
        rmse=float(np.mean([r.rmse for r in outs])),
        mae=float(np.mean([r.mae for r in outs])),
        r2=None if any(v is None for v in r2s) else float(np.mean(r2s)),
    )
    return CVResult(results, mean)


# ----------------------------------------------------------------- comparison

@dataclass(frozen=True)
class ComparisonRow:
    selector: str
    model: str
    rmse: float
    k: int
    aic: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    @property
    def perfect_fit(self) -> bool:
        return is_perfect_fit(self.aic)

    def sort_key(self) -> tuple:
        return (self.aic, self.k, self.selector, self.model)


@dataclass(frozen=True)
class RankedReport:
    rows: list[ComparisonRow]

    @property
    def winner(self) -> ComparisonRow:
        return self.rows[0]

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "rank": i + 1,
                    "selector": r.selector,
                    "model": r.model,
                    "rmse": r.rmse,
                    "k": r.k,
                    "aic": _json_float(r.aic),
                    "perfect_fit": r.perfect_fit,
                    "winner": i == 0,
                }
                for i, r in enumerate(self.rows)
            ],
            "winner": {"selector": self.winner.selector, "model": self.winner.model},
        }

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["selector", "model", "rmse", "n_features", "aic", "winner"])
            for i, r in enumerate(self.rows):
                w.writerow([r.selector, r.model, repr(r.rmse), r.k, repr(r.aic), int(i == 0)])

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def _json_float(x: float) -> float | str:
    return x if math.isfinite(x) else ("-inf" if x < 0 else "inf")


def compare(rows: Sequence[ComparisonRow]) -> RankedReport:
    """Rank by ascending AIC, then fewer features, then (selector, model) names."""
    if not rows:
        raise ValueError("compare needs at least one row")
    return RankedReport(sorted(rows, key=ComparisonRow.sort_key))


def read_comparison_csv(path: str | Path) -> list[ComparisonRow]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            ComparisonRow(r["selector"], r["model"], float(r["rmse"]), int(r["n_features"]), float(r["aic"]))
            for r in csv.DictReader(fh)
        ]


# ------------------------------------------------------------------- overfit

@dataclass(frozen=True)
class GapSummary:
    validation_gap: float
    test_gap: float
    ratio: float
    flagged: bool
    severe: bool

    def to_dict(self) -> dict:
        return {k: _json_float(v) if isinstance(v, float) else v for k, v in asdict(self).items()}


def overfit_gap(
    train: MetricsReport,
    validation: MetricsReport,
    test: MetricsReport,
    ratio: float = 0.25,
) -> GapSummary:
    """Relative RMSE increase of validation and test over train.

    A zero training error with nonzero held-out error is reported as an
    infinite gap with ``severe`` set.
    """
    if train.rmse == 0:
        if validation.rmse == 0 and test.rmse == 0:
            return GapSummary(0.0, 0.0, ratio, False, False)
        vg = math.inf if validation.rmse > 0 else 0.0
        tg = math.inf if test.rmse > 0 else 0.0
        return GapSummary(vg, tg, ratio, True, True)
    vg = (validation.rmse - train.rmse) / train.rmse
    tg = (test.rmse - train.rmse) / train.rmse
    return GapSummary(vg, tg, ratio, vg > ratio or tg > ratio, False)
