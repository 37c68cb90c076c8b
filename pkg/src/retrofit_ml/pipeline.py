"""Staged, artifact-driven pipeline.

Layout under the output directory::

    manifest.json                  config hash, seed, version, stage status
    prepared.csv                   encoded features plus targets
    split.json                     train/validation/test row indices
    explore/                       summary, grouped, correlation, scatter CSVs
    <target>/threshold_mask.json   features surviving the correlation filter
    <target>/<selector>_<model>/   selection.json, selection_trace.csv,
                                   tuning.csv, tuning_trace.csv, tuned.json,
                                   model.json, metrics.json
    <target>/comparison.csv|json   AIC-ranked table
    <target>/tree_refinement.csv   grid vs GA tuned trees (optional)

Every stage reads what the previous one wrote, so stages can be run one at a
time. Seeds for each (stage, target, selector, model) cell are derived from
the config seed; nothing depends on thread count or execution order.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import explore as ex
from .config import PipelineConfig, check_columns
from .dataset import FeatureMatrix, SplitIndices, apply_corrections, encode_dummies, load_csv, split, threshold_filter, transform
from .errors import DataError, RetrofitError
from .evaluation import ComparisonRow, aic, compare, kfold_cv, metrics, overfit_gap
from .models import fit_model, save_model
from .rng import derive_seed
from .selection import ModelEvaluator, forward_select, ga_select, pso_select
from .tuning import HyperSpace, SearchResult, ga_tune, grid_search

STAGES = ("prep", "explore", "select", "tune", "train", "compare")


def _dump(obj: Any, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _load(path: Path) -> Any:
    if not path.is_file():
        raise RetrofitError(f"missing artifact {path}; run the earlier stage first")
    return json.loads(path.read_text(encoding="utf-8"))


def _finite(x: float) -> float | str:
    return x if math.isfinite(x) else ("-inf" if x < 0 else "inf")


@dataclass
class Cell:
    """One (target, selector, model) combination."""

    target: str
    selector: str
    model: str

    @property
    def label(self) -> str:
        return f"{self.selector}_{self.model}"


class Pipeline:
    def __init__(self, cfg: PipelineConfig, out_dir: str | Path | None = None, threads: int = 1,
                 targets: list[str] | None = None, log: Callable[[str], None] | None = None):
        self.cfg = cfg
        self.out = Path(out_dir if out_dir is not None else cfg.output_dir)
        self.threads = max(1, int(threads))
        self.targets = list(targets) if targets else list(cfg.targets)
        unknown = [t for t in self.targets if t not in cfg.targets]
        if unknown:
            raise RetrofitError(f"targets {unknown} are not among the configured targets {cfg.targets}")
        self.log = log or (lambda msg: None)
        self._fm: FeatureMatrix | None = None
        self._split: SplitIndices | None = None

    # ------------------------------------------------------------ manifest

    @property
    def manifest_path(self) -> Path:
        return self.out / "manifest.json"

    def _manifest(self) -> dict:
        if self.manifest_path.is_file():
            m = json.loads(self.manifest_path.read_text(encoding="utf-8"))
            if m.get("config_hash") == self.cfg.config_hash():
                return m
        return {
            "config_hash": self.cfg.config_hash(),
            "seed": self.cfg.seed,
            "version": __version__,
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "stages": {},
        }

    def _record(self, stage: str, status: str, detail: str | None = None) -> None:
        m = self._manifest()
        entry = {"status": status, "time": datetime.now(timezone.utc).isoformat(timespec="seconds")}
        if detail:
            entry["detail"] = detail
        m["stages"][stage] = entry
        m["complete"] = all(m["stages"].get(s, {}).get("status") == "done" for s in STAGES if s != "explore")
        self.out.mkdir(parents=True, exist_ok=True)
        _dump(m, self.manifest_path)

    def _stage(self, name: str, body: Callable[[], None]) -> None:
        self.log(f"[{name}] start")
        t0 = time.perf_counter()
        self._record(name, "running")
        try:
            body()
        except Exception as exc:
            self._record(name, "failed", f"{type(exc).__name__}: {exc}")
            raise
        self._record(name, "done")
        self.log(f"[{name}] done in {time.perf_counter() - t0:.1f}s")

    # --------------------------------------------------------------- data

    def _cleaned_table(self):
        cfg = self.cfg
        return apply_corrections(load_csv(cfg.input, cfg.schema_overrides), cfg.cleaning.rules())

    def _prepared_table(self):
        return transform(self._cleaned_table(), self.cfg.transform.spec())

    def prep(self) -> None:
        def body():
            check_columns(self.cfg)
            self.out.mkdir(parents=True, exist_ok=True)
            fm = encode_dummies(self._prepared_table(), self.cfg.targets, self.cfg.top_k)
            fm.to_csv(self.out / "prepared.csv")
            s = split(fm, self.cfg.split.ratios, self.cfg.split_seed())
            _dump(s.to_dict(), self.out / "split.json")
            self._fm, self._split = None, None

        self._stage("prep", body)

    def explore(self) -> None:
        def body():
            check_columns(self.cfg)
            d = self.out / "explore"
            d.mkdir(parents=True, exist_ok=True)
            # category labels stay readable here; correlations use the encoded matrix
            t = self._cleaned_table()
            ex.write_summary(ex.summarize(t), d / "summary.csv")
            for g in self.cfg.explore.grouped:
                res = ex.grouped_mean(t, g.group, g.value)
                ex.write_grouped(res, g.group, g.value, d / f"grouped_{ex.slug(g.group)}_{ex.slug(g.value)}.csv")
            fm = encode_dummies(transform(t, self.cfg.transform.spec()), self.cfg.targets, self.cfg.top_k)
            ex.correlation_matrix(fm, self.cfg.explore.include_targets).write_csv(d / "corr_matrix.csv")
            for s in self.cfg.explore.scatter:
                ext = ex.scatter_extract(t, s.x, s.y, s.hue)
                ex.write_scatter(ext, d / f"scatter_{ex.slug(s.x)}_{ex.slug(s.y)}.csv")

        self._stage("explore", body)

    @property
    def fm(self) -> FeatureMatrix:
        if self._fm is None:
            path = self.out / "prepared.csv"
            if not path.is_file():
                raise RetrofitError(f"missing artifact {path}; run the prep stage first")
            self._fm = FeatureMatrix.from_csv(path, self.cfg.targets)
        return self._fm

    @property
    def split_indices(self) -> SplitIndices:
        if self._split is None:
            self._split = SplitIndices.from_dict(_load(self.out / "split.json"))
        return self._split

    def _parts(self, target: str, columns: np.ndarray):
        s = self.split_indices
        X = self.fm.X[:, columns]
        y = self.fm.target(target)
        return {
            name: (X[idx], y[idx])
            for name, idx in (("train", s.train), ("validation", s.validation), ("test", s.test))
        }

    def target_dir(self, target: str) -> Path:
        return self.out / ex.slug(target)

    def cell_dir(self, c: Cell) -> Path:
        return self.target_dir(c.target) / c.label

    def cells(self, target: str) -> list[Cell]:
        return [Cell(target, s, m) for s in self.cfg.selectors for m in self.cfg.models]

    def _seed(self, stage: str, c: Cell) -> int:
        return derive_seed(self.cfg.seed, stage, c.target, c.selector, c.model)

    # ----------------------------------------------------------- select

    def _threshold_mask(self, target: str) -> np.ndarray:
        mask = threshold_filter(self.fm, target, self.cfg.threshold, self.split_indices.train)
        if not mask.any():
            raise DataError(f"no feature passes the correlation threshold {self.cfg.threshold} for {target!r}")
        d = self.target_dir(target)
        d.mkdir(parents=True, exist_ok=True)
        names = [n for n, keep in zip(self.fm.feature_names, mask) if keep]
        _dump({"threshold": self.cfg.threshold, "features": names}, d / "threshold_mask.json")
        return mask

    def _select_cell(self, c: Cell, candidates: np.ndarray) -> None:
        cfg = self.cfg.selection
        parts = self._parts(c.target, candidates)
        seed = self._seed("select", c)
        ev = ModelEvaluator(
            c.model, cfg.model_settings.get(c.model, {}), *parts["train"], *parts["validation"],
            seed=seed, budget=cfg.budget, threads=self.threads,
        )
        d = int(candidates.sum())
        if c.selector == "forward":
            res = forward_select(ev, cfg.forward.max_features, cfg.forward.rel_tol)
        elif c.selector == "ga":
            res = ga_select(ev, d, cfg.ga.params(seed))
        else:
            res = pso_select(ev, d, cfg.pso.params(seed))
        pool = [n for n, keep in zip(self.fm.feature_names, candidates) if keep]
        chosen = [n for n, keep in zip(pool, res.mask) if keep]
        out = self.cell_dir(c)
        out.mkdir(parents=True, exist_ok=True)
        _dump(
            {
                "selector": c.selector,
                "model": c.model,
                "features": chosen,
                "fitness": res.fitness,
                "evaluations": res.evaluations,
                "truncated": res.truncated,
            },
            out / "selection.json",
        )
        res.write_trace(out / "selection_trace.csv")

    def select(self) -> None:
        def body():
            for target in self.targets:
                candidates = self._threshold_mask(target)
                for c in self.cells(target):
                    self.log(f"  select {c.target} {c.label}")
                    self._select_cell(c, candidates)

        self._stage("select", body)

    def _columns(self, names: list[str]) -> np.ndarray:
        index = {n: j for j, n in enumerate(self.fm.feature_names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise RetrofitError(f"selected features {missing} are not in prepared.csv")
        return np.array([index[n] for n in names], dtype=int)

    # -------------------------------------------------------------- tune

    def _space(self, model: str) -> HyperSpace:
        return HyperSpace.from_mapping(self.cfg.tuning.grids[model])

    def _val_mse(self, c: Cell, parts: dict) -> Callable[[dict], float]:
        fixed = self.cfg.tuning.fixed.get(c.model, {})
        seed = self._seed("model", c)

        def evaluate(settings: dict) -> float:
            model = fit_model(c.model, *parts["train"], {**fixed, **settings}, seed=seed)
            X_val, y_val = parts["validation"]
            resid = y_val - model.predict(X_val)
            return float(resid @ resid) / resid.size

        return evaluate

    def _search(self, c: Cell, parts: dict, tuner: str) -> SearchResult:
        space, evaluate = self._space(c.model), self._val_mse(c, parts)
        if tuner == "grid":
            return grid_search(space, evaluate, self.cfg.tuning.grid_cap, self.threads)
        return ga_tune(space, evaluate, self.cfg.tuning.ga.params(self._seed("tune", c)), self.threads)

    def _tune_cell(self, c: Cell) -> None:
        d = self.cell_dir(c)
        names = _load(d / "selection.json")["features"]
        parts = self._parts(c.target, self._columns(names))
        tuner = self.cfg.tuning.tuner
        res = self._search(c, parts, tuner)
        space = self._space(c.model)
        res.write_rows(d / "tuning.csv", space.names)
        if res.trace:
            res.write_trace(d / "tuning_trace.csv")
        settings = {**self.cfg.tuning.fixed.get(c.model, {}), **res.best_settings}
        _dump({"tuner": tuner, "settings": settings, "validation_mse": res.best_metric}, d / "tuned.json")

    def _refine_trees(self, target: str) -> None:
        """Grid-tuned against GA-tuned decision tree, per selector."""
        rows = []
        for c in self.cells(target):
            if c.model != "tree":
                continue
            names = _load(self.cell_dir(c) / "selection.json")["features"]
            parts = self._parts(c.target, self._columns(names))
            n = len(parts["validation"][1])  # both searches score validation MSE
            grid = self._search(c, parts, "grid")
            ga = self._search(c, parts, "ga")
            rows.append([
                c.selector, len(names),
                repr(grid.best_metric), repr(aic(n, grid.best_metric, len(names))),
                repr(ga.best_metric), repr(aic(n, ga.best_metric, len(names))),
            ])
        if rows:
            with (self.target_dir(target) / "tree_refinement.csv").open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["selector", "n_features", "mse_grid", "aic_grid", "mse_ga", "aic_ga"])
                w.writerows(rows)

    def tune(self) -> None:
        def body():
            for target in self.targets:
                for c in self.cells(target):
                    self.log(f"  tune {c.target} {c.label}")
                    self._tune_cell(c)
                if self.cfg.tuning.tree_ga_refine:
                    self._refine_trees(target)

        self._stage("tune", body)

    # ------------------------------------------------------------- train

    def _train_cell(self, c: Cell) -> None:
        d = self.cell_dir(c)
        names = _load(d / "selection.json")["features"]
        settings = _load(d / "tuned.json")["settings"]
        parts = self._parts(c.target, self._columns(names))
        seed = self._seed("model", c)
        model = fit_model(c.model, *parts["train"], settings, seed=seed, threads=self.threads, feature_names=names)
        save_model(model, d / "model.json", {"target": c.target, "selector": c.selector, "settings": settings})
        reports = {name: metrics(y, model.predict(X)) for name, (X, y) in parts.items()}
        gap = overfit_gap(reports["train"], reports["validation"], reports["test"], self.cfg.overfit_ratio)
        cv = kfold_cv(
            *parts["train"],
            self.cfg.cv_folds,
            lambda Xt, yt, i: fit_model(c.model, Xt, yt, settings, seed=derive_seed(seed, "fold", i)),
            seed=self._seed("cv", c),
        )
        ref = reports[self.cfg.aic_n]
        doc = {
            "n_features": len(names),
            "reports": {k: r.to_dict() for k, r in reports.items()},
            "overfit": gap.to_dict(),
            "cv": cv.to_dict(),
            "aic": _finite(aic(ref.n, ref.mse, len(names))),
            "aic_n": self.cfg.aic_n,
        }
        _dump(doc, d / "metrics.json")

    def train(self) -> None:
        def body():
            for target in self.targets:
                for c in self.cells(target):
                    self.log(f"  train {c.target} {c.label}")
                    self._train_cell(c)

        self._stage("train", body)

    # ----------------------------------------------------------- compare

    def compare(self) -> None:
        def body():
            for target in self.targets:
                rows = []
                for c in self.cells(target):
                    m = _load(self.cell_dir(c) / "metrics.json")
                    rows.append(ComparisonRow(
                        c.selector, c.model, m["reports"]["validation"]["rmse"], m["n_features"], float(m["aic"])
                    ))
                report = compare(rows)
                report.write_csv(self.target_dir(target) / "comparison.csv")
                report.write_json(self.target_dir(target) / "comparison.json")

        self._stage("compare", body)

    def run(self) -> None:
        self.prep()
        self.select()
        self.tune()
        self.train()
        self.compare()
