"""Pipeline configuration (JSON) and its validation."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dataset import CleaningRules, TransformSpec
from .errors import ConfigError
from .selection import GaSelectParams, PsoSelectParams
from .tuning import DEFAULT_SPACES, GaTuneParams

ModelKind = Literal["lasso", "tree", "forest"]
SelectorKind = Literal["forward", "ga", "pso"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class CaseMerge(_Strict):
    column: str
    from_text: str = Field(alias="from")
    to_text: str = Field(alias="to")


class AnomalyRemap(_Strict):
    column: str
    from_value: Any = Field(alias="from")
    # null: the column's most frequent other category
    to_value: Any = Field(default=None, alias="to")


class MissingFill(_Strict):
    column: str
    fill: str


class CleaningConfig(_Strict):
    case_merges: list[CaseMerge] = []
    anomaly_remaps: list[AnomalyRemap] = []
    missing_fills: list[MissingFill] = []
    drop_columns: list[str] = []

    def rules(self) -> CleaningRules:
        return CleaningRules(
            case_merges=[(m.column, m.from_text, m.to_text) for m in self.case_merges],
            anomaly_remaps=[(m.column, m.from_value, m.to_value) for m in self.anomaly_remaps],
            missing_fills=[(m.column, m.fill) for m in self.missing_fills],
            drop_columns=list(self.drop_columns),
        )


class TransformConfig(_Strict):
    year_columns: list[str] = []
    binary_columns: dict[str, str] = {}

    def spec(self) -> TransformSpec:
        return TransformSpec(list(self.year_columns), dict(self.binary_columns))


class SplitConfig(_Strict):
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: Optional[int] = None

    @field_validator("ratios")
    @classmethod
    def _ratios(cls, v):
        if any(not 0 < r < 1 for r in v):
            raise ValueError("each ratio must lie in (0, 1)")
        if abs(sum(v) - 1) > 1e-9:
            raise ValueError("ratios must sum to 1")
        return v


class ForwardConfig(_Strict):
    max_features: Optional[int] = Field(default=None, ge=1)
    rel_tol: float = Field(default=1e-3, ge=0)


class GaSelectConfig(_Strict):
    population_size: int = Field(default=30, ge=2)
    generations: int = Field(default=40, ge=0)
    crossover_prob: float = Field(default=0.8, ge=0, le=1)
    per_bit_mutation_prob: Optional[float] = Field(default=None, ge=0, le=1)
    tournament_size: int = Field(default=3, ge=1)
    elitism_count: int = Field(default=1, ge=0)

    def params(self, seed: int) -> GaSelectParams:
        return GaSelectParams(**self.model_dump(), seed=seed)


class PsoSelectConfig(_Strict):
    swarm_size: int = Field(default=30, ge=2)
    iterations: int = Field(default=40, ge=0)
    inertia: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    v_max: float = Field(default=4.0, gt=0)

    def params(self, seed: int) -> PsoSelectParams:
        return PsoSelectParams(**self.model_dump(), seed=seed)


def _default_selection_models() -> dict[str, dict[str, Any]]:
    return {
        "lasso": {"lambda": 1.0},
        "tree": {"max_depth": 8, "min_samples_leaf": 5},
        "forest": {"n_trees": 50, "max_depth": 8, "min_samples_leaf": 5},
    }


class SelectionConfig(_Strict):
    forward: ForwardConfig = ForwardConfig()
    ga: GaSelectConfig = GaSelectConfig()
    pso: PsoSelectConfig = PsoSelectConfig()
    budget: Optional[int] = Field(default=None, ge=1)
    # hyperparameters of each model while it serves as the wrapper's fitness
    model_settings: dict[ModelKind, dict[str, Any]] = Field(default_factory=_default_selection_models)


class GaTuneConfig(_Strict):
    population_size: int = Field(default=20, ge=2)
    generations: int = Field(default=25, ge=0)
    crossover_prob: float = Field(default=0.8, ge=0, le=1)
    mutation_prob: float = Field(default=0.3, ge=0, le=1)
    tournament_size: int = Field(default=3, ge=1)
    elitism_count: int = Field(default=1, ge=0)

    def params(self, seed: int) -> GaTuneParams:
        return GaTuneParams(**self.model_dump(), seed=seed)


def _default_grids() -> dict[str, dict[str, list]]:
    return {k: {g.name: list(g.values) for g in f().genes} for k, f in DEFAULT_SPACES.items()}


class TuningConfig(_Strict):
    tuner: Literal["grid", "ga"] = "grid"
    grids: dict[ModelKind, dict[str, list]] = Field(default_factory=_default_grids)
    # fixed settings merged under every grid point (e.g. forest tree depth)
    fixed: dict[ModelKind, dict[str, Any]] = {}
    grid_cap: int = Field(default=10_000, ge=1)
    ga: GaTuneConfig = GaTuneConfig()
    # also GA-tune each decision tree and report AIC(grid) next to AIC(GA)
    tree_ga_refine: bool = False


class GroupedSpec(_Strict):
    group: str
    value: str


class ScatterSpec(_Strict):
    x: str
    y: str
    hue: list[str] = Field(default=[], max_length=3)


class ExploreConfig(_Strict):
    grouped: list[GroupedSpec] = []
    scatter: list[ScatterSpec] = []
    include_targets: bool = True


class PipelineConfig(_Strict):
    input: str
    schema_overrides: dict[str, Literal["categorical", "integer", "ordinal"]] = Field(default={}, alias="schema")
    cleaning: CleaningConfig = CleaningConfig()
    transform: TransformConfig = TransformConfig()
    targets: list[str] = Field(min_length=1)
    top_k: int = Field(default=10, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    split: SplitConfig = SplitConfig()
    threshold: float = Field(default=0.0, ge=0)
    selectors: list[SelectorKind] = Field(default=["forward", "ga", "pso"], min_length=1)
    selection: SelectionConfig = SelectionConfig()
    models: list[ModelKind] = Field(default=["lasso", "tree", "forest"], min_length=1)
    tuning: TuningConfig = TuningConfig()
    cv_folds: int = Field(default=5, ge=2)
    aic_n: Literal["validation", "train", "test"] = "validation"
    overfit_ratio: float = Field(default=0.25, ge=0)
    explore: ExploreConfig = ExploreConfig()
    output_dir: str = "runs/latest"

    @model_validator(mode="after")
    def _unique(self):
        for name in ("targets", "selectors", "models"):
            vals = getattr(self, name)
            if len(set(vals)) != len(vals):
                raise ValueError(f"{name} contains duplicates: {vals}")
        return self

    def split_seed(self) -> int:
        return self.seed if self.split.seed is None else self.split.seed

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def _path_of(loc: tuple) -> str:
    out = ""
    for part in loc:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def parse_config(data: dict, base_dir: str | Path | None = None) -> PipelineConfig:
    """Validate a config mapping; ``input`` is resolved against ``base_dir``."""
    try:
        cfg = PipelineConfig.model_validate(data)
    except ValidationError as exc:
        lines = [f"{_path_of(e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines)) from None
    if base_dir is not None and not Path(cfg.input).is_absolute():
        cfg = cfg.model_copy(update={"input": str((Path(base_dir) / cfg.input).resolve())})
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(data, path.parent)


def check_columns(cfg: PipelineConfig) -> None:
    """Check every column the config names against the input header and the cleaning flow.

    Raises :class:`ConfigError` listing each offending field path, before any
    data is processed.
    """
    path = Path(cfg.input)
    if not path.is_file():
        raise ConfigError(f"input: file not found: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        header = next(csv.reader(fh), [])
    present = {h.strip() for h in header}
    problems = []

    def need(field: str, col: str, pool: set[str]) -> None:
        if col not in pool:
            problems.append(f"{field}: column {col!r} not in input")

    for name in cfg.schema_overrides:
        need(f"schema.{name}", name, present)
    c = cfg.cleaning
    for i, m in enumerate(c.case_merges):
        need(f"cleaning.case_merges[{i}].column", m.column, present)
    for i, m in enumerate(c.anomaly_remaps):
        need(f"cleaning.anomaly_remaps[{i}].column", m.column, present)
    for i, m in enumerate(c.missing_fills):
        need(f"cleaning.missing_fills[{i}].column", m.column, present)
    for i, col in enumerate(c.drop_columns):
        need(f"cleaning.drop_columns[{i}]", col, present)
    kept = present - set(c.drop_columns)
    for i, col in enumerate(cfg.transform.year_columns):
        need(f"transform.year_columns[{i}]", col, kept)
    for col in cfg.transform.binary_columns:
        need(f"transform.binary_columns.{col}", col, kept)
    for i, col in enumerate(cfg.targets):
        need(f"targets[{i}]", col, kept)
    for i, g in enumerate(cfg.explore.grouped):
        need(f"explore.grouped[{i}].group", g.group, present)
        need(f"explore.grouped[{i}].value", g.value, present)
    for i, s in enumerate(cfg.explore.scatter):
        for field in ("x", "y"):
            need(f"explore.scatter[{i}].{field}", getattr(s, field), present)
        for j, h in enumerate(s.hue):
            need(f"explore.scatter[{i}].hue[{j}]", h, present)
    if problems:
        raise ConfigError("config names missing columns:\n  " + "\n  ".join(problems))
