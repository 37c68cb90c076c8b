"""Ingestion, cleaning, encoding and splitting of the raw project table.

Cells are held as Python values with ``None`` as the missing marker. Numeric
columns (kind ``integer`` or ``ordinal``) hold ``int``/``float``; categorical
columns hold ``str``.
"""
from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError
from .rng import make_rng
from .stats import pearson_columns

MISSING = None
KINDS = ("categorical", "integer", "ordinal")
NUMERIC_KINDS = ("integer", "ordinal")

# Column layout of the New York residential retrofit dataset.
NY_TARGETS = (
    "First Year Energy Savings $ Estimate",
    "Estimated Annual kWh Savings",
    "Estimated Annual MMBtu Savings",
)
NY_COLUMNS = (
    "Reporting Period",
    "Home Performance Project ID",
    "Home Performance Site ID",
    "Project County",
    "Project City",
    "Project Zip",
    "Gas Utility",
    "Electric Utility",
    "Project Completion Date",
    "Customer Type",
    "Low-Rise or Home Performance Indicator",
    "Total Project Cost",
    "Total Incentives",
    "Type of Program Financing",
    "Amount Financed Through Program",
    "Pre-Retrofit Home Heating Fuel Type",
    "Year Home Built",
    "Size of Home",
    "Volume of Home",
    "Number of Units",
    "Measure Type",
    "Estimated Annual kWh Savings",
    "Estimated Annual MMBtu Savings",
    "First Year Energy Savings $ Estimate",
    "Homeowner Received Green Jobs-Green NY Free/Reduced Cost Audit (Y/N)",
    "Location",
)


@dataclass
class Column:
    name: str
    kind: str
    values: list[Any]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_numeric(self) -> bool:
        return self.kind in NUMERIC_KINDS

    def n_missing(self) -> int:
        return sum(v is MISSING for v in self.values)


@dataclass
class Table:
    columns: list[Column]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        dup = sorted({n for n in names if names.count(n) > 1})
        if dup:
            raise DataError(f"duplicate column names: {dup}")
        lengths = {len(c.values) for c in self.columns}
        if len(lengths) > 1:
            raise DataError(f"columns have unequal lengths: {sorted(lengths)}")

    @property
    def row_count(self) -> int:
        return len(self.columns[0].values) if self.columns else 0

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise DataError(f"unknown column {name!r}")

    def with_column(self, col: Column) -> Table:
        return Table([col if c.name == col.name else c for c in self.columns])


@dataclass
class CleaningRules:
    """Value-level corrections applied before encoding.

    An ``anomaly_remaps`` entry whose target is ``None`` maps the value onto
    the most frequent other category of its column.
    """

    case_merges: list[tuple[str, str, str]] = field(default_factory=list)
    anomaly_remaps: list[tuple[str, Any, Any]] = field(default_factory=list)
    missing_fills: list[tuple[str, str]] = field(default_factory=list)
    drop_columns: list[str] = field(default_factory=list)


@dataclass
class TransformSpec:
    year_columns: list[str] = field(default_factory=list)
    # column -> the category that becomes 1
    binary_columns: dict[str, str] = field(default_factory=dict)


def ny_cleaning_rules() -> CleaningRules:
    return CleaningRules(
        case_merges=[("Pre-Retrofit Home Heating Fuel Type", "Natural gas", "Natural Gas")],
        anomaly_remaps=[("Electric Utility", "1347", None)],
        missing_fills=[("Type of Program Financing", "not financed")],
        drop_columns=[
            "Location",
            "Reporting Period",
            "Home Performance Project ID",
            "Home Performance Site ID",
            "Project Zip",
        ],
    )


def ny_transform_spec() -> TransformSpec:
    return TransformSpec(
        year_columns=["Project Completion Date"],
        binary_columns={
            "Customer Type": "Assisted",
            "Low-Rise or Home Performance Indicator": "Home Performance",
            "Homeowner Received Green Jobs-Green NY Free/Reduced Cost Audit (Y/N)": "Y",
        },
    )


# ---------------------------------------------------------------- ingestion

def _parse_number(text: str) -> int | float | None:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        x = float(text)
    except ValueError:
        return None
    return x if math.isfinite(x) else None


def _typed_values(name: str, raw: list[str], kind: str | None) -> Column:
    cells: list[str | None] = [MISSING if s.strip() == "" else s.strip() for s in raw]
    parsed = [MISSING if s is MISSING else _parse_number(s) for s in cells]
    all_numeric = all(p is not None for s, p in zip(cells, parsed) if s is not MISSING)
    if kind is None:
        kind = "integer" if all_numeric and any(s is not MISSING for s in cells) else "categorical"
    if kind == "categorical":
        return Column(name, kind, cells)
    for i, (s, p) in enumerate(zip(cells, parsed)):
        if s is not MISSING and p is None:
            raise DataError(f"column {name!r} declared {kind} but row {i} holds {s!r}")
    return Column(name, kind, parsed)


def load_csv(path: str | Path, schema: Mapping[str, str] | None = None) -> Table:
    """Read a header-first CSV into a :class:`Table`.

    Without a schema entry a column is ``integer`` when every non-empty cell
    parses as a number, otherwise ``categorical``. Row indices in error
    messages count data rows from 0.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8-sig") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty; a header row is required")
    header = [h.strip() for h in rows[0]]
    seen: set[str] = set()
    for h in header:
        if h in seen:
            raise DataError(f"duplicate header name {h!r}")
        seen.add(h)
    schema = dict(schema or {})
    unknown = sorted(set(schema) - seen)
    if unknown:
        raise DataError(f"schema names unknown columns: {unknown}")

    width = len(header)
    raw: list[list[str]] = [[] for _ in header]
    for i, row in enumerate(rows[1:]):
        if not row and width == 1:
            row = [""]
        if len(row) != width:
            raise DataError(f"row {i} has {len(row)} cells, header has {width}")
        for j, cell in enumerate(row):
            raw[j].append(cell)
    return Table([_typed_values(h, raw[j], schema.get(h)) for j, h in enumerate(header)])


def write_table_csv(t: Table, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(t.names)
        for i in range(t.row_count):
            w.writerow(["" if c.values[i] is MISSING else c.values[i] for c in t.columns])


# ----------------------------------------------------------------- cleaning

def _majority(values: Iterable[Any], exclude: Any) -> Any:
    counts = Counter(v for v in values if v is not MISSING and not _same(v, exclude))
    if not counts:
        raise DataError(f"no category left to absorb anomaly {exclude!r}")
    return min(counts, key=lambda v: (-counts[v], str(v)))


def _same(value: Any, target: Any) -> bool:
    if value is MISSING or target is MISSING:
        return value is target
    return value == target or str(value) == str(target)


def apply_corrections(t: Table, rules: CleaningRules) -> Table:
    referenced = (
        [c for c, _, _ in rules.case_merges]
        + [c for c, _, _ in rules.anomaly_remaps]
        + [c for c, _ in rules.missing_fills]
        + list(rules.drop_columns)
    )
    missing = sorted({c for c in referenced if c not in t})
    if missing:
        raise DataError(f"cleaning rules reference nonexistent columns: {missing}")

    cols = {c.name: Column(c.name, c.kind, list(c.values)) for c in t.columns}
    for name, old, new in rules.case_merges:
        col = cols[name]
        col.values = [new if v == old else v for v in col.values]
    for name, old, new in rules.anomaly_remaps:
        col = cols[name]
        target = _majority(col.values, old) if new is None else new
        col.values = [target if _same(v, old) else v for v in col.values]
    for name, fill in rules.missing_fills:
        col = cols[name]
        if col.is_numeric:
            number = _parse_number(str(fill))
            if number is None:
                raise DataError(f"column {name!r} is numeric; fill {fill!r} is not a number")
            fill = number
        col.values = [fill if v is MISSING else v for v in col.values]
    drop = set(rules.drop_columns)
    return Table([cols[c.name] for c in t.columns if c.name not in drop])


_YEAR = re.compile(r"(?<!\d)(\d{4})(?!\d)")


def _year_of(name: str, v: Any) -> int | None:
    if v is MISSING:
        return MISSING
    if isinstance(v, (int, float)) and float(v).is_integer() and 1000 <= v <= 9999:
        return int(v)
    m = _YEAR.search(str(v))
    if m is None:
        raise DataError(f"column {name!r}: cannot read a year from {v!r}")
    return int(m.group(1))


def transform(t: Table, spec: TransformSpec) -> Table:
    """Truncate date columns to their year and recode two-category columns as 0/1."""
    for name in list(spec.year_columns) + list(spec.binary_columns):
        if name not in t:
            raise DataError(f"transform references nonexistent column {name!r}")
    out = t
    for name in spec.year_columns:
        col = t.column(name)
        out = out.with_column(Column(name, "ordinal", [_year_of(name, v) for v in col.values]))
    for name, one in spec.binary_columns.items():
        col = out.column(name)
        present = {v for v in col.values if v is not MISSING}
        if present <= {0, 1} and all(isinstance(v, (int, float)) for v in present):
            continue
        if len(present) > 2:
            shown = sorted(map(str, present))[:5]
            raise DataError(f"column {name!r} has {len(present)} categories, binary needs <= 2: {shown}")
        if present and not any(_same(v, one) for v in present):
            raise DataError(f"column {name!r} has no category {one!r}; found {sorted(map(str, present))}")
        values = [MISSING if v is MISSING else int(_same(v, one)) for v in col.values]
        out = out.with_column(Column(name, "integer", values))
    return out


# ----------------------------------------------------------------- encoding

@dataclass
class FeatureMatrix:
    feature_names: list[str]
    X: np.ndarray
    targets: dict[str, np.ndarray]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise DataError(f"X shape {self.X.shape} does not match {len(self.feature_names)} feature names")
        if not np.all(np.isfinite(self.X)):
            raise DataError("feature matrix contains non-finite values")
        for name, y in list(self.targets.items()):
            y = np.asarray(y, dtype=float)
            if y.shape != (self.X.shape[0],):
                raise DataError(f"target {name!r} has shape {y.shape}, expected ({self.X.shape[0]},)")
            self.targets[name] = y

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def target(self, name: str) -> np.ndarray:
        try:
            return self.targets[name]
        except KeyError:
            raise DataError(f"unknown target {name!r}; have {sorted(self.targets)}") from None

    def to_csv(self, path: str | Path) -> None:
        names = list(self.feature_names) + list(self.targets)
        cols = [self.X[:, j] for j in range(self.n_features)] + list(self.targets.values())
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for i in range(self.n_rows):
                w.writerow([repr(float(c[i])) for c in cols])

    @classmethod
    def from_csv(cls, path: str | Path, target_names: Sequence[str]) -> FeatureMatrix:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(rows[0]))
        tset = set(target_names)
        fidx = [j for j, h in enumerate(header) if h not in tset]
        return cls(
            [header[j] for j in fidx],
            body[:, fidx],
            {h: body[:, j] for j, h in enumerate(header) if h in tset},
        )


def top_categories(values: Sequence[Any], top_k: int) -> list[str]:
    """Most frequent categories, ties broken lexicographically."""
    counts = Counter(str(v) for v in values)
    return sorted(counts, key=lambda c: (-counts[c], c))[:top_k]


def encode_dummies(t: Table, targets: Sequence[str], top_k: int = 10) -> FeatureMatrix:
    """Numeric design matrix: numeric columns pass through, categoricals become indicators.

    A categorical column with more than two categories yields one indicator per
    top-``top_k`` category; rows in any other category are all-zero. A
    categorical with one or two categories yields a single indicator of its
    most frequent category.
    """
    if top_k < 1:
        raise DataError(f"top_k must be >= 1, got {top_k}")
    absent = [name for name in targets if name not in t]
    if absent:
        raise DataError(f"target columns not in table: {absent}")
    tset = set(targets)

    names: list[str] = []
    cols: list[np.ndarray] = []
    ys: dict[str, np.ndarray] = {}
    for col in t.columns:
        if col.n_missing():
            raise DataError(f"column {col.name!r} has {col.n_missing()} missing values; add a fill rule or drop it")
        if col.name in tset:
            if not col.is_numeric:
                raise DataError(f"target column {col.name!r} is not numeric")
            ys[col.name] = np.asarray(col.values, dtype=float)
            continue
        if col.is_numeric:
            names.append(col.name)
            cols.append(np.asarray(col.values, dtype=float))
            continue
        as_text = [str(v) for v in col.values]
        n_cat = len(set(as_text))
        keep = top_categories(as_text, top_k if n_cat > 2 else 1)
        for cat in keep:
            names.append(f"{col.name}={cat}")
            cols.append(np.array([v == cat for v in as_text], dtype=float))
    X = np.column_stack(cols) if cols else np.empty((t.row_count, 0))
    return FeatureMatrix(names, X, {name: ys[name] for name in targets})


# ---------------------------------------------------------------- splitting

@dataclass(frozen=True)
class SplitIndices:
    train: list[int]
    validation: list[int]
    test: list[int]
    seed: int

    def to_dict(self) -> dict:
        return {"seed": self.seed, "train": self.train, "validation": self.validation, "test": self.test}

    @classmethod
    def from_dict(cls, d: Mapping) -> SplitIndices:
        return cls(list(d["train"]), list(d["validation"]), list(d["test"]), int(d["seed"]))


def _exact(r: float) -> Fraction:
    # decimal reading of the ratio, so 0.2 is exactly 1/5
    return Fraction(repr(float(r)))


def split_sizes(n: int, ratios: Sequence[float] = (0.6, 0.2, 0.2)) -> tuple[int, int, int]:
    if len(ratios) != 3:
        raise DataError(f"need three ratios (train, validation, test), got {list(ratios)}")
    if any(not 0 < r < 1 for r in ratios):
        raise DataError(f"every ratio must lie in (0, 1): {list(ratios)}")
    fr = [_exact(r) for r in ratios]
    if abs(float(sum(fr)) - 1.0) > 1e-9:
        raise DataError(f"ratios must sum to 1: {list(ratios)}")
    n_val = math.floor(n * fr[1])
    n_test = math.floor(n * fr[2])
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1 or n < 5:
        raise DataError(f"{n} rows are too few for a nonempty {list(ratios)} split")
    return n_train, n_val, n_test


def split(
    fm: FeatureMatrix | int,
    ratios: Sequence[float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> SplitIndices:
    """Seeded shuffle partitioned into train/validation/test.

    Validation and test sizes are ``floor(n * ratio)``; train takes the rest.
    Each part is returned in ascending index order.
    """
    n = fm if isinstance(fm, int) else fm.n_rows
    n_train, n_val, _ = split_sizes(n, ratios)
    perm = make_rng(seed, "split").permutation(n)
    parts = np.split(perm, [n_train, n_train + n_val])
    return SplitIndices(*(sorted(int(i) for i in p) for p in parts), seed=int(seed))


def threshold_filter(
    fm: FeatureMatrix,
    target: str,
    tau: float,
    rows: Sequence[int] | None = None,
) -> np.ndarray:
    """Boolean feature mask: nonconstant features with ``|r| >= tau`` on ``rows``."""
    if tau < 0:
        raise DataError(f"tau must be >= 0, got {tau}")
    y = fm.target(target)
    idx = np.arange(fm.n_rows) if rows is None else np.asarray(rows, dtype=int)
    if len(idx) < 2:
        raise DataError("threshold filter needs at least two rows")
    r = pearson_columns(fm.X[idx], y[idx])
    nonconstant = np.ptp(fm.X[idx], axis=0) > 0
    if tau == 0:
        return nonconstant
    with np.errstate(invalid="ignore"):
        return nonconstant & (np.abs(r) >= tau)


def prepare(
    t: Table,
    rules: CleaningRules,
    spec: TransformSpec,
    targets: Sequence[str],
    top_k: int = 10,
) -> FeatureMatrix:
    return encode_dummies(transform(apply_corrections(t, rules), spec), targets, top_k)
