"""Tabular ingest and preprocessing: CSV -> RawTable -> Dataset.

Numeric columns hold float64 with NaN as the missing marker; categorical
columns hold object arrays of str with None as the missing marker.
"""
from __future__ import annotations

import csv
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _rng

log = logging.getLogger(__name__)

CHI_SQUARED = "chi_squared"
ANOVA_F = "anova_f"

# stands in for +inf so reports stay valid JSON
F_SENTINEL = sys.float_info.max


class DataError(ValueError):
    """Input data cannot be turned into a usable Dataset."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RawTable:
    column_names: tuple[str, ...]
    columns: tuple[np.ndarray, ...]
    n_rows: int
    dropped_columns: tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.column_names)) != len(self.column_names):
            raise DataError("duplicate column names")
        if len(self.columns) != len(self.column_names):
            raise DataError("column count does not match header")
        for name, col in zip(self.column_names, self.columns):
            if len(col) != self.n_rows:
                raise DataError(f"column {name!r} has {len(col)} cells, expected {self.n_rows}")

    def is_numeric(self, name: str) -> bool:
        return self.columns[self.index(name)].dtype.kind == "f"

    def index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise KeyError(f"no column named {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.columns[self.index(name)]

    def missing_mask(self, name: str) -> np.ndarray:
        return _missing(self.column(name))

    def take(self, rows: np.ndarray) -> "RawTable":
        rows = np.asarray(rows, dtype=np.intp)
        cols = tuple(_frozen(c[rows].copy()) for c in self.columns)
        return RawTable(self.column_names, cols, len(rows), self.dropped_columns)

    def without(self, names) -> "RawTable":
        """Drop the named columns (e.g. ones that leak the label)."""
        gone = [self.index(n) for n in names]
        keep = [i for i in range(len(self.columns)) if i not in gone]
        return RawTable(tuple(self.column_names[i] for i in keep), tuple(self.columns[i] for i in keep),
                        self.n_rows, self.dropped_columns + tuple(names))


def _missing(col: np.ndarray) -> np.ndarray:
    if col.dtype.kind == "f":
        return np.isnan(col)
    return np.fromiter((v is None for v in col), dtype=bool, count=len(col))


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    n_classes: int
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DataError("features must be 2-D")
        if len(self.labels) != self.features.shape[0]:
            raise DataError("labels and features disagree on row count")
        if self.features.shape[1] != len(self.feature_names):
            raise DataError("feature_names length does not match feature columns")
        if self.n_classes < 2:
            raise DataError("need at least two classes")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DataError("label out of range")
        if np.isnan(self.features).any():
            raise DataError("features contain missing values")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(
            _frozen(np.ascontiguousarray(self.features[rows])),
            _frozen(self.labels[rows].copy()),
            self.feature_names,
            self.n_classes,
            self.class_names,
        )

    def select_columns(self, cols: Sequence[int]) -> "Dataset":
        cols = list(cols)
        return Dataset(
            _frozen(np.ascontiguousarray(self.features[:, cols])),
            self.labels,
            tuple(self.feature_names[c] for c in cols),
            self.n_classes,
            self.class_names,
        )


def make_dataset(features, labels, n_classes: int | None = None, feature_names=None) -> Dataset:
    """Build a Dataset from in-memory arrays (mostly for tests and synthetic data)."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = max(int(y.max()) + 1, 2)
    if feature_names is None:
        feature_names = tuple(f"x{i}" for i in range(x.shape[1]))
    return Dataset(_frozen(x), _frozen(y.copy()), tuple(feature_names), n_classes)


@dataclass(frozen=True)
class FeatureScore:
    feature_name: str
    statistic: float
    method: str

    def __post_init__(self):
        if not (math.isfinite(self.statistic) and self.statistic >= 0):
            raise ValueError(f"bad statistic {self.statistic!r} for {self.feature_name}")


# ---------------------------------------------------------------- loading


def _parse_float(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(path, label_column: str) -> RawTable:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not in header of {path}")
        width = len(header)
        rows = []
        for i, row in enumerate(reader):
            if not row:
                continue
            if len(row) != width:
                raise DataError(f"row {i}: expected {width} cells, got {len(row)}")
            rows.append(row)

    columns = []
    for j in range(width):
        raw = [r[j].strip() for r in rows]
        parsed = [None if c == "" else _parse_float(c) for c in raw]
        if all(p is not None for p, c in zip(parsed, raw) if c != ""):
            col = np.array([np.nan if p is None else p for p in parsed], dtype=np.float64)
        else:
            col = np.array([None if c == "" else c for c in raw], dtype=object)
        columns.append(_frozen(col))
    return RawTable(tuple(header), tuple(columns), len(rows))


# ---------------------------------------------------------------- cleaning


def _cell_key(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return None
    return v


def drop_duplicates(t: RawTable) -> RawTable:
    seen = set()
    keep = []
    cols = [c.tolist() for c in t.columns]
    for i in range(t.n_rows):
        key = tuple(_cell_key(c[i]) for c in cols)
        if key not in seen:
            seen.add(key)
            keep.append(i)
    if len(keep) == t.n_rows:
        return t
    return t.take(np.array(keep, dtype=np.intp))


def drop_missing_labels(t: RawTable, label_column: str) -> RawTable:
    miss = t.missing_mask(label_column)
    if not miss.any():
        return t
    return t.take(np.flatnonzero(~miss))


def _mode(values) -> str:
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


def impute_missing(t: RawTable) -> RawTable:
    """Fill numeric gaps with the column mean, categorical gaps with the mode.

    Columns with no observed value at all are dropped and listed in
    ``dropped_columns``.
    """
    names, cols, dropped = [], [], list(t.dropped_columns)
    for name, col in zip(t.column_names, t.columns):
        miss = _missing(col)
        if t.n_rows and miss.all():
            dropped.append(name)
            log.warning("dropping column %r: every value is missing", name)
            continue
        if miss.any():
            col = col.copy()
            if col.dtype.kind == "f":
                col[miss] = col[~miss].mean()
            else:
                col[miss] = _mode(col[~miss])
            col = _frozen(col)
        names.append(name)
        cols.append(col)
    return RawTable(tuple(names), tuple(cols), t.n_rows, tuple(dropped))


def _codes(col: np.ndarray) -> tuple[np.ndarray, list]:
    values = sorted(set(col.tolist()))
    lookup = {v: i for i, v in enumerate(values)}
    return np.array([lookup[v] for v in col.tolist()], dtype=np.int64), values


def encode(t: RawTable, label_column: str) -> Dataset:
    for name, col in zip(t.column_names, t.columns):
        if _missing(col).any():
            raise DataError(f"column {name!r} still has missing values; impute first")
    labels, classes = _codes(t.column(label_column))
    if len(classes) < 2:
        raise DataError(f"label column {label_column!r} has {len(classes)} distinct value(s); need at least 2")

    names, feats = [], []
    for name, col in zip(t.column_names, t.columns):
        if name == label_column:
            continue
        if col.dtype.kind == "f":
            feats.append(col)
        else:
            feats.append(_codes(col)[0].astype(np.float64))
        names.append(name)
    x = np.column_stack(feats) if feats else np.empty((t.n_rows, 0))
    class_names = tuple(_class_name(c) for c in classes)
    return Dataset(
        _frozen(np.ascontiguousarray(x, dtype=np.float64)),
        _frozen(labels),
        tuple(names),
        len(classes),
        class_names,
    )


def _class_name(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


def preprocess(t: RawTable, label_column: str) -> Dataset:
    """dedup -> drop unlabeled -> impute -> encode."""
    t = drop_duplicates(t)
    t = drop_missing_labels(t, label_column)
    t = impute_missing(t)
    if label_column not in t.column_names:
        raise DataError(f"label column {label_column!r} has no values")
    return encode(t, label_column)


# ---------------------------------------------------------------- scoring


def equal_frequency_bins(feature: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin index per sample; edges are order statistics so any strictly
    monotone transform of ``feature`` yields the same binning."""
    x = np.asarray(feature, dtype=np.float64)
    qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    inner = np.unique(np.quantile(x, qs, method="lower"))
    inner = inner[inner < x.max()]
    return np.searchsorted(inner, x, side="left")


def chi_squared_score(feature, labels, n_bins: int = 10, name: str = "") -> FeatureScore:
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(feature) or len(labels) < 2:
        raise ValueError("feature and labels must have equal length >= 2")
    bins = equal_frequency_bins(feature, n_bins)
    n_classes = int(labels.max()) + 1
    table = np.zeros((int(bins.max()) + 1, n_classes), dtype=np.int64)
    np.add.at(table, (bins, labels), 1)
    if table.shape[0] < 2:
        return FeatureScore(name, 0.0, CHI_SQUARED)
    total = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / total
    nz = expected > 0
    stat = float((((table - expected) ** 2)[nz] / expected[nz]).sum())
    return FeatureScore(name, stat, CHI_SQUARED)


def anova_f_score(feature, labels, name: str = "") -> FeatureScore:
    x = np.asarray(feature, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    groups = [x[labels == c] for c in np.unique(labels)]
    k, n = len(groups), len(x)
    if k < 2 or n <= k:
        raise ValueError("anova needs >= 2 groups and more samples than groups")
    # centre first; the statistic is shift invariant and this keeps it stable
    x0 = x.mean()
    means = [(g - x0).mean() for g in groups]
    grand = (x - x0).mean()
    ss_between = sum(len(g) * (m - grand) ** 2 for g, m in zip(groups, means))
    ss_within = sum((((g - x0) - m) ** 2).sum() for g, m in zip(groups, means))
    ms_between = ss_between / (k - 1)
    ms_within = ss_within / (n - k)
    if ms_within == 0:
        stat = 0.0 if ms_between == 0 else F_SENTINEL
    else:
        stat = float(ms_between / ms_within)
    return FeatureScore(name, stat, ANOVA_F)


def score_features(d: Dataset, method: str, n_bins: int = 10) -> list[FeatureScore]:
    out = []
    for j, name in enumerate(d.feature_names):
        col = d.features[:, j]
        if method == CHI_SQUARED:
            out.append(chi_squared_score(col, d.labels, n_bins, name))
        elif method == ANOVA_F:
            out.append(anova_f_score(col, d.labels, name))
        else:
            raise ValueError(f"unknown scoring method {method!r}")
    return out


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0.0:
        return 0.0
    return float(a @ b) / den


def prune_correlated(d: Dataset, threshold: float = 0.9) -> Dataset:
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    n = d.n_features
    dropped = np.zeros(n, dtype=bool)
    for i in range(n):
        if dropped[i]:
            continue
        for j in range(i + 1, n):
            if not dropped[j] and abs(_pearson(d.features[:, i], d.features[:, j])) >= threshold:
                dropped[j] = True
    if not dropped.any():
        return d
    for j in np.flatnonzero(dropped):
        log.warning("dropping feature %r: correlated above %.3g with an earlier feature", d.feature_names[j], threshold)
    return d.select_columns(np.flatnonzero(~dropped))


def select_features(d: Dataset, scores: Sequence[FeatureScore], top_k: int) -> Dataset:
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    by_name = {s.feature_name: s.statistic for s in scores}
    stats = [by_name[name] for name in d.feature_names]
    if top_k > d.n_features:
        warnings.warn(f"top_k={top_k} exceeds {d.n_features} features; keeping all", stacklevel=2)
        return d
    order = sorted(range(d.n_features), key=lambda j: -stats[j])
    return d.select_columns(sorted(order[:top_k]))


# ---------------------------------------------------------------- splitting


def train_test_split(d: Dataset, train_fraction: float = 0.7, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n = d.n_rows
    n_train = math.floor(train_fraction * n)
    if n_train == 0 or n_train == n:
        raise DataError(f"split of {n} rows at {train_fraction} leaves one side empty")
    perm = _rng.permutation(n, seed)
    return d.take(perm[:n_train]), d.take(perm[n_train:])


def random_sample(d: Dataset, n: int, seed: int = 0) -> Dataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    if n >= d.n_rows:
        return d
    rows = np.sort(_rng.permutation(d.n_rows, seed)[:n])
    return d.take(rows)
