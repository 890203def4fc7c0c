"""Tabular fairness datasets: canonical container, CSV ingestion, toy generator.

A ``Dataset`` is a dense float feature matrix plus binary labels ``y`` and a
binary sensitive attribute ``a``.  CSV loading is schema-driven: the schema
names the label/sensitive columns, which raw columns are numeric vs
categorical, and (optionally) a split column for building real source/target
partitions.  Categoricals are one-hot encoded, numerics standardized on the
fitting split, and rows with missing values dropped (with the count recorded
in the provenance note).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    DegenerateGroupError,
    EmptyDataError,
    PartitionError,
    SchemaError,
    ShapeError,
)

_DEFAULT_MISSING = ("", "?", "NA", "N/A", "nan")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with binary labels and a binary sensitive attribute."""

    X: np.ndarray
    y: np.ndarray
    a: np.ndarray
    feature_names: tuple[str, ...] = ()
    provenance: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=int)
        a = np.asarray(self.a, dtype=int)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)
        if X.ndim != 2:
            raise ShapeError("X must be 2-D")
        n = X.shape[0]
        if y.shape != (n,) or a.shape != (n,):
            raise ShapeError("X, y, a row counts disagree")
        if not np.all(np.isfinite(X)):
            raise ShapeError("X contains non-finite entries")
        for name, vec in (("y", y), ("a", a)):
            if vec.size and not np.isin(vec, (0, 1)).all():
                raise ShapeError(f"{name} must be 0/1 valued")
        if not self.feature_names:
            object.__setattr__(
                self, "feature_names", tuple(f"x{i}" for i in range(X.shape[1]))
            )
        elif len(self.feature_names) != X.shape[1]:
            raise ShapeError("feature_names length != feature count")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def group_mask(self, group: int) -> np.ndarray:
        return self.a == group

    def group_count(self, group: int) -> int:
        return int(np.count_nonzero(self.a == group))

    def subset(self, idx, note: str = "") -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.X[idx], self.y[idx], self.a[idx],
            self.feature_names,
            provenance=note or self.provenance,
        )

    def require_groups(self) -> None:
        for g in (0, 1):
            if self.group_count(g) == 0:
                raise DegenerateGroupError(f"group a={g} is empty")


@dataclass(frozen=True)
class SchemaConfig:
    """Declarative description of a raw fairness CSV.

    ``split_column`` (with ``split_source``/``split_target`` value lists) is
    only needed when partitioning by a real shift column such as a year or
    state code.  Matching against CSV cells is string-based after whitespace
    stripping.
    """

    label_column: str
    label_positive: str
    sensitive_column: str
    sensitive_group0: str
    numeric_columns: tuple[str, ...] = ()
    categorical_columns: tuple[str, ...] = ()
    split_column: str | None = None
    split_source: tuple[str, ...] = ()
    split_target: tuple[str, ...] = ()
    missing_policy: str = "drop"
    missing_markers: tuple[str, ...] = _DEFAULT_MISSING

    def __post_init__(self):
        if self.label_column == self.sensitive_column:
            raise SchemaError("label and sensitive columns must be distinct")
        if self.missing_policy != "drop":
            raise SchemaError(f"unsupported missing-value policy {self.missing_policy!r}")
        for f in ("numeric_columns", "categorical_columns", "split_source",
                  "split_target", "missing_markers"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        if not self.numeric_columns and not self.categorical_columns:
            raise SchemaError("schema lists no feature columns")

    @classmethod
    def from_dict(cls, d: dict) -> "SchemaConfig":
        try:
            return cls(
                label_column=d["label_column"],
                label_positive=str(d["label_positive"]),
                sensitive_column=d["sensitive_column"],
                sensitive_group0=str(d["sensitive_group0"]),
                numeric_columns=tuple(d.get("numeric_columns", ())),
                categorical_columns=tuple(d.get("categorical_columns", ())),
                split_column=d.get("split_column"),
                split_source=tuple(str(v) for v in d.get("split_source", ())),
                split_target=tuple(str(v) for v in d.get("split_target", ())),
                missing_policy=d.get("missing_policy", "drop"),
                missing_markers=tuple(d.get("missing_markers", _DEFAULT_MISSING)),
            )
        except KeyError as exc:
            raise SchemaError(f"schema is missing required key {exc.args[0]!r}") from exc

    @classmethod
    def from_json(cls, path) -> "SchemaConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


def _read_raw(path, schema: SchemaConfig) -> tuple[pd.DataFrame, int]:
    """Read the CSV, validate columns, drop rows with missing used values."""
    try:
        frame = pd.read_csv(
            path, dtype=str, keep_default_na=False,
            na_values=list(schema.missing_markers), skipinitialspace=True,
        )
    except FileNotFoundError:
        raise
    used = [schema.label_column, schema.sensitive_column]
    used += list(schema.numeric_columns) + list(schema.categorical_columns)
    if schema.split_column:
        used.append(schema.split_column)
    for col in used:
        if col not in frame.columns:
            raise SchemaError(f"configured column {col!r} not found in {path}")
    before = len(frame)
    frame = frame.dropna(subset=used)
    dropped = before - len(frame)
    if frame.empty:
        raise EmptyDataError(f"no usable rows left in {path} (dropped {dropped})")
    return frame.reset_index(drop=True), dropped


def _categorical_levels(frame: pd.DataFrame, schema: SchemaConfig) -> dict[str, list[str]]:
    return {
        col: sorted(frame[col].astype(str).str.strip().unique())
        for col in schema.categorical_columns
    }


def _encode(frame: pd.DataFrame, schema: SchemaConfig,
            levels: dict[str, list[str]],
            stats: dict[str, tuple[float, float]] | None,
            provenance: str) -> tuple[Dataset, dict[str, tuple[float, float]]]:
    """One-hot + standardize into a Dataset.

    ``stats`` maps numeric column -> (mean, std); when None the stats are fit
    on this frame (and returned either way, so a source fit can be reused on
    the target split).
    """
    cols: list[np.ndarray] = []
    names: list[str] = []
    fitted: dict[str, tuple[float, float]] = {}
    for col in schema.numeric_columns:
        try:
            raw = frame[col].astype(float).to_numpy()
        except ValueError as exc:
            raise SchemaError(f"numeric column {col!r} has non-numeric entries") from exc
        if stats is None:
            mu = float(raw.mean())
            sd = float(raw.std())
        else:
            mu, sd = stats[col]
        fitted[col] = (mu, sd)
        cols.append((raw - mu) / sd if sd > 0 else np.zeros_like(raw))
        names.append(col)
    for col in schema.categorical_columns:
        values = frame[col].astype(str).str.strip()
        for level in levels[col]:
            cols.append((values == level).to_numpy(dtype=float))
            names.append(f"{col}={level}")

    label = frame[schema.label_column].astype(str).str.strip()
    y = (label == schema.label_positive).to_numpy(dtype=int)
    sens = frame[schema.sensitive_column].astype(str).str.strip()
    distinct = sorted(sens.unique())
    if len(distinct) > 2:
        raise SchemaError(
            f"sensitive column {schema.sensitive_column!r} has {len(distinct)} "
            f"values; a binary attribute is required"
        )
    if schema.sensitive_group0 not in distinct:
        raise SchemaError(
            f"group-0 value {schema.sensitive_group0!r} never appears in "
            f"column {schema.sensitive_column!r}"
        )
    a = (sens != schema.sensitive_group0).to_numpy(dtype=int)

    ds = Dataset(np.column_stack(cols), y, a, tuple(names), provenance)
    return ds, fitted


def load_csv(path, schema: SchemaConfig) -> Dataset:
    """Load one CSV into a Dataset, standardizing on the loaded rows."""
    frame, dropped = _read_raw(path, schema)
    levels = _categorical_levels(frame, schema)
    note = f"csv:{Path(path).name} rows={len(frame)} dropped_missing={dropped}"
    ds, _ = _encode(frame, schema, levels, None, note)
    return ds


def split_by_column(path, schema: SchemaConfig) -> tuple[Dataset, Dataset]:
    """Partition a CSV into source/target by the schema's split column.

    One-hot levels come from the whole file so the two sides share a feature
    space; standardization statistics are fit on the source rows only and
    applied to both sides.
    """
    if not schema.split_column:
        raise SchemaError("schema has no split column configured")
    if not schema.split_source or not schema.split_target:
        raise SchemaError("schema must list split_source and split_target values")
    frame, dropped = _read_raw(path, schema)
    levels = _categorical_levels(frame, schema)
    key = frame[schema.split_column].astype(str).str.strip()
    src_frame = frame[key.isin(schema.split_source)]
    tgt_frame = frame[key.isin(schema.split_target)]
    if src_frame.empty or tgt_frame.empty:
        raise PartitionError(
            f"split on {schema.split_column!r} left source={len(src_frame)} "
            f"target={len(tgt_frame)} rows"
        )
    base = f"csv:{Path(path).name} split={schema.split_column} dropped_missing={dropped}"
    source, stats = _encode(src_frame, schema, levels, None,
                            f"{base} side=source rows={len(src_frame)}")
    target, _ = _encode(tgt_frame, schema, levels, stats,
                        f"{base} side=target rows={len(tgt_frame)}")
    return source, target


def save_dataset(ds: Dataset, path) -> None:
    """Write an encoded dataset as CSV plus a JSON sidecar (names, provenance)."""
    path = Path(path)
    frame = pd.DataFrame(ds.X, columns=list(ds.feature_names))
    frame["y"] = ds.y
    frame["a"] = ds.a
    frame.to_csv(path, index=False)
    sidecar = {
        "feature_names": list(ds.feature_names),
        "provenance": ds.provenance,
        "n": ds.n,
    }
    with open(path.with_suffix(path.suffix + ".meta.json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)


def load_dataset(path) -> Dataset:
    """Read back a dataset written by :func:`save_dataset`."""
    path = Path(path)
    frame = pd.read_csv(path, float_precision="round_trip")
    with open(path.with_suffix(path.suffix + ".meta.json"), "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    names = sidecar["feature_names"]
    X = frame[names].to_numpy(dtype=float)
    return Dataset(X, frame["y"].to_numpy(dtype=int), frame["a"].to_numpy(dtype=int),
                   tuple(names), sidecar.get("provenance", ""))


@dataclass(frozen=True)
class ToySpec:
    """Gaussian-mixture toy data with a logistic label rule.

    Each sensitive group draws features from its own Gaussian; the label is
    Bernoulli with logit ``coef . x + intercept + group1_shift * a``, so group
    and label dependence are both dial-able.
    """

    mean0: tuple[float, ...]
    mean1: tuple[float, ...]
    cov0: tuple[tuple[float, ...], ...]
    cov1: tuple[tuple[float, ...], ...]
    label_coef: tuple[float, ...]
    label_intercept: float = 0.0
    group1_shift: float = 0.0
    p_group1: float = 0.5

    def __post_init__(self):
        d = len(self.mean0)
        if len(self.mean1) != d or len(self.label_coef) != d:
            raise ShapeError("mean and coefficient dimensions disagree")
        for cov in (self.cov0, self.cov1):
            if len(cov) != d or any(len(row) != d for row in cov):
                raise ShapeError("covariance must be d x d")
        if not 0.0 < self.p_group1 < 1.0:
            raise ValueError("p_group1 must lie strictly between 0 and 1")

    def bayes_logit(self, X: np.ndarray, a: np.ndarray) -> np.ndarray:
        return X @ np.asarray(self.label_coef) + self.label_intercept \
            + self.group1_shift * a


def make_toy(spec: ToySpec, n: int, seed: int) -> Dataset:
    """Seeded draw of ``n`` samples from a toy spec."""
    if n <= 0:
        raise EmptyDataError("toy dataset needs n >= 1")
    rng = np.random.default_rng(seed)
    a = (rng.random(n) < spec.p_group1).astype(int)
    d = len(spec.mean0)
    means = np.asarray([spec.mean0, spec.mean1])
    covs = np.asarray([spec.cov0, spec.cov1])
    chol = np.linalg.cholesky(covs)
    z = rng.standard_normal((n, d))
    X = means[a] + np.einsum("nij,nj->ni", chol[a], z)
    logit = spec.bayes_logit(X, a)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(int)
    return Dataset(X, y, a, provenance=f"toy:n={n} seed={seed}")
