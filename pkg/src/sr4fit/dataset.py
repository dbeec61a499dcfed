"""Tabular data loading, splitting and scaling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus dense integer labels.

    ``labels`` holds ids ``0..C`` indexing into ``class_names``.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple = ()
    class_names: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError(f"labels length {y.shape} does not match {X.shape[0]} rows")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or infinite values")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        classes = tuple(self.class_names) or tuple(str(c) for c in range(int(y.max()) + 1))
        if y.min() < 0 or y.max() >= len(classes):
            raise DataError("label id outside the range of class names")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "class_names", classes)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return len(self.class_names)

    def subset(self, rows):
        """Rows ``rows`` as a new dataset sharing names and class mapping."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.labels[rows], self.feature_names, self.class_names)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def _parse_cell(text, line, column):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {line}, column '{column}': cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"line {line}, column '{column}': non-finite value {text!r}")
    return value


def read_table(path):
    """Header and data rows of a comma-separated UTF-8 file."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: file is empty (no header row)")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise DataError(f"{path}: line {i + 2} has {len(r)} cells, header has {len(header)}")
    return header, body


def read_feature_matrix(path, feature_names, drop=()):
    """Numeric matrix whose columns must match ``feature_names`` exactly.

    Columns listed in ``drop`` (e.g. the target) are ignored when present.
    A header-only file yields a ``0 x d`` matrix.
    """
    header, body = read_table(path)
    keep = [j for j, h in enumerate(header) if h not in set(drop)]
    names = [header[j] for j in keep]
    if names != list(feature_names):
        raise DataError(
            f"{path}: feature columns {names} do not match the model's {list(feature_names)}")
    X = np.empty((len(body), len(keep)))
    for i, r in enumerate(body):
        for k, j in enumerate(keep):
            X[i, k] = _parse_cell(r[j].strip(), i + 2, header[j])
    return X


def load_csv(path, target):
    """Load a CSV with a header row into a :class:`Dataset`.

    Class ids are assigned in order of first appearance of each distinct
    value of the ``target`` column.
    """
    header, body = read_table(path)
    if target not in header:
        raise DataError(f"{path}: target column {target!r} not found in header {header}")
    if not body:
        raise DataError(f"{path}: no data rows")
    t = header.index(target)
    feat_cols = [j for j in range(len(header)) if j != t]
    if not feat_cols:
        raise DataError(f"{path}: no feature columns besides the target")
    classes = {}
    labels = np.empty(len(body), dtype=np.int64)
    X = np.empty((len(body), len(feat_cols)))
    for i, r in enumerate(body):
        for k, j in enumerate(feat_cols):
            X[i, k] = _parse_cell(r[j].strip(), i + 2, header[j])
        labels[i] = classes.setdefault(r[t].strip(), len(classes))
    return Dataset(X, labels, tuple(header[j] for j in feat_cols), tuple(classes))


def _test_counts(class_sizes, fraction):
    counts = {}
    for c, size in class_sizes.items():
        if size < 2:
            counts[c] = 0
        else:
            counts[c] = min(max(math.floor(size * fraction + 0.5), 1), size - 1)
    return counts


def split_indices(labels, spec):
    """Stratified train/test row indices (both sorted ascending).

    Each class with at least two rows contributes ``round(n_c * f)`` test
    rows, clamped to ``[1, n_c - 1]``; singleton classes stay in training.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    n_test = math.ceil(n * spec.test_fraction)
    if n_test < 1 or n - n_test < 1:
        raise DataError(f"cannot split {n} rows with test_fraction={spec.test_fraction}")
    rng = np.random.default_rng(spec.seed)
    classes, sizes = np.unique(labels, return_counts=True)
    counts = _test_counts(dict(zip(classes.tolist(), sizes.tolist())), spec.test_fraction)
    test = []
    for c in classes.tolist():
        rows = np.flatnonzero(labels == c)
        test.extend(rng.permutation(rows)[: counts[c]].tolist())
    if not test:
        raise DataError(f"cannot split {n} rows: every class has a single row")
    test = np.sort(np.asarray(test, dtype=np.int64))
    train = np.setdiff1d(np.arange(n), test)
    return train, test


def train_test_split(data, spec):
    """Deterministic stratified split of a :class:`Dataset`."""
    train, test = split_indices(data.labels, spec)
    return data.subset(train), data.subset(test)


class Standardizer(TransformerMixin, BaseEstimator):
    """Column z-scoring with population standard deviations.

    Constant columns get mean equal to their value and std 1, so they
    transform to exact zeros.
    """

    def fit(self, X, y=None):
        X = check_features(X)
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        constant = np.ptp(X, axis=0) == 0
        means[constant] = X[0, constant]
        stds[constant] = 1.0
        self.means_ = means
        self.stds_ = stds
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "means_")
        X = check_features(X, n_features=self.n_features_in_, allow_empty=True)
        return (X - self.means_) / self.stds_

    def inverse_transform(self, X):
        check_is_fitted(self, "means_")
        X = check_features(X, n_features=self.n_features_in_)
        return X * self.stds_ + self.means_

    def to_dict(self):
        return {"means": self.means_.tolist(), "stds": self.stds_.tolist()}

    @classmethod
    def from_dict(cls, payload):
        s = cls()
        s.means_ = np.asarray(payload["means"], dtype=float)
        s.stds_ = np.asarray(payload["stds"], dtype=float)
        if s.means_.shape != s.stds_.shape or s.means_.ndim != 1:
            raise ValueError("standardizer means and stds must be equal-length vectors")
        s.n_features_in_ = s.means_.shape[0]
        return s


def standardize_fit(features):
    return Standardizer().fit(features)


def standardize_apply(standardizer, features):
    return standardizer.transform(features)


def binarize_labels(labels, positive_class, n_classes=None):
    """One-vs-rest targets: +1 where ``labels == positive_class``, else -1.

    ``labels`` may be a :class:`Dataset`, in which case its class count
    bounds ``positive_class``.
    """
    if isinstance(labels, Dataset):
        n_classes = labels.n_classes
        labels = labels.labels
    labels = np.asarray(labels)
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    if not 0 <= positive_class < n_classes:
        raise ValueError(f"unknown class id {positive_class} (have {n_classes} classes)")
    return np.where(labels == positive_class, 1.0, -1.0)
