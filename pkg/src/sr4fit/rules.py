"""Decision rules read off tree paths, and the rule indicator features."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features
from .dataset import Standardizer
from .forest import ForestConfig, Leaf, train_forest

LE = "le"
GT = "gt"

IDENTITY_PRECISION = 6
STABILITY_PRECISION = 4


class RuleError(ValueError):
    """Raised for malformed rules, e.g. an empty threshold interval."""


def format_threshold(value, precision=IDENTITY_PRECISION):
    text = f"{round(value, precision):.{precision}f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


@dataclass(frozen=True)
class Condition:
    """``x[feature] <= threshold`` (LE) or ``x[feature] > threshold`` (GT)."""

    feature: int
    op: str
    threshold: float

    def __post_init__(self):
        if self.op not in (LE, GT):
            raise RuleError(f"unknown operator {self.op!r}")

    def holds(self, X):
        col = X[..., self.feature]
        return col <= self.threshold if self.op == LE else col > self.threshold

    def text(self, feature_names=None, precision=IDENTITY_PRECISION):
        name = feature_names[self.feature] if feature_names is not None else f"x{self.feature}"
        sym = "<=" if self.op == LE else ">"
        return f"{name} {sym} {format_threshold(self.threshold, precision)}"


@dataclass(frozen=True)
class Rule:
    """A canonical conjunction of conditions (build with :func:`canonicalize`)."""

    conditions: tuple

    def __len__(self):
        return len(self.conditions)

    @property
    def features(self):
        return {c.feature for c in self.conditions}

    def key(self, precision=IDENTITY_PRECISION):
        """Identity of the rule with thresholds rounded to ``precision`` decimals."""
        return tuple((c.feature, c.op, round(c.threshold, precision)) for c in self.conditions)

    def text(self, feature_names=None, precision=IDENTITY_PRECISION):
        return " and ".join(c.text(feature_names, precision) for c in self.conditions)

    def evaluate(self, X):
        """0/1 indicator for each row of ``X`` (or a scalar for one vector)."""
        X = np.asarray(X, dtype=float)
        hit = np.ones(X.shape[:-1], dtype=bool)
        for c in self.conditions:
            hit &= c.holds(X)
        return hit.astype(np.int8)

    def to_dict(self):
        return {"conditions": [{"feature": c.feature, "op": c.op, "threshold": c.threshold}
                               for c in self.conditions]}

    @classmethod
    def from_dict(cls, payload):
        return canonicalize([Condition(int(c["feature"]), c["op"], float(c["threshold"]))
                             for c in payload["conditions"]])


def canonicalize(conditions):
    """Collapse a path's conditions into canonical form.

    Per feature, LE conditions keep the smallest threshold and GT conditions
    the largest; the result is sorted by feature with LE before GT.
    """
    conditions = list(conditions)
    if not conditions:
        raise RuleError("a rule needs at least one condition")
    upper, lower = {}, {}
    for c in conditions:
        if c.op == LE:
            upper[c.feature] = min(upper.get(c.feature, np.inf), c.threshold)
        else:
            lower[c.feature] = max(lower.get(c.feature, -np.inf), c.threshold)
    out = []
    for f in sorted(set(upper) | set(lower)):
        if f in upper and f in lower and not lower[f] < upper[f]:
            raise RuleError(f"unsatisfiable conditions on feature {f}: "
                            f"> {lower[f]} and <= {upper[f]}")
        if f in upper:
            out.append(Condition(f, LE, float(upper[f])))
        if f in lower:
            out.append(Condition(f, GT, float(lower[f])))
    return Rule(tuple(out))


@dataclass(frozen=True)
class RuleSet:
    rules: tuple
    source: int = 0

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __getitem__(self, i):
        return self.rules[i]


def path_rules(tree):
    """Every non-root node's path rule, breadth-first, without deduplication."""
    queue = deque([(tree, ())])
    while queue:
        node, path = queue.popleft()
        if path:
            yield canonicalize(path)
        if not isinstance(node, Leaf):
            queue.append((node.left, path + (Condition(node.feature, LE, node.threshold),)))
            queue.append((node.right, path + (Condition(node.feature, GT, node.threshold),)))


def extract_rules(forest, r_max=None, source=0, precision=IDENTITY_PRECISION):
    """Distinct path rules of a forest, in tree order then breadth-first order.

    Duplicates (same :meth:`Rule.key` at ``precision``) are dropped before
    the ``r_max`` cap; ``r_max=None`` keeps everything.
    """
    if r_max is not None and r_max < 0:
        raise ValueError("r_max must be non-negative")
    seen = set()
    kept = []
    for tree in forest.trees:
        for rule in path_rules(tree):
            if r_max is not None and len(kept) >= r_max:
                return RuleSet(tuple(kept), source)
            k = rule.key(precision)
            if k not in seen:
                seen.add(k)
                kept.append(rule)
    return RuleSet(tuple(kept), source)


def evaluate_rule(rule, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("evaluate_rule expects a single feature vector")
    for c in rule.conditions:
        if not 0 <= c.feature < x.shape[0]:
            raise IndexError(f"rule references feature {c.feature}; vector has {x.shape[0]}")
    return int(rule.evaluate(x))


def rule_matrix(rules, X):
    """``n x m`` 0/1 matrix with entry (i, j) = rule j evaluated on row i."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    d = X.shape[1]
    R = np.zeros((X.shape[0], len(rules)))
    for j, rule in enumerate(rules):
        if any(not 0 <= c.feature < d for c in rule.conditions):
            raise ValueError(f"rule {j} references a feature outside the {d} columns of X")
        R[:, j] = rule.evaluate(X)
    return R


def extended_matrix(X_std, R):
    """``Z = [X_std | R]`` with raw columns first."""
    X_std = np.asarray(X_std, dtype=float)
    R = np.asarray(R, dtype=float)
    if X_std.ndim != 2 or R.ndim != 2:
        raise ValueError("X_std and R must be 2-D matrices")
    if X_std.shape[0] != R.shape[0]:
        raise ValueError(f"row mismatch: X has {X_std.shape[0]} rows, R has {R.shape[0]}")
    return np.hstack([X_std, R])


class RuleFeatureTransformer(TransformerMixin, BaseEstimator):
    """Learn rules from a forest on -1/+1 targets and map X to ``[X_std | R]``.

    Parameters
    ----------
    r_max : int or None
        Cap on distinct rules; 0 disables rules, None keeps all.
    n_trees, max_depth, min_leaf, max_features, bootstrap :
        Forest settings; ``max_features=None`` means ceil(sqrt(d)).
    random_state : int
        Forest seed.
    """

    def __init__(self, r_max=100, n_trees=25, max_depth=4, min_leaf=5, max_features=None,
                 bootstrap=True, random_state=0):
        self.r_max = r_max
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state

    def forest_config(self):
        return ForestConfig(n_trees=self.n_trees, max_depth=self.max_depth, min_leaf=self.min_leaf,
                            features_per_split=self.max_features, bootstrap=self.bootstrap,
                            seed=int(self.random_state))

    def fit(self, X, y, forest=None, source=0):
        """Train the forest (unless ``forest`` is supplied) and extract rules.

        Rules are learned on the original feature values; only the raw
        columns of the output are standardized.
        """
        X = check_features(X)
        if self.r_max == 0:
            self.forest_ = None
            self.rules_ = RuleSet((), source)
        else:
            self.forest_ = forest if forest is not None else train_forest(X, y, self.forest_config())
            self.rules_ = extract_rules(self.forest_, self.r_max, source)
        self.standardizer_ = Standardizer().fit(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "rules_")
        X = check_features(X, n_features=self.n_features_in_, allow_empty=True)
        return extended_matrix(self.standardizer_.transform(X), rule_matrix(self.rules_, X))
