"""CART trees and bootstrap forests on -1/+1 labels, used as rule generators.

Randomness comes from numpy's PCG64 generator. Each tree draws from its
own stream, ``SeedSequence(seed, spawn_key=(tree_index,))``, so trees are
reproducible individually and independent of training order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Splits whose Gini decrease does not exceed this are treated as no gain;
# guards against round-off producing "positive" decreases on useless splits.
MIN_DECREASE = 1e-12


@dataclass(frozen=True)
class Leaf:
    pos_frac: float
    count: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Leaf | Split"
    right: "Leaf | Split"


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 25
    max_depth: int = 4
    min_leaf: int = 5
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("n_trees", "max_depth", "min_leaf"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be a positive integer")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def n_candidates(self, d):
        k = self.features_per_split or math.ceil(math.sqrt(d))
        if k > d:
            raise ValueError(f"features_per_split={k} exceeds the {d} available features")
        return k


@dataclass(frozen=True)
class Forest:
    trees: tuple
    config: ForestConfig = field(default_factory=ForestConfig)

    def to_dict(self):
        return {"config": vars(self.config).copy(), "trees": [node_to_dict(t) for t in self.trees]}

    @classmethod
    def from_dict(cls, payload):
        return cls(tuple(node_from_dict(t) for t in payload["trees"]), ForestConfig(**payload["config"]))


def gini_impurity(pos, neg):
    """Two-class Gini impurity ``1 - p^2 - (1 - p)^2`` of a node."""
    total = pos + neg
    if total < 1:
        raise ValueError("Gini impurity of an empty node is undefined")
    p = pos / total
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _split_scan(x, positive, min_leaf, allow_zero=False):
    """Best (decrease, threshold) for one feature, or None."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    n = xs.shape[0]
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    pos_left = np.cumsum(positive[order], dtype=float)[:-1]
    pos_total = float(positive.sum())
    pos_right = pos_total - pos_left
    valid = (xs[1:] != xs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    # n * weighted child impurity; 2 p (1 - p) * n_child == 2 pos (n_child - pos) / n_child
    child = 2.0 * (pos_left * (n_left - pos_left) / n_left + pos_right * (n_right - pos_right) / n_right)
    parent = 2.0 * pos_total * (n - pos_total) / n
    decrease = (parent - child) / n
    if allow_zero:
        decrease[decrease <= MIN_DECREASE] = 0.0
    decrease[~valid] = -np.inf
    i = int(np.argmax(decrease))
    if not (decrease[i] > MIN_DECREASE or allow_zero):
        return None
    lo, hi = xs[i], xs[i + 1]
    threshold = 0.5 * (lo + hi)
    if not lo <= threshold < hi:
        threshold = lo
    return float(decrease[i]), float(threshold)


def best_split(rows, X, y, candidate_features, min_leaf=1, allow_zero=False):
    """Best Gini split of ``rows`` over ``candidate_features``.

    Thresholds are midpoints between consecutive distinct values. Ties go
    to the lowest feature index, then the lowest threshold. Returns
    ``(feature, threshold, decrease)`` or None when no split has positive
    decrease with at least ``min_leaf`` rows on each side. With
    ``allow_zero`` a split without gain is returned as well (decrease 0).
    """
    rows = np.asarray(rows)
    if rows.shape[0] < 2 * min_leaf:
        return None
    positive = (np.asarray(y)[rows] > 0).astype(float)
    best = None
    for f in sorted(int(f) for f in candidate_features):
        found = _split_scan(X[rows, f], positive, min_leaf, allow_zero)
        if found is not None and (best is None or found[0] > best[2]):
            best = (f, found[1], found[0])
    return best


def grow_tree(X, y, config, rng, rows=None):
    """Grow one CART tree depth-first (left subtree before right).

    A node becomes a leaf at ``max_depth``, when pure, when it has fewer
    than ``2 * min_leaf`` rows, or when no candidate feature has a valid
    threshold. If every valid split has zero Gini decrease the first one
    in tie-break order is used.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if rows is None:
        rows = np.arange(X.shape[0])
    d = X.shape[1]
    k = config.n_candidates(d)

    def grow(rows, depth):
        pos = int(np.count_nonzero(y[rows] > 0))
        n = rows.shape[0]
        leaf = Leaf(pos / n, n)
        if depth >= config.max_depth or pos == 0 or pos == n or n < 2 * config.min_leaf:
            return leaf
        candidates = np.sort(rng.choice(d, size=k, replace=False))
        split = best_split(rows, X, y, candidates, config.min_leaf)
        if split is None:
            # An impure node can need a gainless split before a useful one
            # (XOR), so fall back to the first valid threshold.
            split = best_split(rows, X, y, candidates, config.min_leaf, allow_zero=True)
        if split is None:
            return leaf
        f, t, _ = split
        goes_left = X[rows, f] <= t
        return Split(f, t, grow(rows[goes_left], depth + 1), grow(rows[~goes_left], depth + 1))

    return grow(np.asarray(rows), 0)


def tree_rng(seed, tree_index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tree_index,)))


def train_forest(X, y, config=None):
    """Train ``config.n_trees`` trees, each on a bootstrap resample when enabled."""
    config = config or ForestConfig()
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < 1:
        raise ValueError("cannot train a forest on zero rows")
    config.n_candidates(X.shape[1])
    trees = []
    for t in range(config.n_trees):
        rng = tree_rng(config.seed, t)
        rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        trees.append(grow_tree(X, y, config, rng, rows))
    return Forest(tuple(trees), config)


def tree_depth(node):
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def node_count(node):
    if isinstance(node, Leaf):
        return 1
    return 1 + node_count(node.left) + node_count(node.right)


def predict_tree(node, X):
    """Leaf positive fraction for each row of ``X``."""
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0])

    def route(node, rows):
        if isinstance(node, Leaf):
            out[rows] = node.pos_frac
            return
        left = X[rows, node.feature] <= node.threshold
        route(node.left, rows[left])
        route(node.right, rows[~left])

    route(node, np.arange(X.shape[0]))
    return out


def node_to_dict(node):
    if isinstance(node, Leaf):
        return {"pos_frac": node.pos_frac, "count": node.count}
    return {"feature": node.feature, "threshold": node.threshold,
            "left": node_to_dict(node.left), "right": node_to_dict(node.right)}


def node_from_dict(payload):
    if "feature" in payload:
        return Split(int(payload["feature"]), float(payload["threshold"]),
                     node_from_dict(payload["left"]), node_from_dict(payload["right"]))
    return Leaf(float(payload["pos_frac"]), int(payload["count"]))
