import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sr4fit.forest import (Forest, ForestConfig, Leaf, Split, best_split, gini_impurity,
                           grow_tree, node_count, predict_tree, train_forest, tree_depth, tree_rng)


def brute_force_split(X, y, features, min_leaf):
    """Oracle: evaluate every midpoint of every feature by direct counting."""
    n = len(y)
    parent = gini_impurity((y > 0).sum(), (y <= 0).sum())
    best = None
    for f in sorted(features):
        values = np.unique(X[:, f])
        for lo, hi in zip(values[:-1], values[1:]):
            t = (lo + hi) / 2
            left = X[:, f] <= t
            nl, nr = left.sum(), (~left).sum()
            if nl < min_leaf or nr < min_leaf:
                continue
            child = (nl * gini_impurity((y[left] > 0).sum(), (y[left] <= 0).sum())
                     + nr * gini_impurity((y[~left] > 0).sum(), (y[~left] <= 0).sum())) / n
            dec = parent - child
            if dec > 1e-12 and (best is None or dec > best[2] + 1e-12):
                best = (f, t, dec)
    return best


class TestGini:
    @pytest.mark.parametrize("pos,neg,expected", [(4, 0, 0.0), (2, 2, 0.5), (3, 1, 0.375)])
    def test_values(self, pos, neg, expected):
        assert gini_impurity(pos, neg) == pytest.approx(expected)

    def test_empty(self):
        with pytest.raises(ValueError):
            gini_impurity(0, 0)


class TestBestSplit:
    def test_enumeration_example(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([-1, -1, 1, 1])
        f, t, dec = best_split(np.arange(4), X, y, [0], min_leaf=1)
        assert (f, t) == (0, 1.5)
        assert dec == pytest.approx(0.5)

    def test_pure_labels(self):
        X = np.arange(4.0).reshape(4, 1)
        assert best_split(np.arange(4), X, np.ones(4), [0]) is None

    def test_constant_feature(self):
        X = np.ones((4, 1))
        assert best_split(np.arange(4), X, np.array([-1, 1, -1, 1]), [0]) is None

    def test_tie_goes_to_lowest_feature(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        f, t, _ = best_split(np.arange(2), X, np.array([-1, 1]), [1, 0])
        assert (f, t) == (0, 0.5)

    @given(st.integers(2, 25), st.integers(1, 3), st.integers(1, 4), st.integers(0, 10**6))
    def test_matches_brute_force(self, n, d, min_leaf, seed):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 6, size=(n, d)).astype(float)
        y = rng.choice([-1.0, 1.0], size=n)
        got = best_split(np.arange(n), X, y, range(d), min_leaf)
        want = brute_force_split(X, y, range(d), min_leaf)
        if want is None:
            assert got is None
        else:
            assert got is not None
            assert got[2] == pytest.approx(want[2], abs=1e-12)
            assert (got[0], got[1]) == (want[0], want[1])


class TestGrowTree:
    def test_pure_leaf(self):
        X = np.arange(6.0).reshape(6, 1)
        tree = grow_tree(X, np.ones(6), ForestConfig(min_leaf=1), tree_rng(0, 0))
        assert tree == Leaf(1.0, 6)

    def test_stump(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([-1.0, -1, 1, 1])
        cfg = ForestConfig(max_depth=1, min_leaf=1, bootstrap=False)
        assert grow_tree(X, y, cfg, tree_rng(0, 0)) == Split(0, 1.5, Leaf(0.0, 2), Leaf(1.0, 2))

    def test_xor(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([-1.0, 1, 1, -1])
        cfg = ForestConfig(max_depth=2, min_leaf=1, features_per_split=2)
        tree = grow_tree(X, y, cfg, tree_rng(0, 0))
        assert tree_depth(tree) == 2
        assert np.array_equal(predict_tree(tree, X), (y > 0).astype(float))

    def test_zero_gain_split_follows_tie_break(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        f, t, dec = best_split(np.arange(4), X, np.array([-1.0, 1, 1, -1]), [0, 1], allow_zero=True)
        assert (f, t, dec) == (0, 0.5, 0.0)
        assert best_split(np.arange(4), X, np.array([-1.0, 1, 1, -1]), [0, 1]) is None

    @given(st.integers(2, 30), st.integers(1, 3), st.integers(0, 10**6))
    def test_unrestricted_tree_fits_training_data(self, n, d, seed):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 4, size=(n, d)).astype(float)
        X = np.unique(X, axis=0)
        y = rng.choice([-1.0, 1.0], size=X.shape[0])
        cfg = ForestConfig(max_depth=len(y) + 1, min_leaf=1, features_per_split=d, bootstrap=False)
        tree = grow_tree(X, y, cfg, tree_rng(seed, 0))
        assert np.array_equal(predict_tree(tree, X), (y > 0).astype(float))

    @given(st.integers(5, 60), st.integers(1, 4), st.integers(1, 4), st.integers(1, 5),
           st.integers(0, 10**6))
    def test_invariants(self, n, d, depth, min_leaf, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, d))
        y = rng.choice([-1.0, 1.0], size=n)
        cfg = ForestConfig(max_depth=depth, min_leaf=min_leaf)
        tree = grow_tree(X, y, cfg, tree_rng(seed, 0))
        assert tree_depth(tree) <= depth

        def check(node, rows):
            if isinstance(node, Leaf):
                assert node.count == len(rows) >= min_leaf or node.count == n
                assert node.pos_frac == pytest.approx((y[rows] > 0).mean())
                return
            left = X[rows, node.feature] <= node.threshold
            check(node.left, rows[left])
            check(node.right, rows[~left])

        check(tree, np.arange(n))


class TestForest:
    def data(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(80, 5))
        y = np.where(X[:, 0] + X[:, 1] > 0, 1.0, -1.0)
        return X, y

    def test_tree_count(self):
        X, y = self.data()
        assert len(train_forest(X, y, ForestConfig(n_trees=5)).trees) == 5

    def test_deterministic(self):
        X, y = self.data()
        cfg = ForestConfig(n_trees=4, seed=9)
        assert train_forest(X, y, cfg) == train_forest(X, y, cfg)

    def test_no_randomness_gives_identical_trees(self):
        X, y = self.data()
        f = train_forest(X, y, ForestConfig(n_trees=4, bootstrap=False, features_per_split=5))
        assert len(set(f.trees)) == 1

    def test_seeds_differ(self):
        X, y = self.data()
        assert train_forest(X, y, ForestConfig(seed=1)) != train_forest(X, y, ForestConfig(seed=2))

    def test_round_trip(self):
        X, y = self.data()
        f = train_forest(X, y, ForestConfig(n_trees=3))
        assert Forest.from_dict(f.to_dict()) == f

    def test_trees_fit_training_data(self):
        X, y = self.data()
        f = train_forest(X, y, ForestConfig(n_trees=10))
        votes = np.mean([predict_tree(t, X) for t in f.trees], axis=0)
        assert np.mean((votes > 0.5) == (y > 0)) > 0.85
        assert all(node_count(t) >= 1 for t in f.trees)

    @pytest.mark.parametrize("kwargs", [{"n_trees": 0}, {"max_depth": 0}, {"min_leaf": 0},
                                        {"features_per_split": 0}, {"seed": -1}])
    def test_bad_config(self, kwargs):
        with pytest.raises(ValueError):
            ForestConfig(**kwargs)

    def test_too_many_candidates(self):
        with pytest.raises(ValueError):
            train_forest(np.ones((4, 2)), np.ones(4), ForestConfig(features_per_split=3))
