"""CART classification trees (Gini) and a bootstrap random forest."""

from __future__ import annotations

import math

import numpy as np

from ..errors import EmptyDataset


def _best_split(x, y):
    """Best Gini threshold on one feature: (weighted impurity, threshold) or None if constant."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None
    n = xs.size
    left_n = np.arange(1, n, dtype=float)
    right_n = n - left_n
    left_pos = np.cumsum(ys)[:-1].astype(float)
    right_pos = ys.sum() - left_pos
    impurity = (left_pos * (left_n - left_pos) / left_n + right_pos * (right_n - right_pos) / right_n)
    impurity = np.where(valid, impurity, np.inf)
    i = int(np.argmin(impurity))
    thr = 0.5 * (xs[i] + xs[i + 1])
    if not xs[i] <= thr < xs[i + 1]:
        thr = xs[i]
    return float(impurity[i]), float(thr)


class DecisionTree:
    """Binary-class CART tree grown to purity unless ``max_depth``/``min_split`` stop it.

    At each node ``mtry`` features are tried in random order; if none of them
    can split the node the search continues through the remaining features.
    Zero-gain splits are allowed so interactions such as XOR can be found.
    """

    def __init__(self, mtry=None, min_split=2, max_depth=None):
        self.mtry = mtry
        self.min_split = min_split
        self.max_depth = max_depth

    def fit(self, X, y, rng=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        if X.shape[0] == 0:
            raise EmptyDataset("cannot grow a tree on zero rows")
        rng = np.random.default_rng(rng)
        d = X.shape[1]
        mtry = d if self.mtry is None else max(1, min(d, self.mtry))
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(idx):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(y[idx].mean()))
            return len(feature) - 1

        root = new_node(np.arange(X.shape[0]))
        stack = [(root, np.arange(X.shape[0]), 0)]
        while stack:
            node, idx, depth = stack.pop()
            pos = y[idx].sum()
            if (idx.size < self.min_split or pos == 0 or pos == idx.size
                    or (self.max_depth is not None and depth >= self.max_depth)):
                continue
            best = None
            order = rng.permutation(d)
            for rank, f in enumerate(order):
                if rank >= mtry and best is not None:
                    break
                found = _best_split(X[idx, f], y[idx])
                if found is not None and (best is None or found[0] < best[0]):
                    best = (found[0], found[1], f)
            if best is None:
                continue
            _, thr, f = best
            go_left = X[idx, f] <= thr
            li, ri = idx[go_left], idx[~go_left]
            feature[node], threshold[node] = int(f), thr
            left[node] = new_node(li)
            right[node] = new_node(ri)
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))

        self.feature_ = np.array(feature)
        self.threshold_ = np.array(threshold)
        self.left_ = np.array(left)
        self.right_ = np.array(right)
        self.value_ = np.array(value)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            f = self.feature_[node]
            inner = f >= 0
            if not inner.any():
                break
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold_[node[rows]]
            node[rows] = np.where(go_left, self.left_[node[rows]], self.right_[node[rows]])
        return self.value_[node]

    @property
    def n_nodes(self) -> int:
        return self.feature_.size


class RandomForest:
    def __init__(self, n_trees=100, mtry=None, min_split=2, max_depth=None, bootstrap=True, seed=0):
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_split = min_split
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        if n == 0:
            raise EmptyDataset("cannot fit a forest on zero rows")
        mtry = self.mtry if self.mtry is not None else max(1, round(math.sqrt(d)))
        self.trees_ = []
        for t in range(self.n_trees):
            rng = np.random.default_rng([self.seed, t])
            idx = rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(mtry, self.min_split, self.max_depth).fit(X[idx], y[idx], rng)
            self.trees_.append(tree)
        return self

    def predict_proba(self, X) -> np.ndarray:
        return np.mean([t.predict_proba(X) for t in self.trees_], axis=0)

    def decision_function(self, X) -> np.ndarray:
        return self.predict_proba(X)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)
