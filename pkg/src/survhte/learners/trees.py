"""Regression trees, a bagged-tree probability learner, and a regression
forest with depth-weighted split-frequency importance.

Split search delegates to the kernel backend (compiled when available).
"""

from __future__ import annotations

import numpy as np

from .._kernels import best_split
from .base import check_matrix, clamp_probability, expit


class RegressionTree:
    """CART-style regression tree grown by exhaustive SSE split search.

    Nodes live in parallel arrays; ``feature[i] < 0`` marks a leaf. Ties
    between equally good splits go to the lowest feature index so
    structure is deterministic given the data and the feature subsets.
    """

    def __init__(self, max_depth=4, min_leaf=10, mtry=None, min_gain=1e-12):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.mtry = mtry
        self.min_gain = min_gain

    def fit(self, x, y, rng=None):
        x = check_matrix(x)
        y = np.asarray(y, dtype=np.float64)
        n, d = x.shape
        feature, threshold, left, right, value, depth = [], [], [], [], [], []
        stack = [(np.arange(n), 0, -1, False)]
        while stack:
            idx, dep, parent, is_right = stack.pop()
            node = len(feature)
            if parent >= 0:
                (right if is_right else left)[parent] = node
            feature.append(-1)
            threshold.append(np.nan)
            left.append(-1)
            right.append(-1)
            value.append(float(y[idx].mean()))
            depth.append(dep)
            if dep >= self.max_depth or len(idx) < 2 * self.min_leaf:
                continue
            if self.mtry is not None and self.mtry < d:
                feats = np.sort(rng.choice(d, size=self.mtry, replace=False))
            else:
                feats = np.arange(d)
            best = (-np.inf, -1, np.nan)
            ynode = np.ascontiguousarray(y[idx])
            for j in feats:
                col = np.ascontiguousarray(x[idx, j])
                order = np.argsort(col, kind="stable")
                thr, gain, _ = best_split(col, ynode, order, self.min_leaf)
                if gain > best[0]:
                    best = (gain, int(j), thr)
            gain, j, thr = best
            if j < 0 or gain <= self.min_gain:
                continue
            feature[node] = j
            threshold[node] = thr
            go_left = x[idx, j] <= thr
            stack.append((idx[~go_left], dep + 1, node, True))
            stack.append((idx[go_left], dep + 1, node, False))
        self.feature_ = np.array(feature)
        self.threshold_ = np.array(threshold)
        self.left_ = np.array(left)
        self.right_ = np.array(right)
        self.value_ = np.array(value)
        self.depth_ = np.array(depth)
        self.dim_ = d
        return self

    def predict(self, x):
        x = check_matrix(x, self.dim_)
        node = np.zeros(len(x), dtype=np.int64)
        active = self.feature_[node] >= 0
        while active.any():
            cur = node[active]
            feats = self.feature_[cur]
            goes_left = x[active, feats] <= self.threshold_[cur]
            node[active] = np.where(goes_left, self.left_[cur], self.right_[cur])
            active = self.feature_[node] >= 0
        return self.value_[node]

    def split_counts(self, d: int, max_level: int) -> np.ndarray:
        """(max_level, d) split counts; level 1 is the root split."""
        counts = np.zeros((max_level, d))
        internal = self.feature_ >= 0
        for f, dep in zip(self.feature_[internal], self.depth_[internal]):
            if dep < max_level:
                counts[dep, f] += 1
        return counts


class BaggedTreesLogistic:
    """Bootstrap-aggregated regression trees on a binary outcome.

    Tree outputs are averaged on the logit scale. When no column varies
    there is nothing to resample over, so the ensemble collapses to the
    sample mean instead of adding bootstrap noise to it.
    """

    def __init__(self, n_trees=50, max_depth=4, min_leaf=20):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, x, y, rng, fold_labels=None, roles=None):
        x = check_matrix(x)
        y = np.asarray(y, dtype=np.float64)
        self.dim_ = x.shape[1]
        if all(len(np.unique(x[:, j])) < 2 for j in range(x.shape[1])):
            self.constant_ = float(y.mean())
            self.trees_ = []
            return self
        self.constant_ = None
        n = len(y)
        self.trees_ = []
        for _ in range(self.n_trees):
            rows = rng.integers(0, n, size=n)
            tree = RegressionTree(self.max_depth, self.min_leaf)
            self.trees_.append(tree.fit(x[rows], y[rows]))
        return self

    def predict(self, x):
        x = check_matrix(x, self.dim_)
        if self.constant_ is not None:
            return np.full(len(x), self.constant_)
        logits = np.zeros(len(x))
        for tree in self.trees_:
            logit_p = clamp_probability(tree.predict(x))
            logits += np.log(logit_p / (1.0 - logit_p))
        return expit(logits / len(self.trees_))


class RegressionForest:
    """Subsampled regression forest with split-frequency importance.

    Importance of a feature is its share of splits in the top levels of
    the trees, with level L weighted by L^-2; feature subsampling per
    node lets secondary features surface in the counts.
    """

    def __init__(self, n_trees=200, max_depth=6, min_leaf=5, mtry=None,
                 subsample=0.5, importance_levels=4):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.mtry = mtry
        self.subsample = subsample
        self.importance_levels = importance_levels

    def fit(self, x, y, rng):
        x = check_matrix(x)
        y = np.asarray(y, dtype=np.float64)
        n, d = x.shape
        self.dim_ = d
        mtry = self.mtry if self.mtry is not None else max(1, int(np.ceil(np.sqrt(d))))
        m = max(2 * self.min_leaf, int(np.ceil(self.subsample * n)))
        self.trees_ = []
        for _ in range(self.n_trees):
            rows = rng.choice(n, size=min(m, n), replace=False)
            tree = RegressionTree(self.max_depth, self.min_leaf, mtry=mtry)
            self.trees_.append(tree.fit(x[rows], y[rows], rng=rng))
        return self

    def predict(self, x):
        x = check_matrix(x, self.dim_)
        out = np.zeros(len(x))
        for tree in self.trees_:
            out += tree.predict(x)
        return out / len(self.trees_)

    def importance(self) -> np.ndarray:
        levels = self.importance_levels
        counts = np.zeros((levels, self.dim_))
        for tree in self.trees_:
            counts += tree.split_counts(self.dim_, levels)
        level_totals = counts.sum(axis=1)
        weights = 1.0 / np.arange(1, levels + 1) ** 2
        freq = np.divide(counts, level_totals[:, None],
                         out=np.zeros_like(counts), where=level_totals[:, None] > 0)
        return weights @ freq / weights.sum()
