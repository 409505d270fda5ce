"""Bayesian backfitting sum-of-trees sampler reporting inclusion proportions.

A compact sum-of-trees MCMC for continuous responses: grow, prune and
change moves with the usual depth prior alpha*(1+d)^-beta, conjugate
normal leaf values, and an inverse-chi-square error variance. Only the
machinery needed for variable-importance scoring is implemented: the
quantity of interest is the posterior average share of split rules using
each feature.
"""

from __future__ import annotations

import numpy as np

# 10% quantile of the chi-square distribution with 3 degrees of freedom,
# used to anchor the error-variance prior at the q=0.90 convention.
CHI2_Q10_DF3 = 0.5843744


class _Node:
    __slots__ = ("feature", "cut", "left", "right", "parent", "depth", "mu")

    def __init__(self, parent=None, depth=0):
        self.feature = -1
        self.cut = np.nan
        self.left = None
        self.right = None
        self.parent = parent
        self.depth = depth
        self.mu = 0.0

    @property
    def is_leaf(self):
        return self.left is None


class _Tree:
    def __init__(self, n):
        self.root = _Node()
        self.leaf_of = np.zeros(n, dtype=np.int64)
        self.leaves = [self.root]
        self.fit = np.zeros(n)

    def refresh_fit(self):
        mus = np.array([leaf.mu for leaf in self.leaves])
        self.fit = mus[self.leaf_of]

    def split_features(self):
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                out.append(node.feature)
                stack.extend((node.left, node.right))
        return out

    def nog_nodes(self):
        """Internal nodes whose both children are leaves (prunable)."""
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                if node.left.is_leaf and node.right.is_leaf:
                    out.append(node)
                else:
                    stack.extend((node.left, node.right))
        return out


class SumOfTreesSampler:
    """Backfitting MCMC over a fixed-size forest; tracks feature inclusion."""

    def __init__(self, n_trees=200, alpha=0.95, beta=2.0, k=2.0,
                 n_burn=150, n_draws=150, n_cut=100, move_probs=(0.4, 0.4, 0.2)):
        self.n_trees = n_trees
        self.alpha = alpha
        self.beta = beta
        self.k = k
        self.n_burn = n_burn
        self.n_draws = n_draws
        self.n_cut = n_cut
        self.move_probs = np.asarray(move_probs, dtype=np.float64)

    # -- likelihood pieces -------------------------------------------------

    def _node_ll(self, n, s):
        """Marginal log likelihood of a node, constant and SSE terms dropped.

        Terms that cancel in every acceptance ratio we form (the n*log
        and sum-of-squares pieces) are omitted.
        """
        v = self.sigma2_ + n * self.sigma_mu2_
        return 0.5 * np.log(self.sigma2_ / v) + \
            self.sigma_mu2_ * s * s / (2.0 * self.sigma2_ * v)

    def _split_prior(self, depth):
        return self.alpha * (1.0 + depth) ** (-self.beta)

    # -- moves ---------------------------------------------------------------

    def _propose_cut(self, rng):
        j = int(rng.integers(self.d_))
        grid = self.cutpoints_[j]
        if len(grid) == 0:
            return j, None
        return j, float(grid[rng.integers(len(grid))])

    def _try_grow(self, tree, resid, rng):
        leaf_idx = int(rng.integers(len(tree.leaves)))
        leaf = tree.leaves[leaf_idx]
        j, cut = self._propose_cut(rng)
        if cut is None:
            return
        rows = np.nonzero(tree.leaf_of == leaf_idx)[0]
        go_left = self.x_[rows, j] <= cut
        n_l = int(go_left.sum())
        n_r = len(rows) - n_l
        if n_l == 0 or n_r == 0:
            return
        r = resid[rows]
        s = float(r.sum())
        s_l = float(r[go_left].sum())
        ll_ratio = self._node_ll(n_l, s_l) + self._node_ll(n_r, s - s_l) \
            - self._node_ll(len(rows), s)
        d = leaf.depth
        p_split = self._split_prior(d)
        p_child = self._split_prior(d + 1)
        prior_ratio = np.log(p_split) + 2.0 * np.log1p(-p_child) - np.log1p(-p_split)
        b = len(tree.leaves)
        # growing turns this leaf into a prunable node, and removes its
        # parent from the prunable set when the sibling is also a leaf
        parent_was_nog = leaf.parent is not None and self._sibling_is_leaf(leaf)
        n_nog_after = len(tree.nog_nodes()) + (0 if parent_was_nog else 1)
        trans_ratio = np.log(self.move_probs[1]) - np.log(self.move_probs[0]) \
            + np.log(b) - np.log(max(n_nog_after, 1))
        if np.log(rng.random()) < ll_ratio + prior_ratio + trans_ratio:
            leaf.feature = j
            leaf.cut = cut
            leaf.left = _Node(leaf, d + 1)
            leaf.right = _Node(leaf, d + 1)
            tree.leaves[leaf_idx] = leaf.left
            tree.leaves.append(leaf.right)
            right_id = len(tree.leaves) - 1
            tree.leaf_of[rows[~go_left]] = right_id

    @staticmethod
    def _sibling_is_leaf(leaf):
        parent = leaf.parent
        if parent is None:
            return False
        sib = parent.right if parent.left is leaf else parent.left
        return sib.is_leaf

    def _try_prune(self, tree, resid, rng):
        nogs = tree.nog_nodes()
        if not nogs:
            return
        node = nogs[int(rng.integers(len(nogs)))]
        li = tree.leaves.index(node.left)
        ri = tree.leaves.index(node.right)
        rows_l = np.nonzero(tree.leaf_of == li)[0]
        rows_r = np.nonzero(tree.leaf_of == ri)[0]
        s_l = float(resid[rows_l].sum())
        s_r = float(resid[rows_r].sum())
        n_l, n_r = len(rows_l), len(rows_r)
        ll_ratio = self._node_ll(n_l + n_r, s_l + s_r) \
            - self._node_ll(n_l, s_l) - self._node_ll(n_r, s_r)
        d = node.depth
        p_split = self._split_prior(d)
        p_child = self._split_prior(d + 1)
        prior_ratio = np.log1p(-p_split) - np.log(p_split) - 2.0 * np.log1p(-p_child)
        b_after = len(tree.leaves) - 1
        trans_ratio = np.log(self.move_probs[0]) - np.log(self.move_probs[1]) \
            + np.log(len(nogs)) - np.log(b_after)
        if np.log(rng.random()) < ll_ratio + prior_ratio + trans_ratio:
            node.feature = -1
            node.cut = np.nan
            node.left = None
            node.right = None
            keep = min(li, ri)
            drop = max(li, ri)
            tree.leaves[keep] = node
            last = len(tree.leaves) - 1
            tree.leaf_of[tree.leaf_of == drop] = keep
            if drop != last:
                tree.leaves[drop] = tree.leaves[last]
                tree.leaf_of[tree.leaf_of == last] = drop
            tree.leaves.pop()

    def _try_change(self, tree, resid, rng):
        nogs = tree.nog_nodes()
        if not nogs:
            return
        node = nogs[int(rng.integers(len(nogs)))]
        j, cut = self._propose_cut(rng)
        if cut is None:
            return
        li = tree.leaves.index(node.left)
        ri = tree.leaves.index(node.right)
        rows = np.nonzero((tree.leaf_of == li) | (tree.leaf_of == ri))[0]
        go_left = self.x_[rows, j] <= cut
        n_l = int(go_left.sum())
        n_r = len(rows) - n_l
        if n_l == 0 or n_r == 0:
            return
        r = resid[rows]
        s_new_l = float(r[go_left].sum())
        s_tot = float(r.sum())
        old_l = np.nonzero(tree.leaf_of == li)[0]
        s_old_l = float(resid[old_l].sum())
        ll_new = self._node_ll(n_l, s_new_l) + self._node_ll(n_r, s_tot - s_new_l)
        ll_old = self._node_ll(len(old_l), s_old_l) \
            + self._node_ll(len(rows) - len(old_l), s_tot - s_old_l)
        if np.log(rng.random()) < ll_new - ll_old:
            node.feature = j
            node.cut = cut
            tree.leaf_of[rows[go_left]] = li
            tree.leaf_of[rows[~go_left]] = ri

    def _draw_leaf_values(self, tree, resid, rng):
        for idx, leaf in enumerate(tree.leaves):
            rows = tree.leaf_of == idx
            n = int(rows.sum())
            s = float(resid[rows].sum())
            var = 1.0 / (1.0 / self.sigma_mu2_ + n / self.sigma2_)
            mean = var * s / self.sigma2_
            leaf.mu = mean + np.sqrt(var) * rng.standard_normal()
        tree.refresh_fit()

    # -- main loop -----------------------------------------------------------

    def fit(self, x, y, rng):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n, d = x.shape
        self.x_ = x
        self.d_ = d
        spread = y.max() - y.min()
        if spread <= 0:
            self.inclusion_ = np.zeros(d)
            return self
        y_std = (y - y.min()) / spread - 0.5
        self.sigma_mu2_ = (0.5 / (self.k * np.sqrt(self.n_trees))) ** 2
        sd = max(float(y_std.std()), 1e-8)
        nu = 3.0
        lam = sd * sd * CHI2_Q10_DF3 / nu
        self.sigma2_ = sd * sd
        self.cutpoints_ = []
        for j in range(d):
            uniq = np.unique(x[:, j])
            if len(uniq) < 2:
                self.cutpoints_.append(np.empty(0))
                continue
            mids = 0.5 * (uniq[:-1] + uniq[1:])
            if len(mids) > self.n_cut:
                pick = np.linspace(0, len(mids) - 1, self.n_cut).round().astype(int)
                mids = mids[pick]
            self.cutpoints_.append(mids)

        trees = [_Tree(n) for _ in range(self.n_trees)]
        total_fit = np.zeros(n)
        inclusion = np.zeros(d)
        kept = 0
        for it in range(self.n_burn + self.n_draws):
            for tree in trees:
                total_fit -= tree.fit
                resid = y_std - total_fit
                move = rng.choice(3, p=self.move_probs)
                if move == 0:
                    self._try_grow(tree, resid, rng)
                elif move == 1:
                    self._try_prune(tree, resid, rng)
                else:
                    self._try_change(tree, resid, rng)
                self._draw_leaf_values(tree, resid, rng)
                total_fit += tree.fit
            err = y_std - total_fit
            scale = nu * lam + float(err @ err)
            self.sigma2_ = scale / rng.chisquare(nu + n)
            if it >= self.n_burn:
                splits = np.concatenate([tree.split_features() for tree in trees]) \
                    if any(not t.root.is_leaf for t in trees) else np.empty(0, int)
                if len(splits):
                    inclusion += np.bincount(splits.astype(int), minlength=d) / len(splits)
                kept += 1
        self.inclusion_ = inclusion / max(kept, 1)
        return self

    def importance(self) -> np.ndarray:
        """Posterior mean share of split rules that use each feature."""
        return self.inclusion_
