"""Decision-tree growth on (gradient, hessian) statistics.

Three growers share one flat node layout (``feature``, ``threshold``,
``left``, ``right``, ``value``; ``feature == -1`` marks a leaf, and a row
goes left when ``x[feature] <= threshold``):

* :func:`grow_levelwise` grows every node of a level at once, using either
  histogram split search (random forest) or exact sorted-scan split search
  (level-wise boosting);
* :func:`grow_leafwise` grows best-first from feature histograms, splitting
  the leaf with the largest gain until ``max_leaves`` is reached.

Thresholds are always actual training values, so trees are unchanged by a
strictly increasing transform of any feature.
"""
import heapq
from dataclasses import dataclass

import numpy as np

from .. import _kernels

NEWTON = _kernels.NEWTON
GINI = _kernels.GINI


class Binner:
    """Quantile binning with thresholds taken from the data itself."""

    def __init__(self, max_bins=64):
        if not 2 <= max_bins <= 256:
            raise ValueError("max_bins must be in [2, 256]")
        self.max_bins = max_bins
        self.thresholds = None

    def fit(self, X):
        q = np.linspace(0.0, 1.0, self.max_bins + 1)[1:-1]
        self.thresholds = []
        for j in range(X.shape[1]):
            col = X[:, j]
            uniq = np.unique(col)
            if uniq.size <= self.max_bins:
                thr = uniq[:-1]
            else:
                thr = np.unique(np.quantile(col, q, method="lower"))
                thr = thr[thr < uniq[-1]]
            self.thresholds.append(thr)
        self.n_bins = max(len(t) for t in self.thresholds) + 1
        return self

    def transform(self, X):
        out = np.empty(X.shape, dtype=np.uint8)
        for j, thr in enumerate(self.thresholds):
            out[:, j] = np.searchsorted(thr, X[:, j], side="left")
        return np.ascontiguousarray(out)


class _GrowingTree:
    def __init__(self, capacity=64):
        self.n = 0
        self.feature = np.full(capacity, -1, dtype=np.int32)
        self.threshold = np.full(capacity, np.nan)
        self.left = np.full(capacity, -1, dtype=np.int32)
        self.right = np.full(capacity, -1, dtype=np.int32)
        self.value = np.zeros(capacity)

    def add(self, count=1):
        need = self.n + count
        if need > self.feature.size:
            cap = max(need, 2 * self.feature.size)
            for name, fill in (("feature", -1), ("threshold", np.nan), ("left", -1),
                               ("right", -1), ("value", 0.0)):
                old = getattr(self, name)
                new = np.full(cap, fill, dtype=old.dtype)
                new[: self.n] = old[: self.n]
                setattr(self, name, new)
        ids = np.arange(self.n, need)
        self.n = need
        return ids

    def finish(self):
        return (self.feature[: self.n].copy(), self.threshold[: self.n].copy(),
                self.left[: self.n].copy(), self.right[: self.n].copy(),
                self.value[: self.n].copy())


def leaf_values(G, H, criterion, l2):
    if criterion == NEWTON:
        return -G / (H + l2)
    return np.divide(G, H, out=np.zeros_like(G), where=H > 0)


def grow_levelwise(X, g, h, find_splits, *, max_depth, criterion, l2, min_gain,
                   active=None, leaf_scale=1.0):
    """Grow one tree level by level.

    ``find_splits(node_of_sample, n_nodes)`` returns per-node
    ``(gain, feature, threshold)``; rows with ``node_of_sample == -1`` are
    ignored. Returns ``(arrays, leaf_of_row)`` where ``leaf_of_row`` is the
    leaf reached by each active training row (-1 for inactive rows).
    """
    n = len(g)
    nos = np.zeros(n, dtype=np.int32)
    if active is not None:
        nos[~active] = -1
    leaf_of = np.full(n, -1, dtype=np.int64)
    tree = _GrowingTree()
    level = tree.add(1)
    depth = 0
    while level.size:
        n_nodes = level.size
        act = np.flatnonzero(nos >= 0)
        k = nos[act].astype(np.int64)
        G = np.bincount(k, weights=g[act], minlength=n_nodes)
        H = np.bincount(k, weights=h[act], minlength=n_nodes)
        if depth < max_depth:
            gain, feat, thr = find_splits(nos, n_nodes)
            split = (feat >= 0) & (gain > min_gain)
        else:
            feat = np.full(n_nodes, -1, dtype=np.int64)
            thr = np.full(n_nodes, np.nan)
            split = np.zeros(n_nodes, dtype=bool)
        leaf_nodes = level[~split]
        tree.value[leaf_nodes] = leaf_scale * leaf_values(G[~split], H[~split], criterion, l2)
        sk = np.flatnonzero(split)
        children = tree.add(2 * sk.size)
        ids = level[sk]
        tree.feature[ids] = feat[sk]
        tree.threshold[ids] = thr[sk]
        tree.left[ids] = children[0::2]
        tree.right[ids] = children[1::2]

        done = ~split[k]
        leaf_of[act[done]] = level[k[done]]
        nos[act[done]] = -1
        rows, kk = act[~done], k[~done]
        child_pos = np.full(n_nodes, -1, dtype=np.int64)
        child_pos[sk] = 2 * np.arange(sk.size)
        go_left = X[rows, feat[kk]] <= thr[kk]
        nos[rows] = (child_pos[kk] + np.where(go_left, 0, 1)).astype(np.int32)
        level = children
        depth += 1
    return tree.finish(), leaf_of


def hist_split_finder(binned, thresholds, n_bins, g, h, *, criterion, l2, min_child_weight,
                      min_samples_leaf, mtry=None, rng=None):
    """Split finder over binned features; samples ``mtry`` features per node
    when given (random forest), otherwise scans all features."""
    p = binned.shape[1]
    thr_table = np.full((p, n_bins), np.nan)
    for j, t in enumerate(thresholds):
        thr_table[j, : len(t)] = t
    all_feats = np.arange(p, dtype=np.int64)

    def find(nos, n_nodes):
        kern = _kernels.get()
        if mtry is None or mtry >= p:
            nf = np.ascontiguousarray(np.broadcast_to(all_feats, (n_nodes, p)))
        else:
            nf = np.ascontiguousarray(
                np.argsort(rng.random((n_nodes, p)), axis=1)[:, :mtry].astype(np.int64))
        hist = kern.level_histograms(binned, nos, g, h, nf, n_bins)
        gain, feat, b = kern.best_splits(hist, nf, criterion, l2, min_child_weight,
                                         float(min_samples_leaf))
        thr = np.full(n_nodes, np.nan)
        ok = feat >= 0
        thr[ok] = thr_table[feat[ok], b[ok]]
        return gain, feat, thr

    return find


def exact_split_finder(X, sorted_idx, g, h, *, criterion, l2, min_child_weight, min_samples_leaf):
    p = X.shape[1]

    def find(nos, n_nodes):
        mask = np.ones((n_nodes, p), dtype=np.uint8)
        return _kernels.get().exact_level_splits(
            X, sorted_idx, nos, g, h, mask, n_nodes, criterion, l2,
            min_child_weight, float(min_samples_leaf))

    return find


@dataclass
class _Leaf:
    node: int
    idx: np.ndarray
    hist: np.ndarray
    depth: int
    gain: float = -np.inf
    feature: int = -1
    bin: int = -1


def grow_leafwise(binned, thresholds, n_bins, g, h, *, max_leaves, max_depth, l2,
                  min_child_weight, min_samples_leaf, min_gain, leaf_scale=1.0):
    """Best-first tree on histograms with the sibling-subtraction trick."""
    kern = _kernels.get()
    n, p = binned.shape
    feats = np.ascontiguousarray(np.arange(p, dtype=np.int64)[None, :])
    msl = float(min_samples_leaf)
    tree = _GrowingTree()

    def evaluate(leaf):
        if max_depth > 0 and leaf.depth >= max_depth:
            return
        if leaf.idx.size < 2 * min_samples_leaf:
            return
        gain, feat, b = kern.best_splits(leaf.hist[None], feats, NEWTON, l2, min_child_weight, msl)
        leaf.gain, leaf.feature, leaf.bin = float(gain[0]), int(feat[0]), int(b[0])

    root = _Leaf(int(tree.add(1)[0]), np.arange(n, dtype=np.int64),
                 kern.node_histogram(binned, np.arange(n, dtype=np.int64), g, h, n_bins), 0)
    evaluate(root)
    leaves = {root.node: root}
    heap = [(-root.gain, root.node)]
    n_leaves = 1
    while heap and n_leaves < max_leaves:
        neg_gain, node = heapq.heappop(heap)
        leaf = leaves[node]
        if leaf.feature < 0 or -neg_gain <= min_gain:
            break
        go_left = binned[leaf.idx, leaf.feature] <= leaf.bin
        li, ri = leaf.idx[go_left], leaf.idx[~go_left]
        small, large = (li, ri) if li.size <= ri.size else (ri, li)
        h_small = kern.node_histogram(binned, small, g, h, n_bins)
        h_large = leaf.hist - h_small
        hl, hr = (h_small, h_large) if small is li else (h_large, h_small)
        lid, rid = (int(i) for i in tree.add(2))
        tree.feature[node] = leaf.feature
        tree.threshold[node] = thresholds[leaf.feature][leaf.bin]
        tree.left[node], tree.right[node] = lid, rid
        del leaves[node]
        for cid, cidx, chist in ((lid, li, hl), (rid, ri, hr)):
            child = _Leaf(cid, cidx, chist, leaf.depth + 1)
            evaluate(child)
            leaves[cid] = child
            if child.feature >= 0:
                heapq.heappush(heap, (-child.gain, cid))
        n_leaves += 1
    leaf_of = np.empty(n, dtype=np.int64)
    for leaf in leaves.values():
        G = g[leaf.idx].sum()
        H = h[leaf.idx].sum()
        tree.value[leaf.node] = leaf_scale * (-G / (H + l2))
        leaf_of[leaf.idx] = leaf.node
    return tree.finish(), leaf_of


class TreeEnsemble:
    """Concatenated node arrays for many trees plus their root offsets."""

    def __init__(self, feature, threshold, left, right, value, roots):
        self.feature = np.ascontiguousarray(feature, dtype=np.int32)
        self.threshold = np.ascontiguousarray(threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(left, dtype=np.int32)
        self.right = np.ascontiguousarray(right, dtype=np.int32)
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.roots = np.ascontiguousarray(roots, dtype=np.int64)

    @classmethod
    def from_trees(cls, trees):
        parts = [[], [], [], [], []]
        roots = []
        offset = 0
        for feat, thr, left, right, value in trees:
            roots.append(offset)
            parts[0].append(feat)
            parts[1].append(thr)
            parts[2].append(np.where(left >= 0, left + offset, -1))
            parts[3].append(np.where(right >= 0, right + offset, -1))
            parts[4].append(value)
            offset += len(feat)
        if not trees:
            return cls(*(np.empty(0) for _ in range(5)), np.empty(0, dtype=np.int64))
        return cls(*(np.concatenate(p) for p in parts), roots)

    @property
    def n_trees(self):
        return len(self.roots)

    def predict_sum(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if self.n_trees == 0:
            return np.zeros(len(X))
        return _kernels.get().predict_trees(X, self.feature, self.threshold, self.left,
                                            self.right, self.value, self.roots)

    def to_state(self):
        return {k: getattr(self, k) for k in ("feature", "threshold", "left", "right", "value", "roots")}

    @classmethod
    def from_state(cls, state):
        return cls(**{k: np.asarray(state[k]) for k in
                      ("feature", "threshold", "left", "right", "value", "roots")})
