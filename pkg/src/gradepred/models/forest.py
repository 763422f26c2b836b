"""Random forest regression with split-gain bookkeeping.

Each tree is grown on a bootstrap resample with a fresh random feature
subset at every node, choosing the split that most reduces the children's
summed squared error.  Candidate thresholds are midpoints between adjacent
distinct training values (at most ``max_bins`` per feature, quantile-spaced
beyond that).  Leaf values are the mean target of the training rows that
reach the leaf.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

MAX_BINS = 256


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray  # go left when x <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray  # squared-error reduction of the split at this node
    seed: int

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    n_features: int
    max_depth: int
    max_features: int


def _bin_edges(col: np.ndarray, max_bins: int) -> np.ndarray:
    uni = np.unique(col)
    if len(uni) <= 1:
        return np.zeros(0)
    if len(uni) > max_bins:
        pos = np.unique(np.quantile(np.arange(len(uni) - 1), np.linspace(0, 1, max_bins - 1)).astype(int))
        return (uni[pos] + uni[pos + 1]) / 2.0
    return (uni[:-1] + uni[1:]) / 2.0


@njit(cache=True)
def _grow(Xb, y, n_bins, boot, max_depth, mtry, seed):
    np.random.seed(seed)
    n, p = Xb.shape
    m = len(boot)
    cap = min(2 ** (max_depth + 1), 2 * m + 1) if max_depth < 40 else 2 * m + 1
    feat = np.full(cap, -1, dtype=np.int64)
    tbin = np.zeros(cap, dtype=np.int64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    gain = np.zeros(cap)
    idx = boot.copy()
    max_b = 1
    for f in range(p):
        if n_bins[f] > max_b:
            max_b = n_bins[f]
    cnt = np.zeros(max_b)
    tot = np.zeros(max_b)
    stack = np.zeros((cap, 4), dtype=np.int64)  # node, start, end, depth
    sp = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    stack[0, 3] = 0
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = stack[sp, 0]
        lo = stack[sp, 1]
        hi = stack[sp, 2]
        depth = stack[sp, 3]
        cnt_node = hi - lo
        if depth >= max_depth or cnt_node < 2:
            continue
        s_all = 0.0
        for t in range(lo, hi):
            s_all += y[idx[t]]
        parent = s_all * s_all / cnt_node
        feats = np.sort(np.random.permutation(p)[:mtry])
        best_gain = 1e-12 * (1.0 + abs(parent))
        best_f = -1
        best_b = -1
        for f in feats:
            nb = n_bins[f]
            if nb < 2:
                continue
            for b in range(nb):
                cnt[b] = 0.0
                tot[b] = 0.0
            for t in range(lo, hi):
                r = idx[t]
                cnt[Xb[r, f]] += 1.0
                tot[Xb[r, f]] += y[r]
            nl = 0.0
            sl = 0.0
            for b in range(nb - 1):
                nl += cnt[b]
                sl += tot[b]
                nr = cnt_node - nl
                if nl == 0.0 or nr == 0.0:
                    continue
                sr = s_all - sl
                g = sl * sl / nl + sr * sr / nr - parent
                if g > best_gain:
                    best_gain = g
                    best_f = f
                    best_b = b
        if best_f < 0:
            continue
        # partition idx[lo:hi] on the chosen split
        i = lo
        j = hi - 1
        while i <= j:
            if Xb[idx[i], best_f] <= best_b:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        feat[node] = best_f
        tbin[node] = best_b
        gain[node] = best_gain
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack[sp, 0] = n_nodes
        stack[sp, 1] = lo
        stack[sp, 2] = i
        stack[sp, 3] = depth + 1
        sp += 1
        stack[sp, 0] = n_nodes + 1
        stack[sp, 1] = i
        stack[sp, 2] = hi
        stack[sp, 3] = depth + 1
        sp += 1
        n_nodes += 2
    return feat[:n_nodes], tbin[:n_nodes], left[:n_nodes], right[:n_nodes], gain[:n_nodes]


@njit(cache=True)
def _apply(feat, thr, left, right, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def _leaf_means(leaf: np.ndarray, y: np.ndarray, n_nodes: int) -> np.ndarray:
    # np.mean over each leaf's rows, so a single-leaf tree reproduces the training mean exactly
    order = np.argsort(leaf, kind="stable")
    counts = np.bincount(leaf, minlength=n_nodes)
    parts = np.split(y[order], np.cumsum(counts)[:-1])
    value = np.zeros(n_nodes)
    for node in np.flatnonzero(counts):
        value[node] = parts[node].mean()
    return value


def rf_fit(X, y, n_trees: int = 100, max_depth: int = 10, seed: int = 0,
           max_features: int | None = None, max_bins: int = MAX_BINS) -> ForestModel:
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n == 0:
        raise ValueError("random forest needs at least one training row")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    mtry = max(1, int(np.ceil(p / 3))) if max_features is None else int(max_features)
    mtry = min(mtry, p) if p else 0
    edges = [_bin_edges(X[:, f], max_bins) for f in range(p)]
    Xb = np.empty((n, p), dtype=np.int64)
    for f in range(p):
        Xb[:, f] = np.searchsorted(edges[f], X[:, f], side="left")
    n_bins = np.array([len(e) + 1 for e in edges], dtype=np.int64)
    seeds = np.random.SeedSequence(seed).generate_state(n_trees, dtype=np.uint32)
    trees = []
    for t in range(n_trees):
        tseed = int(seeds[t])
        boot = np.random.default_rng(tseed).integers(0, n, size=n).astype(np.int64)
        feat, tbin, left, right, gain = _grow(Xb, y, n_bins, boot, int(max_depth), int(mtry), tseed % (2**31))
        thr = np.array([edges[f][b] if f >= 0 else np.nan for f, b in zip(feat, tbin)], dtype=float)
        leaf = _apply(feat, thr, left, right, X)
        value = _leaf_means(leaf, y, len(feat))
        trees.append(Tree(feat, thr, left, right, value, gain, tseed))
    return ForestModel(tuple(trees), p, int(max_depth), mtry)


def rf_predict(model: ForestModel, X) -> np.ndarray:
    """Unweighted mean of the trees' leaf values (accumulated as a running mean)."""
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    pred = np.zeros(X.shape[0])
    for t, tree in enumerate(model.trees):
        leaf = _apply(tree.feature, tree.threshold, tree.left, tree.right, X)
        pred += (tree.value[leaf] - pred) / (t + 1)
    return pred


def split_gains(model: ForestModel) -> np.ndarray:
    """Total squared-error reduction per input column over all splits of all trees."""
    out = np.zeros(model.n_features)
    for tree in model.trees:
        inner = tree.feature >= 0
        np.add.at(out, tree.feature[inner], tree.gain[inner])
    return out
