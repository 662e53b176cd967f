"""Pure numpy implementations of the kernel API.

These define the semantics of every kernel. The compiled module mirrors
them loop-for-loop; summation orders match wherever numpy allows it
(``bincount`` and ``cumsum`` accumulate sequentially), so tree structures
usually agree bit-for-bit between backends.
"""
import numpy as np

NEWTON = 0
GINI = 1


def _score(g, h, criterion, l2):
    if criterion == NEWTON:
        return g * g / (h + l2)
    return (g * g + (h - g) * (h - g)) / h


def _admissible(hl, hr, cl, cr, criterion, min_child_weight, min_samples_leaf):
    ok = (cl >= min_samples_leaf) & (cr >= min_samples_leaf)
    if criterion == NEWTON:
        return ok & (hl >= min_child_weight) & (hr >= min_child_weight)
    return ok & (hl > 0) & (hr > 0)


def level_histograms(binned, node_of_sample, g, h, node_features, n_bins):
    n_nodes, kf = node_features.shape
    hist = np.zeros((n_nodes, kf, n_bins, 3))
    active = np.flatnonzero(node_of_sample >= 0)
    nodes = node_of_sample[active].astype(np.int64)
    size = n_nodes * n_bins
    for k in range(kf):
        feats = node_features[nodes, k]
        sel = feats >= 0
        if not sel.any():
            continue
        rows = active[sel]
        key = nodes[sel] * n_bins + binned[rows, feats[sel]]
        hist[:, k, :, 0] = np.bincount(key, weights=g[rows], minlength=size).reshape(n_nodes, n_bins)
        hist[:, k, :, 1] = np.bincount(key, weights=h[rows], minlength=size).reshape(n_nodes, n_bins)
        hist[:, k, :, 2] = np.bincount(key, minlength=size).reshape(n_nodes, n_bins)
    return hist


def node_histogram(binned, idx, g, h, n_bins):
    p = binned.shape[1]
    hist = np.zeros((p, n_bins, 3))
    gi, hi = g[idx], h[idx]
    sub = binned[idx]
    for j in range(p):
        col = sub[:, j]
        hist[j, :, 0] = np.bincount(col, weights=gi, minlength=n_bins)
        hist[j, :, 1] = np.bincount(col, weights=hi, minlength=n_bins)
        hist[j, :, 2] = np.bincount(col, minlength=n_bins)
    return hist


def best_splits(hist, node_features, criterion, l2, min_child_weight, min_samples_leaf):
    n_nodes, p, nb, _ = hist.shape
    cum = np.cumsum(hist, axis=2)
    tot = cum[:, :, -1, :]
    G, H, C = tot[..., 0:1], tot[..., 1:2], tot[..., 2:3]
    gl, hl, cl = cum[:, :, :-1, 0], cum[:, :, :-1, 1], cum[:, :, :-1, 2]
    gr, hr, cr = G - gl, H - hl, C - cl
    with np.errstate(divide="ignore", invalid="ignore"):
        parent = _score(G, H, criterion, l2)
        val = _score(gl, hl, criterion, l2) + _score(gr, hr, criterion, l2) - parent
    ok = _admissible(hl, hr, cl, cr, criterion, min_child_weight, min_samples_leaf)
    ok &= (node_features >= 0)[:, :, None] & (H > 0)
    val = np.where(ok & ~np.isnan(val), val, -np.inf).reshape(n_nodes, -1)
    gain = np.full(n_nodes, -np.inf)
    feat = np.full(n_nodes, -1, dtype=np.int64)
    bbin = np.full(n_nodes, -1, dtype=np.int64)
    if val.shape[1] == 0:
        return gain, feat, bbin
    best = np.argmax(val, axis=1)
    top = val[np.arange(n_nodes), best]
    found = top > -np.inf
    gain[found] = top[found]
    feat[found] = node_features[found, best[found] // (nb - 1)]
    bbin[found] = best[found] % (nb - 1)
    return gain, feat, bbin


def exact_level_splits(X, sorted_idx, node_of_sample, g, h, feature_mask, n_nodes,
                       criterion, l2, min_child_weight, min_samples_leaf):
    n, p = X.shape
    gain = np.full(n_nodes, -np.inf)
    feat = np.full(n_nodes, -1, dtype=np.int64)
    thr = np.full(n_nodes, np.nan)
    nos = node_of_sample.astype(np.int64)
    active = nos >= 0
    tot_g = np.bincount(nos[active], weights=g[active], minlength=n_nodes)
    tot_h = np.bincount(nos[active], weights=h[active], minlength=n_nodes)
    tot_c = np.bincount(nos[active], minlength=n_nodes).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        parent = np.where(tot_h > 0, _score(tot_g, tot_h, criterion, l2), 0.0)
    mask = feature_mask.astype(bool)
    for j in range(p):
        order = sorted_idx[j]
        nd = nos[order]
        keep = nd >= 0
        keep[keep] = mask[nd[keep], j]
        order, nd = order[keep], nd[keep]
        if order.size == 0:
            continue
        perm = np.argsort(nd, kind="stable")
        order, nd = order[perm], nd[perm]
        bounds = np.flatnonzero(np.diff(nd)) + 1
        starts = np.concatenate(([0], bounds))
        ends = np.concatenate((bounds, [nd.size]))
        for s, e in zip(starts, ends):
            node = nd[s]
            o = order[s:e]
            x = X[o, j]
            if e - s < 2:
                continue
            cand = np.flatnonzero(x[1:] > x[:-1])
            if cand.size == 0:
                continue
            gl = np.cumsum(g[o])[cand]
            hl = np.cumsum(h[o])[cand]
            cl = (cand + 1).astype(float)
            gr, hr, cr = tot_g[node] - gl, tot_h[node] - hl, tot_c[node] - cl
            ok = _admissible(hl, hr, cl, cr, criterion, min_child_weight, min_samples_leaf)
            if not ok.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                val = (_score(gl, hl, criterion, l2) + _score(gr, hr, criterion, l2)
                       - parent[node])
            val = np.where(ok & ~np.isnan(val), val, -np.inf)
            k = int(np.argmax(val))
            if val[k] > gain[node]:
                gain[node] = val[k]
                feat[node] = j
                thr[node] = x[cand[k]]
    return gain, feat, thr


def predict_trees(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    out = np.zeros(n)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        internal = feature[node] >= 0
        while internal.any():
            idx = rows[internal]
            nd = node[idx]
            go_left = X[idx, feature[nd]] <= threshold[nd]
            node[idx] = np.where(go_left, left[nd], right[nd])
            internal[idx] = feature[node[idx]] >= 0
        out += value[node]
    return out


def enet_cd(X, w, z, beta, intercept, l1, l2, tol, max_sweeps):
    X = np.asarray(X)
    r = z - intercept - X @ beta
    sw = w.sum()
    xwx = np.einsum("ij,i,ij->j", X, w, X)
    sweep = 0
    change = np.inf
    while sweep < max_sweeps:
        sweep += 1
        delta = float(np.dot(w, r) / sw)
        intercept += delta
        r -= delta
        change = abs(delta)
        for j in range(X.shape[1]):
            if xwx[j] + l2 <= 0:
                continue
            old = beta[j]
            rho = xwx[j] * old + np.dot(w * X[:, j], r)
            if rho > l1:
                new = (rho - l1) / (xwx[j] + l2)
            elif rho < -l1:
                new = (rho + l1) / (xwx[j] + l2)
            else:
                new = 0.0
            d = new - old
            if d != 0.0:
                beta[j] = new
                r -= X[:, j] * d
                change = max(change, abs(d))
        if change < tol:
            break
    return intercept, sweep, change
