# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops for tree growth, tree prediction and coordinate descent.

Semantics are defined by the numpy versions in ``_pykernels``; both must
return the same values (tests compare them on random inputs).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()

DEF NEWTON = 0
DEF GINI = 1


cdef inline double _score(double g, double h, int criterion, double l2) nogil:
    if criterion == NEWTON:
        return g * g / (h + l2)
    # weighted Gini: (P^2 + N^2) / W with P = g, W = h
    return (g * g + (h - g) * (h - g)) / h


cdef inline bint _admissible(double hl, double hr, double cl, double cr, int criterion,
                             double min_child_weight, double min_samples_leaf) nogil:
    if cl < min_samples_leaf or cr < min_samples_leaf:
        return False
    if criterion == NEWTON:
        return hl >= min_child_weight and hr >= min_child_weight
    return hl > 0 and hr > 0


def level_histograms(const cnp.uint8_t[:, ::1] binned,
                     const cnp.int32_t[::1] node_of_sample,
                     const double[::1] g,
                     const double[::1] h,
                     const cnp.int64_t[:, ::1] node_features,
                     int n_bins):
    """Per-node histograms over each node's candidate features.

    ``node_features[node, k]`` is a feature index (or -1 to skip); the result
    has shape ``(n_nodes, k, n_bins, 3)`` holding (sum g, sum h, count).
    """
    cdef Py_ssize_t n = binned.shape[0]
    cdef Py_ssize_t n_nodes = node_features.shape[0]
    cdef Py_ssize_t kf = node_features.shape[1]
    hist_arr = np.zeros((n_nodes, kf, n_bins, 3), dtype=np.float64)
    cdef double[:, :, :, ::1] hist = hist_arr
    cdef Py_ssize_t i, k
    cdef cnp.int64_t j
    cdef int node, b
    with nogil:
        for i in range(n):
            node = node_of_sample[i]
            if node < 0:
                continue
            for k in range(kf):
                j = node_features[node, k]
                if j < 0:
                    continue
                b = binned[i, j]
                hist[node, k, b, 0] += g[i]
                hist[node, k, b, 1] += h[i]
                hist[node, k, b, 2] += 1.0
    return hist_arr


def node_histogram(const cnp.uint8_t[:, ::1] binned,
                   const cnp.int64_t[::1] idx,
                   const double[::1] g,
                   const double[::1] h,
                   int n_bins):
    cdef Py_ssize_t p = binned.shape[1]
    cdef Py_ssize_t m = idx.shape[0]
    hist_arr = np.zeros((p, n_bins, 3), dtype=np.float64)
    cdef double[:, :, ::1] hist = hist_arr
    cdef Py_ssize_t k, j, i
    cdef int b
    with nogil:
        for k in range(m):
            i = idx[k]
            for j in range(p):
                b = binned[i, j]
                hist[j, b, 0] += g[i]
                hist[j, b, 1] += h[i]
                hist[j, b, 2] += 1.0
    return hist_arr


def best_splits(const double[:, :, :, ::1] hist,
                const cnp.int64_t[:, ::1] node_features,
                int criterion, double l2,
                double min_child_weight, double min_samples_leaf):
    cdef Py_ssize_t n_nodes = hist.shape[0]
    cdef Py_ssize_t p = hist.shape[1]
    cdef Py_ssize_t nb = hist.shape[2]
    gain_arr = np.full(n_nodes, -np.inf)
    feat_arr = np.full(n_nodes, -1, dtype=np.int64)
    bin_arr = np.full(n_nodes, -1, dtype=np.int64)
    cdef double[::1] gain = gain_arr
    cdef cnp.int64_t[::1] feat = feat_arr
    cdef cnp.int64_t[::1] bbin = bin_arr
    cdef Py_ssize_t node, j, b
    cdef double G, H, C, gl, hl, cl, gr, hr, cr, parent, val
    with nogil:
        for node in range(n_nodes):
            for j in range(p):
                if node_features[node, j] < 0:
                    continue
                G = 0.0
                H = 0.0
                C = 0.0
                for b in range(nb):
                    G += hist[node, j, b, 0]
                    H += hist[node, j, b, 1]
                    C += hist[node, j, b, 2]
                if H <= 0:
                    continue
                parent = _score(G, H, criterion, l2)
                gl = 0.0
                hl = 0.0
                cl = 0.0
                for b in range(nb - 1):
                    gl += hist[node, j, b, 0]
                    hl += hist[node, j, b, 1]
                    cl += hist[node, j, b, 2]
                    gr = G - gl
                    hr = H - hl
                    cr = C - cl
                    if not _admissible(hl, hr, cl, cr, criterion, min_child_weight, min_samples_leaf):
                        continue
                    val = _score(gl, hl, criterion, l2) + _score(gr, hr, criterion, l2) - parent
                    if val > gain[node]:
                        gain[node] = val
                        feat[node] = node_features[node, j]
                        bbin[node] = b
    return gain_arr, feat_arr, bin_arr


def exact_level_splits(const double[:, ::1] X,
                       const cnp.int64_t[:, ::1] sorted_idx,
                       const cnp.int32_t[::1] node_of_sample,
                       const double[::1] g,
                       const double[::1] h,
                       const cnp.uint8_t[:, ::1] feature_mask,
                       int n_nodes, int criterion, double l2,
                       double min_child_weight, double min_samples_leaf):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    gain_arr = np.full(n_nodes, -np.inf)
    feat_arr = np.full(n_nodes, -1, dtype=np.int64)
    thr_arr = np.full(n_nodes, np.nan)
    cdef double[::1] gain = gain_arr
    cdef cnp.int64_t[::1] feat = feat_arr
    cdef double[::1] thr = thr_arr
    tot_arr = np.zeros((n_nodes, 3))
    cdef double[:, ::1] tot = tot_arr
    acc_arr = np.zeros((n_nodes, 3))
    cdef double[:, ::1] acc = acc_arr
    last_arr = np.zeros(n_nodes)
    cdef double[::1] last = last_arr
    parent_arr = np.zeros(n_nodes)
    cdef double[::1] parent = parent_arr
    cdef Py_ssize_t i, j, k, node
    cdef double x, gl, hl, cl, gr, hr, cr, val
    with nogil:
        for i in range(n):
            node = node_of_sample[i]
            if node < 0:
                continue
            tot[node, 0] += g[i]
            tot[node, 1] += h[i]
            tot[node, 2] += 1.0
        for node in range(n_nodes):
            if tot[node, 1] > 0:
                parent[node] = _score(tot[node, 0], tot[node, 1], criterion, l2)
        for j in range(p):
            for node in range(n_nodes):
                acc[node, 0] = 0.0
                acc[node, 1] = 0.0
                acc[node, 2] = 0.0
            for k in range(n):
                i = sorted_idx[j, k]
                node = node_of_sample[i]
                if node < 0 or not feature_mask[node, j]:
                    continue
                x = X[i, j]
                if acc[node, 2] > 0 and x > last[node]:
                    gl = acc[node, 0]
                    hl = acc[node, 1]
                    cl = acc[node, 2]
                    gr = tot[node, 0] - gl
                    hr = tot[node, 1] - hl
                    cr = tot[node, 2] - cl
                    if _admissible(hl, hr, cl, cr, criterion, min_child_weight, min_samples_leaf):
                        val = (_score(gl, hl, criterion, l2) + _score(gr, hr, criterion, l2)
                               - parent[node])
                        if val > gain[node]:
                            gain[node] = val
                            feat[node] = j
                            thr[node] = last[node]
                acc[node, 0] += g[i]
                acc[node, 1] += h[i]
                acc[node, 2] += 1.0
                last[node] = x
    return gain_arr, feat_arr, thr_arr


def predict_trees(const double[:, ::1] X,
                  const cnp.int32_t[::1] feature,
                  const double[::1] threshold,
                  const cnp.int32_t[::1] left,
                  const cnp.int32_t[::1] right,
                  const double[::1] value,
                  const cnp.int64_t[::1] roots):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_trees = roots.shape[0]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, t
    cdef cnp.int64_t node
    cdef double s
    with nogil:
        for i in range(n):
            s = 0.0
            for t in range(n_trees):
                node = roots[t]
                while feature[node] >= 0:
                    if X[i, feature[node]] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                s += value[node]
            out[i] = s
    return out_arr


def enet_cd(const double[::1, :] X,
            const double[::1] w,
            const double[::1] z,
            double[::1] beta,
            double intercept,
            double l1, double l2,
            double tol, int max_sweeps):
    """Cyclic coordinate descent for the weighted elastic-net least squares
    ``0.5 * sum w (z - b0 - X beta)^2 + l1 |beta|_1 + 0.5 * l2 |beta|^2``.

    Updates ``beta`` in place; returns ``(intercept, sweeps, max_change)``.
    """
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    r_arr = np.empty(n)
    cdef double[::1] r = r_arr
    xwx_arr = np.zeros(p)
    cdef double[::1] xwx = xwx_arr
    cdef Py_ssize_t i, j
    cdef int sweep = 0
    cdef double sw = 0.0, rho, old, new, delta, change = INFINITY, s
    with nogil:
        for i in range(n):
            sw += w[i]
            s = z[i] - intercept
            for j in range(p):
                s -= X[i, j] * beta[j]
            r[i] = s
        for j in range(p):
            s = 0.0
            for i in range(n):
                s += w[i] * X[i, j] * X[i, j]
            xwx[j] = s
        while sweep < max_sweeps:
            sweep += 1
            change = 0.0
            s = 0.0
            for i in range(n):
                s += w[i] * r[i]
            delta = s / sw
            intercept += delta
            for i in range(n):
                r[i] -= delta
            change = fabs(delta)
            for j in range(p):
                if xwx[j] + l2 <= 0:
                    continue
                old = beta[j]
                rho = xwx[j] * old
                for i in range(n):
                    rho += w[i] * X[i, j] * r[i]
                if rho > l1:
                    new = (rho - l1) / (xwx[j] + l2)
                elif rho < -l1:
                    new = (rho + l1) / (xwx[j] + l2)
                else:
                    new = 0.0
                delta = new - old
                if delta != 0.0:
                    beta[j] = new
                    for i in range(n):
                        r[i] -= X[i, j] * delta
                    if fabs(delta) > change:
                        change = fabs(delta)
            if change < tol:
                break
    return intercept, sweep, change
