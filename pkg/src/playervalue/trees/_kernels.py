"""Compiled inner loops for tree building and prediction.

Trees are stored as flat parallel arrays indexed by node id; a leaf has
``feature == -1``.  Node 0 is the root and children always have larger ids
than their parent.
"""

import numpy as np
from numba import njit

# Candidate splits whose gain is within this fraction of the node SSE of
# the best one so far count as ties; ties keep the earlier candidate
# (lower feature index, then lower threshold).
GAIN_RTOL = 1e-10


@njit(cache=True)
def build_tree(X, y, order, max_depth, min_split, min_leaf, n_sub, seed):
    """Greedy depth-first CART on squared error.

    ``order[f]`` holds the row indices sorted by column ``f``; it is
    partitioned in place as the tree grows, so pass a copy.
    """
    n, m = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    cover = np.zeros(cap)
    gain = np.zeros(cap)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    goes_left = np.zeros(n, np.bool_)
    buf = np.empty(n, np.int64)
    feats = np.arange(m)
    if n_sub < m:
        np.random.seed(seed)

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        cnt = end - start

        s = 0.0
        for i in range(start, end):
            s += y[order[0, i]]
        mean = s / cnt
        sse = 0.0
        for i in range(start, end):
            d = y[order[0, i]] - mean
            sse += d * d
        value[node] = mean
        cover[node] = cnt
        if depth >= max_depth or cnt < min_split or cnt < 2 * min_leaf or sse <= 0.0:
            continue

        if n_sub < m:
            for k in range(n_sub):
                j = k + np.random.randint(0, m - k)
                tmp = feats[k]
                feats[k] = feats[j]
                feats[j] = tmp
            cand = np.sort(feats[:n_sub])
        else:
            cand = feats

        tol = GAIN_RTOL * sse
        best_gain = -1.0
        best_f = -1
        best_thr = 0.0
        best_nl = 0
        for f in cand:
            cum = 0.0
            for i in range(start, end - 1):
                r = order[f, i]
                cum += y[r] - mean
                nl = i - start + 1
                nr = cnt - nl
                if nr < min_leaf:
                    break
                if nl < min_leaf:
                    continue
                xa = X[r, f]
                xb = X[order[f, i + 1], f]
                if xa < xb:
                    g = cum * cum * (1.0 / nl + 1.0 / nr)
                    if g > best_gain + tol:
                        best_gain = g
                        best_f = f
                        thr = 0.5 * (xa + xb)
                        if thr >= xb:
                            thr = xa
                        best_thr = thr
                        best_nl = nl
        if best_f < 0 or best_gain <= tol:
            continue

        for i in range(start, end):
            r = order[best_f, i]
            goes_left[r] = X[r, best_f] <= best_thr
        for g in range(m):
            a = start
            b = 0
            for i in range(start, end):
                r = order[g, i]
                if goes_left[r]:
                    order[g, a] = r
                    a += 1
                else:
                    buf[b] = r
                    b += 1
            for i in range(b):
                order[g, a + i] = buf[i]

        mid = start + best_nl
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        gain[node] = best_gain

        st_node[sp] = rc
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lc
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        cover[:n_nodes].copy(),
        gain[:n_nodes].copy(),
    )


@njit(cache=True)
def predict_packed(X, feature, threshold, left, right, value, roots):
    """Sum over trees of the routed leaf value, per row (trees in order)."""
    n = X.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(roots.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += value[node]
        out[i] = acc
    return out


@njit(cache=True)
def apply_packed(X, feature, threshold, left, right, roots):
    """Leaf id reached by each row in each tree, shape (n_rows, n_trees)."""
    n = X.shape[0]
    out = np.empty((n, roots.shape[0]), np.int64)
    for i in range(n):
        for t in range(roots.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i, t] = node
    return out


@njit(cache=True)
def expand_order(order, counts):
    """Sort order of a resample, given the parent order and copy counts.

    The resample holds row ``r`` ``counts[r]`` times, consecutively and in
    row order.  The result equals a stable argsort of the resample.
    """
    m, n = order.shape
    start = np.zeros(n, np.int64)
    acc = 0
    for r in range(n):
        start[r] = acc
        acc += counts[r]
    out = np.empty((m, acc), np.int64)
    for f in range(m):
        p = 0
        for i in range(n):
            r = order[f, i]
            for c in range(counts[r]):
                out[f, p] = start[r] + c
                p += 1
    return out
