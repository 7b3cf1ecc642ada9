"""Path-dependent TreeSHAP kernel (polynomial-time exact Shapley values).

The path of unique features from the root is stored as four flat arrays
(feature id, zero fraction, one fraction, permutation weight).  Each node
works on its own slice starting at ``off``; a child's slice starts right
after the parent's live entries.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _extend(pf, pz, po, pw, off, depth, zero, one, feat, recip):
    pf[off + depth] = feat
    pz[off + depth] = zero
    po[off + depth] = one
    pw[off + depth] = 1.0 if depth == 0 else 0.0
    inv_d1 = recip[depth + 1]
    for i in range(depth - 1, -1, -1):
        pw[off + i + 1] += one * pw[off + i] * (i + 1) * inv_d1
        pw[off + i] = zero * pw[off + i] * (depth - i) * inv_d1


@njit(cache=True)
def _unwind(pf, pz, po, pw, off, depth, idx, recip):
    one = po[off + idx]
    zero = pz[off + idx]
    nxt = pw[off + depth]
    inv_d1 = recip[depth + 1]
    if one != 0.0:
        scale = (depth + 1) / one
        for i in range(depth - 1, -1, -1):
            tmp = pw[off + i]
            pw[off + i] = nxt * scale * recip[i + 1]
            nxt = tmp - pw[off + i] * zero * (depth - i) * inv_d1
    else:
        scale = (depth + 1) / zero
        for i in range(depth - 1, -1, -1):
            pw[off + i] = pw[off + i] * scale * recip[depth - i]
    for i in range(idx, depth):
        pf[off + i] = pf[off + i + 1]
        pz[off + i] = pz[off + i + 1]
        po[off + i] = po[off + i + 1]


@njit(cache=True)
def _unwound_sum(pz, po, pw, off, depth, idx, recip):
    one = po[off + idx]
    zero = pz[off + idx]
    nxt = pw[off + depth]
    total = 0.0
    if one != 0.0:
        scale = (depth + 1) / one
        zscale = zero * recip[depth + 1]
        for i in range(depth - 1, -1, -1):
            tmp = nxt * scale * recip[i + 1]
            total += tmp
            nxt = pw[off + i] - tmp * zscale * (depth - i)
    else:
        scale = (depth + 1) / zero
        for i in range(depth - 1, -1, -1):
            total += pw[off + i] * scale * recip[depth - i]
    return total


@njit(cache=True)
def _tree(x, phi, scale, root, feature, threshold, left, right, value, cover,
          pf, pz, po, pw, recip, st_node, st_off, st_depth, st_zero, st_one, st_feat):
    # Depth-first traversal with an explicit stack.  A node's path slice is
    # never overwritten by its own subtree, so the second child can still
    # copy from it after the first child's subtree is finished.
    sp = 0
    st_node[0] = root
    st_off[0] = 0
    st_depth[0] = 0
    st_zero[0] = 1.0
    st_one[0] = 1.0
    st_feat[0] = -1
    sp = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        parent_off = st_off[sp]
        depth = st_depth[sp]
        off = parent_off + depth + 1
        for i in range(depth + 1):
            pf[off + i] = pf[parent_off + i]
            pz[off + i] = pz[parent_off + i]
            po[off + i] = po[parent_off + i]
            pw[off + i] = pw[parent_off + i]
        _extend(pf, pz, po, pw, off, depth, st_zero[sp], st_one[sp], st_feat[sp], recip)

        f = feature[node]
        if f < 0:
            v = value[node] * scale
            for i in range(1, depth + 1):
                w = _unwound_sum(pz, po, pw, off, depth, i, recip)
                phi[pf[off + i]] += w * (po[off + i] - pz[off + i]) * v
            continue

        if x[f] <= threshold[node]:
            hot = left[node]
            cold = right[node]
        else:
            hot = right[node]
            cold = left[node]
        w = cover[node]
        in_zero = 1.0
        in_one = 1.0
        k = -1
        for i in range(1, depth + 1):
            if pf[off + i] == f:
                k = i
                break
        if k >= 0:
            in_zero = pz[off + k]
            in_one = po[off + k]
            _unwind(pf, pz, po, pw, off, depth, k, recip)
            depth -= 1

        st_node[sp] = cold
        st_off[sp] = off
        st_depth[sp] = depth + 1
        st_zero[sp] = cover[cold] / w * in_zero
        st_one[sp] = 0.0
        st_feat[sp] = f
        sp += 1
        st_node[sp] = hot
        st_off[sp] = off
        st_depth[sp] = depth + 1
        st_zero[sp] = cover[hot] / w * in_zero
        st_one[sp] = in_one
        st_feat[sp] = f
        sp += 1


@njit(cache=True)
def tree_shap_packed(X, feature, threshold, left, right, value, cover, roots, scale, max_depth):
    """SHAP values of ``scale * sum(trees)`` for every row of ``X``."""
    n, m = X.shape
    phi = np.zeros((n, m))
    size = (max_depth + 3) * (max_depth + 4) // 2 + 2
    pf = np.full(size, -1, np.int64)
    pz = np.zeros(size)
    po = np.zeros(size)
    pw = np.zeros(size)
    recip = np.zeros(max_depth + 4)
    for k in range(1, max_depth + 4):
        recip[k] = 1.0 / k
    stack = 2 * max_depth + 4
    st_node = np.empty(stack, np.int64)
    st_off = np.empty(stack, np.int64)
    st_depth = np.empty(stack, np.int64)
    st_zero = np.empty(stack)
    st_one = np.empty(stack)
    st_feat = np.empty(stack, np.int64)
    for i in range(n):
        xi = X[i]
        row = phi[i]
        for t in range(roots.shape[0]):
            _tree(xi, row, scale, roots[t], feature, threshold, left, right, value, cover,
                  pf, pz, po, pw, recip, st_node, st_off, st_depth, st_zero, st_one, st_feat)
    return phi
