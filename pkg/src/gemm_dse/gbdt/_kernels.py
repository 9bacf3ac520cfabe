"""Compiled inner loops for tree growth and ensemble evaluation.

Trees are stored as parallel arrays; a node is a leaf when ``feature < 0``.
Rows go left when ``x[feature] <= threshold``.
"""

import numba as nb
import numpy as np

_GAIN_RTOL = 1e-12
_BLOCK = 256


@nb.njit(cache=True)
def build_tree(X, order, resid, in_sample, use_feature, max_depth, min_leaf):
    """Grow one least-squares regression tree level by level.

    ``order[f]`` lists row indices sorted by column ``f``. Split gains are
    scanned feature by feature in increasing index and threshold order, and
    only a strictly larger gain replaces the incumbent, so ties resolve to the
    lowest feature and then the lowest threshold.
    """
    n, n_feat = X.shape
    cap = 2 ** (max_depth + 1) - 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)

    node_of = np.full(n, -1, np.int64)
    cnt = np.zeros(cap, np.int64)
    tot = np.zeros(cap)
    sq = np.zeros(cap)
    for i in range(n):
        if in_sample[i]:
            node_of[i] = 0
            cnt[0] += 1
            tot[0] += resid[i]
            sq[0] += resid[i] * resid[i]
    if cnt[0] == 0:
        return feature[:1], threshold[:1], left[:1], right[:1], value[:1]

    n_nodes = 1
    level_start, level_end = 0, 1
    is_open = np.zeros(cap, np.bool_)
    best_gain = np.zeros(cap)
    best_feat = np.full(cap, -1, np.int64)
    best_thr = np.zeros(cap)
    c_left = np.zeros(cap, np.int64)
    s_left = np.zeros(cap)
    last_v = np.zeros(cap)

    for depth in range(max_depth + 1):
        any_open = False
        for nd in range(level_start, level_end):
            value[nd] = tot[nd] / cnt[nd]
            openable = depth < max_depth and cnt[nd] >= 2 * min_leaf
            is_open[nd] = openable
            best_gain[nd] = 0.0
            best_feat[nd] = -1
            if openable:
                any_open = True
        if not any_open:
            break

        for f in range(n_feat):
            if not use_feature[f]:
                continue
            for nd in range(level_start, level_end):
                c_left[nd] = 0
                s_left[nd] = 0.0
            col = order[f]
            for j in range(n):
                i = col[j]
                nd = node_of[i]
                if nd < level_start or not is_open[nd]:
                    continue
                v = X[i, f]
                nl = c_left[nd]
                if nl > 0 and v > last_v[nd]:
                    nr = cnt[nd] - nl
                    if nl >= min_leaf and nr >= min_leaf:
                        sl = s_left[nd]
                        sr = tot[nd] - sl
                        gain = sl * sl / nl + sr * sr / nr - tot[nd] * tot[nd] / cnt[nd]
                        if gain > best_gain[nd]:
                            best_gain[nd] = gain
                            best_feat[nd] = f
                            thr = 0.5 * (last_v[nd] + v)
                            if thr >= v:
                                thr = last_v[nd]
                            best_thr[nd] = thr
                c_left[nd] = nl + 1
                s_left[nd] += resid[i]
                last_v[nd] = v

        next_start = n_nodes
        for nd in range(level_start, level_end):
            if not is_open[nd] or best_feat[nd] < 0:
                continue
            scale = sq[nd] + tot[nd] * tot[nd] / cnt[nd]
            if best_gain[nd] <= _GAIN_RTOL * scale:
                continue
            feature[nd] = best_feat[nd]
            threshold[nd] = best_thr[nd]
            left[nd] = n_nodes
            right[nd] = n_nodes + 1
            n_nodes += 2
        for k in range(next_start, n_nodes):
            cnt[k] = 0
            tot[k] = 0.0
            sq[k] = 0.0
        for i in range(n):
            nd = node_of[i]
            if nd < level_start or feature[nd] < 0:
                continue
            child = left[nd] if X[i, feature[nd]] <= threshold[nd] else right[nd]
            node_of[i] = child
            cnt[child] += 1
            tot[child] += resid[i]
            sq[child] += resid[i] * resid[i]
        if n_nodes == next_start:
            break
        level_start, level_end = next_start, n_nodes

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@nb.njit(cache=True)
def apply_tree(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        nd = 0
        while feature[nd] >= 0:
            nd = left[nd] if X[i, feature[nd]] <= threshold[nd] else right[nd]
        out[i] = value[nd]
    return out


@nb.njit(cache=True)
def to_complete(offsets, feature, threshold, left, right, value, depth):
    """Re-lay each tree as a complete binary tree of the given depth.

    Leaves above the bottom level become pass-through splits (``x <= inf``)
    copying their value to every bottom leaf below them, so a fixed-depth,
    branch-free walk reaches the same leaf value.
    """
    n_trees = offsets.shape[0] - 1
    n_int = 2**depth - 1
    n_leaf = 2**depth
    c_feat = np.zeros((n_trees, max(n_int, 1)), np.int64)
    c_thr = np.full((n_trees, max(n_int, 1)), np.inf)
    c_val = np.zeros((n_trees, n_leaf))
    stack_src = np.empty(n_int + n_leaf, np.int64)
    stack_dst = np.empty(n_int + n_leaf, np.int64)
    for t in range(n_trees):
        off = offsets[t]
        top = 0
        stack_src[0] = 0
        stack_dst[0] = 0
        top = 1
        while top > 0:
            top -= 1
            src = stack_src[top]
            dst = stack_dst[top]
            if dst >= n_int:
                c_val[t, dst - n_int] = value[off + src]
                continue
            if feature[off + src] >= 0:
                c_feat[t, dst] = feature[off + src]
                c_thr[t, dst] = threshold[off + src]
                stack_src[top] = left[off + src]
                stack_dst[top] = 2 * dst + 1
                stack_src[top + 1] = right[off + src]
                stack_dst[top + 1] = 2 * dst + 2
                top += 2
            else:
                # pass-through split: both children inherit this leaf
                stack_src[top] = src
                stack_dst[top] = 2 * dst + 1
                stack_src[top + 1] = src
                stack_dst[top + 1] = 2 * dst + 2
                top += 2
    return c_feat, c_thr, c_val


@nb.njit(cache=True)
def predict_complete(X, base, lr, c_feat, c_thr, c_val, depth):
    """``base + sum_t lr * tree_t(x)``, accumulated in tree order.

    Rows are processed in blocks; within a block every tree is walked one level
    at a time across all rows, so the per-row descents are independent and
    pipeline well. The per-row summation order does not depend on blocking.
    """
    n = X.shape[0]
    out = np.full(n, base)
    n_trees = c_val.shape[0]
    n_int = 2**depth - 1
    XT = np.ascontiguousarray(X.T)
    n_blocks = (n + _BLOCK - 1) // _BLOCK
    for b in range(n_blocks):
        lo = b * _BLOCK
        m = min(lo + _BLOCK, n) - lo
        nd = np.empty(m, np.int64)
        for t in range(n_trees):
            nd[:] = 0
            for _ in range(depth):
                for j in range(m):
                    k = nd[j]
                    nd[j] = 2 * k + 1 + (XT[c_feat[t, k], lo + j] > c_thr[t, k])
            for j in range(m):
                out[lo + j] += lr * c_val[t, nd[j] - n_int]
    return out
