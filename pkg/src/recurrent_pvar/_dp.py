"""Compiled kernels for the p-variation dynamic program.

The DP maximises ``sum |v[i_k] - v[i_{k-1}]|**p`` over increasing index
subsequences of ``v``. ``best[j]`` is the optimum over subsequences ending at
``j``; the candidate predecessors of ``j`` are searched in a static segment
tree holding the min/max of ``v`` per node, and a node is skipped when even
its most distant value cannot beat the running best (``prefix_best`` is the
running maximum of ``best`` and bounds every ``best[i]`` inside the node).
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def abs_pow(x, p):
    x = abs(x)
    if x == 0.0:
        return 0.0
    return math.exp(p * math.log(x))


@njit(cache=True, nogil=True)
def local_extrema(v):
    """Indices of the endpoints and the strict turning points of ``v``.

    Runs of equal values collapse to their first index.
    """
    m = v.shape[0]
    keep = np.empty(m, dtype=np.int64)
    if m == 0:
        return keep[:0]
    keep[0] = 0
    k = 1
    for j in range(1, m):
        if v[j] == v[keep[k - 1]]:
            continue
        if k >= 2:
            a = v[keep[k - 2]]
            b = v[keep[k - 1]]
            if (a < b and b < v[j]) or (a > b and b > v[j]):
                # keep[k-1] sits inside a monotone run
                keep[k - 1] = j
                continue
        keep[k] = j
        k += 1
    return keep[:k]


@njit(cache=True, nogil=True)
def pvar_dp(v, p):
    """Return ``(value, path)`` where ``path`` indexes an optimal subsequence."""
    m = v.shape[0]
    if m <= 1:
        path = np.zeros(m, dtype=np.int64)
        return 0.0, path

    size = 1
    while size < m:
        size *= 2
    tmin = np.full(2 * size, np.inf)
    tmax = np.full(2 * size, -np.inf)
    for i in range(m):
        tmin[size + i] = v[i]
        tmax[size + i] = v[i]
    for node in range(size - 1, 0, -1):
        tmin[node] = min(tmin[2 * node], tmin[2 * node + 1])
        tmax[node] = max(tmax[2 * node], tmax[2 * node + 1])

    best = np.zeros(m)
    prefix_best = np.zeros(m)
    link = np.full(m, -1, dtype=np.int64)
    stack_node = np.empty(128, dtype=np.int64)
    stack_lo = np.empty(128, dtype=np.int64)
    stack_hi = np.empty(128, dtype=np.int64)

    for j in range(1, m):
        vj = v[j]
        cand = best[j - 1] + abs_pow(vj - v[j - 1], p)
        arg = j - 1
        top = 0
        stack_node[0] = 1
        stack_lo[0] = 0
        stack_hi[0] = size - 1
        top = 1
        while top > 0:
            top -= 1
            node = stack_node[top]
            lo = stack_lo[top]
            hi = stack_hi[top]
            if lo > j - 2:
                continue
            h = hi if hi < j - 1 else j - 1
            reach = max(vj - tmin[node], tmax[node] - vj)
            if prefix_best[h] + abs_pow(reach, p) <= cand:
                continue
            if lo == hi:
                val = best[lo] + abs_pow(vj - v[lo], p)
                if val > cand:
                    cand = val
                    arg = lo
                continue
            mid = (lo + hi) // 2
            stack_node[top] = 2 * node
            stack_lo[top] = lo
            stack_hi[top] = mid
            top += 1
            stack_node[top] = 2 * node + 1
            stack_lo[top] = mid + 1
            stack_hi[top] = hi
            top += 1
        best[j] = cand
        link[j] = arg
        prefix_best[j] = max(prefix_best[j - 1], cand)

    end = 0
    for j in range(1, m):
        if best[j] > best[end]:
            end = j
    count = 1
    k = end
    while link[k] >= 0:
        k = link[k]
        count += 1
    path = np.empty(count, dtype=np.int64)
    k = end
    for c in range(count - 1, -1, -1):
        path[c] = k
        k = link[k]
    return best[end], path
