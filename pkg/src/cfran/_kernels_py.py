"""Pure-numpy graph-coloring kernels (fallback for the compiled ``_kernels``)."""
import numpy as np

_BIG = 1 << 60


def dsatur(indptr, indices):
    """DSATUR greedy coloring; ties go to higher degree, then lower index."""
    n = len(indptr) - 1
    colors = np.full(n, -1, dtype=np.int64)
    deg = np.diff(indptr).astype(np.int64)
    sat = np.zeros(n, dtype=np.int64)
    used = np.zeros((n, n + 1), dtype=bool)
    for _ in range(n):
        key = np.where(colors < 0, sat * (n + 1) + deg, -1)
        v = int(np.argmax(key))
        nbrs = indices[indptr[v]:indptr[v + 1]]
        taken = np.zeros(n + 1, dtype=bool)
        nc = colors[nbrs]
        taken[nc[nc >= 0]] = True
        c = int(np.argmin(taken))
        colors[v] = c
        fresh = nbrs[~used[nbrs, c]]
        used[fresh, c] = True
        sat[fresh] += 1
    return colors


def tabucol(indptr, indices, k, init, tenure, max_iter):
    """Tabucol local search minimizing monochromatic edges.

    Returns ``(best_coloring, best_conflicts, iterations)``. Among admissible
    moves the smallest delta wins, ties by lowest (vertex, color).
    """
    n = len(indptr) - 1
    col = np.array(init, dtype=np.int64, copy=True)
    owner = np.repeat(np.arange(n), np.diff(indptr))
    gamma = np.zeros((n, k), dtype=np.int64)
    np.add.at(gamma, (owner, col[indices]), 1)
    tabu = np.zeros((n, k), dtype=np.int64)
    rows = np.arange(n)
    f = int(gamma[rows, col].sum()) // 2
    best_f = f
    best_col = col.copy()
    iters = 0
    for it in range(max_iter):
        if f == 0:
            break
        iters = it + 1
        cur = gamma[rows, col]
        conf = np.flatnonzero(cur > 0)
        d = gamma[conf] - cur[conf][:, None]
        blocked = (tabu[conf] > it) & (f + d >= best_f)
        blocked[np.arange(conf.size), col[conf]] = True
        d = np.where(blocked, _BIG, d)
        idx = int(np.argmin(d))
        delta = int(d.flat[idx])
        if delta >= _BIG:
            continue
        v = int(conf[idx // k])
        c = idx % k
        old = int(col[v])
        col[v] = c
        nbrs = indices[indptr[v]:indptr[v + 1]]
        gamma[nbrs, old] -= 1
        gamma[nbrs, c] += 1
        f += delta
        tabu[v, old] = it + tenure
        if f < best_f:
            best_f = f
            best_col = col.copy()
    return best_col, best_f, iters
