# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph-coloring kernels; semantics match ``cfran._kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


def dsatur(const i64[::1] indptr, const i64[::1] indices):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t v, u, j, step, best
    cdef i64 c, best_key, key
    colors_arr = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] colors = colors_arr
    cdef i64[::1] sat = np.zeros(n, dtype=np.int64)
    cdef i64[::1] deg = np.zeros(n, dtype=np.int64)
    cdef cnp.uint8_t[:, ::1] used = np.zeros((n, n + 1), dtype=np.uint8)
    cdef cnp.uint8_t[::1] taken = np.zeros(n + 1, dtype=np.uint8)
    for v in range(n):
        deg[v] = indptr[v + 1] - indptr[v]
    for step in range(n):
        best = -1
        best_key = -1
        for v in range(n):
            if colors[v] >= 0:
                continue
            key = sat[v] * (n + 1) + deg[v]
            if key > best_key:
                best_key = key
                best = v
        v = best
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            if colors[u] >= 0:
                taken[colors[u]] = 1
        c = 0
        while taken[c]:
            c += 1
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            if colors[u] >= 0:
                taken[colors[u]] = 0
        colors[v] = c
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            if not used[u, c]:
                used[u, c] = 1
                sat[u] += 1
    return colors_arr


def tabucol(const i64[::1] indptr, const i64[::1] indices, Py_ssize_t k,
            init, Py_ssize_t tenure, Py_ssize_t max_iter):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t v, u, j, c, cv, bv, bc, it, iters = 0
    cdef i64 f = 0, best_f, delta, best_delta
    cdef i64 BIG = 1 << 60
    col_arr = np.array(init, dtype=np.int64, copy=True)
    cdef i64[::1] col = col_arr
    best_arr = col_arr.copy()
    cdef i64[::1] best_col = best_arr
    cdef i64[:, ::1] gamma = np.zeros((n, k), dtype=np.int64)
    cdef i64[:, ::1] tabu = np.zeros((n, k), dtype=np.int64)
    for v in range(n):
        for j in range(indptr[v], indptr[v + 1]):
            gamma[v, col[indices[j]]] += 1
    for v in range(n):
        f += gamma[v, col[v]]
    f //= 2
    best_f = f
    for it in range(max_iter):
        if f == 0:
            break
        iters = it + 1
        best_delta = BIG
        bv = -1
        bc = -1
        for v in range(n):
            cv = col[v]
            if gamma[v, cv] == 0:
                continue
            for c in range(k):
                if c == cv:
                    continue
                delta = gamma[v, c] - gamma[v, cv]
                if tabu[v, c] > it and f + delta >= best_f:
                    continue
                if delta < best_delta:
                    best_delta = delta
                    bv = v
                    bc = c
        if bv < 0:
            continue
        cv = col[bv]
        col[bv] = bc
        for j in range(indptr[bv], indptr[bv + 1]):
            u = indices[j]
            gamma[u, cv] -= 1
            gamma[u, bc] += 1
        f += best_delta
        tabu[bv, cv] = it + tenure
        if f < best_f:
            best_f = f
            best_col[:] = col
    return best_arr, int(best_f), int(iters)
