"""Independent reference implementations used only by the tests."""
import itertools

import numpy as np


def chromatic_number(n, edges):
    """Exact chromatic number by backtracking (fine up to ~20 nodes)."""
    adj = [set() for _ in range(n)]
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    if not edges:
        return 1 if n else 0
    order = sorted(range(n), key=lambda v: -len(adj[v]))

    def colorable(k):
        col = {}

        def place(idx, used):
            if idx == n:
                return True
            v = order[idx]
            for c in range(min(k, used + 1)):
                if all(col.get(u) != c for u in adj[v]):
                    col[v] = c
                    if place(idx + 1, max(used, c + 1)):
                        return True
                    del col[v]
            return False

        return place(0, 0)

    k = 1
    while not colorable(k):
        k += 1
    return k


def best_two_partition(points):
    """Balanced 2-partition maximizing the minimum intra-group distance (brute force)."""
    n = len(points)
    best, best_val = None, -1.0
    for combo in itertools.combinations(range(n), n // 2):
        a = list(combo)
        b = [i for i in range(n) if i not in combo]
        val = min(np.linalg.norm(points[i] - points[j])
                  for g in (a, b) for i, j in itertools.combinations(g, 2))
        if val > best_val + 1e-12:
            best, best_val = (a, b), val
    return best
