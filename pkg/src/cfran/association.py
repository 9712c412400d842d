"""RRU-to-EDU partitioning and UE-to-RRU association.

Interleaved partitions come from coloring a conflict graph in which RRUs
closer than ``delta * area_side`` must land in different EDUs; ``delta`` is
bisected until the graph needs exactly ``M`` colors. K-means++ gives the
clustered baseline.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InfeasibleColoringError
from .scenario import ColoringKnobs, Geometry, child_streams

log = logging.getLogger(__name__)


@dataclass(eq=False)
class Partition:
    """Assignment of L RRUs to M EDUs: disjoint, covering, every group nonempty."""

    group_of: np.ndarray
    groups: list
    info: dict = field(default_factory=dict)

    @classmethod
    def from_labels(cls, labels, num_groups=None, info=None) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        M = int(labels.max()) + 1 if num_groups is None else int(num_groups)
        groups = [np.flatnonzero(labels == m) for m in range(M)]
        part = cls(labels, groups, dict(info or {}))
        part.validate()
        return part

    @classmethod
    def from_groups(cls, groups, num_rrus=None, info=None) -> "Partition":
        L = sum(len(g) for g in groups) if num_rrus is None else num_rrus
        labels = np.full(L, -1, dtype=np.int64)
        for m, g in enumerate(groups):
            labels[np.asarray(g, dtype=int)] = m
        part = cls(labels, [np.sort(np.asarray(g, dtype=np.int64)) for g in groups], dict(info or {}))
        part.validate()
        return part

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]

    def validate(self) -> None:
        L = self.group_of.size
        flat = np.concatenate(self.groups) if self.groups else np.array([], dtype=int)
        if any(len(g) == 0 for g in self.groups):
            raise ValueError("partition has an empty group")
        if flat.size != L or np.unique(flat).size != L:
            raise ValueError("groups must be pairwise disjoint and sum to L")
        if not np.array_equal(np.sort(flat), np.arange(L)):
            raise ValueError("groups must cover every RRU")
        for m, g in enumerate(self.groups):
            if np.any(self.group_of[g] != m):
                raise ValueError("group_of disagrees with groups")


# ---------------------------------------------------------------------------
# Conflict graph and coloring


@dataclass(frozen=True, eq=False)
class ConflictGraph:
    indptr: np.ndarray
    indices: np.ndarray
    delta: float
    area_side: float

    @property
    def num_nodes(self) -> int:
        return self.indptr.size - 1

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def num_edges(self) -> int:
        return int(self.indices.size // 2)

    def neighbors(self, v) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for v in range(self.num_nodes):
            out.extend((v, int(u)) for u in self.neighbors(v) if u > v)
        return out

    def is_proper(self, coloring) -> bool:
        coloring = np.asarray(coloring)
        owner = np.repeat(np.arange(self.num_nodes), self.degree)
        return not np.any(coloring[owner] == coloring[self.indices])


def graph_from_edges(num_nodes: int, edges, delta=float("nan"), area_side=1.0) -> ConflictGraph:
    adj = np.zeros((num_nodes, num_nodes), dtype=bool)
    for i, j in edges:
        if i == j:
            raise ValueError("self-loops are not allowed")
        adj[i, j] = adj[j, i] = True
    return _from_adjacency(adj, delta, area_side)


def _from_adjacency(adj, delta, area_side) -> ConflictGraph:
    counts = adj.sum(axis=1)
    indptr = np.zeros(adj.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.nonzero(adj)[1].astype(np.int64)
    return ConflictGraph(indptr, indices, float(delta), float(area_side))


def build_conflict_graph(geometry: Geometry, delta: float) -> ConflictGraph:
    """Edge (i, j) exactly when RRUs i and j are within ``delta * area_side``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    adj = geometry.rru_rru_dist <= delta * geometry.area_side
    np.fill_diagonal(adj, False)
    return _from_adjacency(adj, delta, geometry.area_side)


def _two_coloring(graph: ConflictGraph):
    """Exact bipartition by BFS, or None if an odd cycle exists."""
    n = graph.num_nodes
    col = np.full(n, -1, dtype=np.int64)
    for s in range(n):
        if col[s] >= 0:
            continue
        col[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for u in graph.neighbors(v):
                if col[u] < 0:
                    col[u] = 1 - col[v]
                    queue.append(u)
                elif col[u] == col[v]:
                    return None
    return col


def clique_lower_bound(graph: ConflictGraph) -> int:
    """Size of a greedily grown clique (a lower bound on the chromatic number)."""
    n = graph.num_nodes
    if n == 0:
        return 0
    if graph.num_edges == 0:
        return 1
    deg = graph.degree
    nbr_sets = [set(graph.neighbors(v).tolist()) for v in range(n)]
    best = 1
    for v in np.argsort(-deg, kind="stable"):
        if deg[v] + 1 <= best:
            break
        clique = [int(v)]
        cands = sorted(nbr_sets[v], key=lambda u: (-deg[u], u))
        for u in cands:
            if all(u in nbr_sets[w] for w in clique):
                clique.append(u)
        best = max(best, len(clique))
    return best


def tabu_coloring(graph: ConflictGraph, colors: int, knobs: ColoringKnobs = ColoringKnobs(),
                  rng: np.random.Generator | None = None):
    """Proper coloring with at most ``colors`` colors, or ``None`` when the budget runs out.

    Restarts draw random initial colorings from prefix-stable child streams and
    stop at the first conflict-free result.
    """
    if colors < 1:
        raise ValueError("colors must be >= 1")
    n = graph.num_nodes
    if graph.num_edges == 0:
        return np.zeros(n, dtype=np.int64)
    if colors == 1:
        return None
    if colors >= n:
        return np.arange(n, dtype=np.int64)
    if colors == 2:
        return _two_coloring(graph)
    rng = np.random.default_rng(0) if rng is None else rng
    for stream in child_streams(rng, knobs.restarts):
        init = stream.integers(0, colors, size=n).astype(np.int64)
        col, conflicts, _ = kernels.tabucol(graph.indptr, graph.indices, colors, init,
                                            knobs.tenure, knobs.max_iter)
        if conflicts == 0:
            return np.asarray(col, dtype=np.int64)
    return None


def color_count(graph: ConflictGraph, knobs: ColoringKnobs = ColoringKnobs(), rng=None):
    """Fewest colors found, probing tabu search with decreasing budgets.

    Returns ``(count, coloring)``. The search starts from DSATUR and stops at
    the greedy clique bound.
    """
    n = graph.num_nodes
    if graph.num_edges == 0:
        return 1, np.zeros(n, dtype=np.int64)
    lower = clique_lower_bound(graph)
    best = np.asarray(kernels.dsatur(graph.indptr, graph.indices), dtype=np.int64)
    count = int(best.max()) + 1
    while count > lower:
        trial = tabu_coloring(graph, count - 1, knobs, rng)
        if trial is None:
            break
        best, count = trial, int(np.unique(trial).size)
    return count, best


def _compare_colors(graph, M, knobs, rng):
    """Classify the color count against M; returns (sign, proper M-coloring or None)."""
    if graph.num_edges == 0:
        return (-1 if M > 1 else 0), np.zeros(graph.num_nodes, dtype=np.int64)
    lower = clique_lower_bound(graph)
    if lower > M:
        return 1, None
    greedy = np.asarray(kernels.dsatur(graph.indptr, graph.indices), dtype=np.int64)
    used = int(greedy.max()) + 1
    coloring = greedy if used <= M else tabu_coloring(graph, M, knobs, rng)
    if coloring is None:
        return 1, None
    if np.unique(coloring).size < M:
        return -1, coloring
    if lower >= M:
        return 0, coloring
    fewer = greedy if used <= M - 1 else tabu_coloring(graph, M - 1, knobs, rng)
    return (-1, coloring) if fewer is not None else (0, coloring)


def _repair(geometry: Geometry, coloring, isolated, M):
    """Attach isolated RRUs, most isolated first, each to the open group whose
    nearest member is farthest away; groups are capped at ceil(L / M)."""
    D = geometry.rru_rru_dist
    L = D.shape[0]
    cap = math.ceil(L / M)
    labels = np.asarray(coloring, dtype=np.int64).copy()
    labels[isolated] = -1
    sizes = np.bincount(labels[labels >= 0], minlength=M)
    nearest = np.full((M, L), np.inf)
    for m in range(M):
        members = np.flatnonzero(labels == m)
        if members.size:
            nearest[m] = D[members].min(axis=0)
    masked = D + np.diag(np.full(L, np.inf))
    isolation = masked.min(axis=1) if L > 1 else np.zeros(L)
    order = sorted(np.flatnonzero(isolated).tolist(), key=lambda v: (-isolation[v], v))
    for v in order:
        open_groups = np.flatnonzero(sizes < cap)
        if open_groups.size == 0:
            open_groups = np.arange(M)
        scores = nearest[open_groups, v]
        m = int(open_groups[np.argmax(scores)])
        labels[v] = m
        sizes[m] += 1
        nearest[m] = np.minimum(nearest[m], D[v])
    return labels


def graph_color_associate(geometry: Geometry, M: int, knobs: ColoringKnobs = ColoringKnobs(),
                          rng: np.random.Generator | None = None) -> Partition:
    """Interleaved partition into exactly ``M`` EDUs via conflict-graph coloring.

    ``delta`` starts at ``knobs.delta_init`` and is bisected: too many colors
    shrink it, too few grow it. The final coloring is proper at the final
    ``delta``; isolated RRUs are then distributed by :func:`_repair`.
    """
    L = geometry.num_rrus
    if not 1 <= M <= L:
        raise ValueError("need 1 <= M <= L")
    rng = np.random.default_rng(0) if rng is None else rng
    if M == 1:
        return Partition.from_labels(np.zeros(L, dtype=np.int64), 1, info={"delta": 0.0})
    if M == L:
        return Partition.from_labels(np.arange(L), L, info={"delta": math.sqrt(2.0)})
    lo, hi = 0.0, math.sqrt(2.0)
    delta = knobs.delta_init
    history = []
    for step in range(knobs.bisection_iters):
        graph = build_conflict_graph(geometry, delta)
        sign, coloring = _compare_colors(graph, M, knobs, rng)
        history.append((delta, sign))
        log.debug("bisection step %d: delta=%.6f sign=%d", step, delta, sign)
        if sign == 0:
            isolated = graph.degree == 0
            labels = _repair(geometry, coloring, isolated, M)
            return Partition.from_labels(labels, M, info={"delta": delta, "steps": step + 1,
                                                          "edges": graph.num_edges})
        if sign > 0:
            hi = delta
        else:
            lo = delta
        delta = 0.5 * (lo + hi)
    raise InfeasibleColoringError(
        f"no conflict threshold gave exactly {M} colors in {knobs.bisection_iters} steps",
        target=M, nearest=(lo, hi))


# ---------------------------------------------------------------------------
# K-means++ baseline


def _kmeanspp_seeds(X, M, rng):
    n = X.shape[0]
    centers = [X[int(rng.integers(n))]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, M):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.uniform(0.0, total), side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _lloyd(X, centers, tol, max_iter=300):
    M = centers.shape[0]
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        counts = np.bincount(labels, minlength=M)
        while np.any(counts == 0):
            empty = int(np.flatnonzero(counts == 0)[0])
            big = int(np.argmax(counts))
            members = np.flatnonzero(labels == big)
            far = members[np.argmax(((X[members] - centers[big]) ** 2).sum(axis=1))]
            labels[far] = empty
            counts = np.bincount(labels, minlength=M)
        new = np.array([X[labels == m].mean(axis=0) for m in range(M)])
        shift = np.sqrt(((new - centers) ** 2).sum(axis=1)).max()
        centers = new
        if shift < tol:
            break
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    counts = np.bincount(labels, minlength=M)
    while np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        big = int(np.argmax(counts))
        members = np.flatnonzero(labels == big)
        labels[members[np.argmax(d2[members, big])]] = empty
        counts = np.bincount(labels, minlength=M)
    return labels, wcss(X, labels)


def wcss(points, labels) -> float:
    """Within-cluster sum of squared distances to the cluster means."""
    X = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    total = 0.0
    for m in np.unique(labels):
        pts = X[labels == m]
        total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


def kmeans_pp(points, M: int, rng: np.random.Generator, restarts: int = 10,
              scale: float | None = None) -> Partition:
    """K-means++ seeding plus Lloyd iterations; best of ``restarts`` by WCSS.

    ``points`` is an (L, 2) array or a :class:`Geometry` (RRU positions are used).
    Convergence is declared when no centroid moves more than ``1e-6 * scale``.
    """
    if isinstance(points, Geometry):
        scale = points.area_side if scale is None else scale
        points = points.rru_positions
    X = np.asarray(points, dtype=float)
    if not 1 <= M <= X.shape[0]:
        raise ValueError("need 1 <= M <= number of points")
    if scale is None:
        scale = float(np.ptp(X, axis=0).max()) or 1.0
    best = None
    for r, stream in enumerate(child_streams(rng, restarts)):
        labels, score = _lloyd(X, _kmeanspp_seeds(X, M, stream), 1e-6 * scale)
        if best is None or score < best[1]:
            best = (labels, score, r)
    return Partition.from_labels(best[0], M, info={"wcss": best[1], "restart": best[2]})


# ---------------------------------------------------------------------------
# Fitness, centroids and UE association


def ga_fitness(partition: Partition, geometry: Geometry) -> float:
    """Reciprocal of the summed distance over all RRU pairs in different groups."""
    if partition.num_groups < 2:
        raise ValueError("fitness needs at least two groups")
    g = partition.group_of
    cross = g[:, None] != g[None, :]
    denom = float(geometry.rru_rru_dist[cross].sum()) / 2.0
    if denom <= 0.0:
        raise ValueError("cross-group RRUs coincide; fitness is undefined")
    return 1.0 / denom


def centroid(points) -> np.ndarray:
    """Point minimizing the summed squared distance to ``points`` (their mean)."""
    X = np.asarray(points, dtype=float).reshape(-1, 2)
    if X.shape[0] == 0:
        raise ValueError("centroid of an empty set")
    return X.mean(axis=0)


def squared_distance_sum(location, points) -> float:
    X = np.asarray(points, dtype=float).reshape(-1, 2)
    return float(((X - np.asarray(location, dtype=float)) ** 2).sum())


def squared_distance_gradient(location, points) -> np.ndarray:
    """Partial derivatives of :func:`squared_distance_sum` in x and y."""
    X = np.asarray(points, dtype=float).reshape(-1, 2)
    return 2.0 * (np.asarray(location, dtype=float) - X).sum(axis=0)


@dataclass(frozen=True, eq=False)
class AssociationMatrices:
    """``serves[k, l]`` is the association flag between UE k and RRU l."""

    serves: np.ndarray

    def edu_mask(self, rru_indices, N: int) -> np.ndarray:
        """(L_m*N, K) boolean diagonal of each UE's selection matrix in one EDU."""
        return np.repeat(self.serves[:, rru_indices].T, N, axis=0)

    @property
    def is_full(self) -> bool:
        return bool(self.serves.all())


def full_association(num_ues: int, num_rrus: int) -> AssociationMatrices:
    return AssociationMatrices(np.ones((num_ues, num_rrus), dtype=bool))


def dcc_associate(beta, pilots, num_pilots: int) -> AssociationMatrices:
    """Dynamic cooperation clusters.

    Every UE is first served by its strongest RRU (processed in decreasing
    order of that gain); each remaining (RRU, pilot) slot then serves the
    strongest UE on that pilot.
    """
    beta = np.asarray(beta, dtype=float)
    pilots = np.asarray(pilots)
    K, L = beta.shape
    serves = np.zeros((K, L), dtype=bool)
    slot = np.full((L, num_pilots), -1, dtype=np.int64)
    master = np.argmax(beta, axis=1)
    for k in np.argsort(-beta[np.arange(K), master], kind="stable"):
        l, t = master[k], pilots[k]
        if slot[l, t] < 0:
            slot[l, t] = k
            serves[k, l] = True
    for t in range(num_pilots):
        users = np.flatnonzero(pilots == t)
        if users.size == 0:
            continue
        strongest = users[np.argmax(beta[users], axis=0)]
        free = slot[:, t] < 0
        serves[strongest[free], np.flatnonzero(free)] = True
        slot[free, t] = strongest[free]
    lonely = np.flatnonzero(~serves.any(axis=1))
    for k in lonely:  # only when two co-pilot UEs share a strongest RRU
        serves[k, master[k]] = True
    return AssociationMatrices(serves)
