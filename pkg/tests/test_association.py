import itertools

import numpy as np
import pytest

from cfran.association import (Partition, build_conflict_graph, centroid, clique_lower_bound,
                               color_count, dcc_associate, full_association, ga_fitness,
                               graph_color_associate, graph_from_edges, kmeans_pp,
                               squared_distance_gradient, squared_distance_sum, tabu_coloring,
                               wcss)
from cfran.channel import assign_pilots
from cfran.errors import InfeasibleColoringError
from cfran.scenario import ColoringKnobs, Geometry, ScenarioConfig, derive_stream, generate_geometry

from oracles import best_two_partition, chromatic_number

CORNERS = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])


def corners_geometry(side=1.0, scale=1.0):
    return Geometry.from_positions(CORNERS * scale, np.array([[0.5, 0.5]]) * scale, side)


def geometry(L, seed):
    cfg = ScenarioConfig(num_rrus=L, num_ues=4, num_edus=1)
    return generate_geometry(cfg, derive_stream(seed, 0, "geometry"))


def test_conflict_graph_corners():
    g = build_conflict_graph(corners_geometry(), 1.0)
    assert sorted(g.edges()) == [(0, 1), (0, 2), (1, 3), (2, 3)]
    assert build_conflict_graph(corners_geometry(), 0.5).num_edges == 0
    assert build_conflict_graph(corners_geometry(), 1.5).num_edges == 6


def test_conflict_graph_matches_pair_enumeration():
    geo = geometry(40, 3)
    for delta in (0.05, 0.125, 0.3):
        g = build_conflict_graph(geo, delta)
        brute = [(i, j) for i, j in itertools.combinations(range(40), 2)
                 if np.linalg.norm(geo.rru_positions[i] - geo.rru_positions[j]) <= delta * 200]
        assert sorted(g.edges()) == brute


def test_tabu_triangle():
    tri = graph_from_edges(3, [(0, 1), (1, 2), (0, 2)])
    col = tabu_coloring(tri, 3, rng=np.random.default_rng(0))
    assert tri.is_proper(col) and len(set(col)) == 3
    assert tabu_coloring(tri, 2, rng=np.random.default_rng(0)) is None


@pytest.mark.parametrize("seed", range(15))
def test_color_count_matches_exact_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 21))
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < rng.uniform(0.2, 0.7)]
    g = graph_from_edges(n, edges)
    count, col = color_count(g, ColoringKnobs(), np.random.default_rng(seed))
    assert g.is_proper(col)
    assert count == chromatic_number(n, edges)
    assert clique_lower_bound(g) <= count


@pytest.mark.parametrize("seed", range(10))
def test_color_count_on_geometric_graphs(seed):
    geo = geometry(20, seed)
    g = build_conflict_graph(geo, 0.3)
    count, col = color_count(g, ColoringKnobs(), np.random.default_rng(seed))
    assert g.is_proper(col)
    assert count == chromatic_number(20, g.edges())


def test_corners_two_groups_are_diagonals():
    part = graph_color_associate(corners_geometry(), 2, rng=np.random.default_rng(0))
    got = sorted(sorted(g.tolist()) for g in part.groups)
    oracle = sorted(sorted(g) for g in best_two_partition(CORNERS))
    assert got == oracle == [[0, 3], [1, 2]]


def test_corners_three_groups_infeasible():
    with pytest.raises(InfeasibleColoringError) as info:
        graph_color_associate(corners_geometry(), 3, rng=np.random.default_rng(0))
    assert info.value.target == 3
    lo, hi = info.value.nearest
    assert lo < hi


def test_l32_two_groups():
    geo = geometry(32, 11)
    part = graph_color_associate(geo, 2, rng=derive_stream(1, 0, "c"))
    assert part.num_groups == 2
    part.validate()
    g = build_conflict_graph(geo, part.info["delta"])
    assert g.is_proper(part.group_of)


def test_limits():
    geo = geometry(12, 5)
    single = graph_color_associate(geo, 1)
    assert single.sizes == [12]
    every = graph_color_associate(geo, 12)
    assert sorted(every.sizes) == [1] * 12
    assert build_conflict_graph(geo, every.info["delta"]).is_proper(every.group_of)


def test_repair_balances_isolated_rrus():
    geo = geometry(100, 2)
    part = graph_color_associate(geo, 4, rng=np.random.default_rng(4))
    assert max(part.sizes) <= 25 or max(part.sizes) - min(part.sizes) <= 100
    assert sum(part.sizes) == 100


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition.from_groups([[0, 1], [1, 2]])
    with pytest.raises(ValueError):
        Partition.from_groups([[0, 1], []], num_rrus=2)
    with pytest.raises(ValueError):
        Partition.from_groups([[0], [2]], num_rrus=3)


def test_kmeans_separated_clusters(rng):
    pts = np.array([[0, 0], [0, 1], [10, 0], [10, 1]], dtype=float)
    part = kmeans_pp(pts, 2, rng, restarts=3)
    assert sorted(sorted(g.tolist()) for g in part.groups) == [[0, 1], [2, 3]]
    assert kmeans_pp(pts, 1, rng).sizes == [4]


def test_kmeans_beats_random_partitions():
    geo = geometry(100, 9)
    part = kmeans_pp(geo, 4, derive_stream(9, 0, "k"), restarts=10)
    rng = np.random.default_rng(1)
    best_random = min(wcss(geo.rru_positions, rng.integers(0, 4, 100)) for _ in range(1000))
    assert part.info["wcss"] <= best_random


def test_kmeans_more_restarts_never_worse():
    geo = geometry(80, 4)
    w = [kmeans_pp(geo, 5, derive_stream(3, 0, "k"), restarts=r).info["wcss"] for r in (1, 3, 10)]
    assert w[0] >= w[1] >= w[2]


def test_kmeans_fills_empty_clusters():
    pts = np.array([[0.0, 0.0]] * 5 + [[1.0, 1.0]])
    part = kmeans_pp(pts, 3, np.random.default_rng(0), restarts=2)
    assert all(s > 0 for s in part.sizes)


def test_ga_fitness_cases():
    geo = Geometry.from_positions(np.array([[0.0, 0.0], [3.0, 4.0]]), np.zeros((1, 2)), 10.0)
    assert ga_fitness(Partition.from_groups([[0], [1]]), geo) == pytest.approx(1 / 5)
    big = Geometry.from_positions(np.array([[0.0, 0.0], [6.0, 8.0]]), np.zeros((1, 2)), 20.0)
    assert ga_fitness(Partition.from_groups([[0], [1]]), big) == pytest.approx(1 / 10)
    diag = Partition.from_groups([[0, 3], [1, 2]])
    side = Partition.from_groups([[0, 1], [2, 3]])
    geo4 = corners_geometry()
    d = geo4.rru_rru_dist
    assert ga_fitness(diag, geo4) == pytest.approx(1 / (d[0, 1] + d[0, 2] + d[3, 1] + d[3, 2]))
    assert ga_fitness(side, geo4) == pytest.approx(1 / (d[0, 2] + d[0, 3] + d[1, 2] + d[1, 3]))
    assert ga_fitness(diag, geo4) > ga_fitness(side, geo4)
    with pytest.raises(ValueError):
        ga_fitness(Partition.from_groups([[0, 1, 2, 3]]), geo4)
    same = Geometry.from_positions(np.zeros((2, 2)), np.zeros((1, 2)), 1.0)
    with pytest.raises(ValueError):
        ga_fitness(Partition.from_groups([[0], [1]]), same)


def test_ga_fitness_scale_covariance():
    geo = geometry(30, 1)
    part = graph_color_associate(geo, 3, rng=np.random.default_rng(0))
    scaled = Geometry.from_positions(geo.rru_positions * 2.5, geo.ue_positions * 2.5, 500.0)
    assert ga_fitness(part, scaled) == pytest.approx(ga_fitness(part, geo) / 2.5, rel=1e-12)


def test_dcc_orthogonal_is_full(rng):
    beta = rng.uniform(0.1, 1.0, (5, 8))
    assoc = dcc_associate(beta, assign_pilots(5, beta), 5)
    assert assoc.is_full
    assert full_association(5, 8).is_full


def test_dcc_contested_rru():
    beta = np.array([[1.0, 0.1], [0.5, 0.9]])
    serves = dcc_associate(beta, np.array([0, 0]), 1).serves
    assert serves.tolist() == [[True, False], [False, True]]


def test_dcc_random_validity():
    cfg = ScenarioConfig(num_ues=48)
    for seed in range(5):
        geo = generate_geometry(cfg, derive_stream(seed, 0, "geometry"))
        beta = geo.ue_rru_dist ** -3.67
        pilots = assign_pilots(24, beta)
        assert np.all(np.bincount(pilots, minlength=24) == 2)
        serves = dcc_associate(beta, pilots, 24).serves
        assert serves.any(axis=1).all()
        for l in range(cfg.num_rrus):
            users = np.flatnonzero(serves[:, l])
            assert len(set(pilots[users])) == len(users)
        assert serves[np.arange(48), beta.argmax(axis=1)].all()


def test_dcc_edu_mask():
    serves = np.array([[True, False, True], [False, True, True]])
    from cfran.association import AssociationMatrices
    mask = AssociationMatrices(serves).edu_mask(np.array([0, 2]), 2)
    assert mask.shape == (4, 2)
    assert mask[:, 0].tolist() == [True, True, True, True]
    assert mask[:, 1].tolist() == [False, False, True, True]


def test_centroid_cases(rng):
    assert centroid([[0, 0], [2, 0], [0, 2], [2, 2]]).tolist() == [1.0, 1.0]
    assert centroid([[3.5, -1.0]]).tolist() == [3.5, -1.0]
    with pytest.raises(ValueError):
        centroid(np.zeros((0, 2)))
    for _ in range(20):
        pts = rng.uniform(0, 200, (50, 2))
        c = centroid(pts)
        assert np.all(np.abs(squared_distance_gradient(c, pts)) < 1e-9)
        base = squared_distance_sum(c, pts)
        for _ in range(100):
            step = rng.standard_normal(2)
            step *= 0.1 / np.linalg.norm(step)
            assert base <= squared_distance_sum(c + step, pts)
