import os

import numpy as np
import pytest

from cfran import _kernels_py, kernels
from cfran.association import graph_from_edges

compiled = pytest.importorskip("cfran._kernels")


def random_graph(rng, n, p):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return graph_from_edges(n, edges)


def test_backend_selection():
    expected = "python" if os.environ.get("CFRAN_PURE_PYTHON") else "cython"
    assert kernels.BACKEND == expected


@pytest.mark.parametrize("seed", range(20))
def test_dsatur_backends_agree(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, int(rng.integers(1, 60)), rng.uniform(0.05, 0.6))
    a = compiled.dsatur(g.indptr, g.indices)
    b = _kernels_py.dsatur(g.indptr, g.indices)
    assert np.array_equal(a, b)
    assert g.is_proper(a)


@pytest.mark.parametrize("seed", range(20))
def test_tabucol_backends_agree(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(5, 50))
    g = random_graph(rng, n, rng.uniform(0.1, 0.5))
    k = int(rng.integers(2, 6))
    init = rng.integers(0, k, n).astype(np.int64)
    a = compiled.tabucol(g.indptr, g.indices, k, init, 7, 500)
    b = _kernels_py.tabucol(g.indptr, g.indices, k, init, 7, 500)
    assert np.array_equal(a[0], b[0])
    assert a[1:] == b[1:]


def test_tabucol_reports_conflicts_of_best():
    rng = np.random.default_rng(7)
    g = random_graph(rng, 30, 0.3)
    init = rng.integers(0, 4, 30).astype(np.int64)
    col, f, _ = kernels.tabucol(g.indptr, g.indices, 4, init, 7, 2000)
    owner = np.repeat(np.arange(30), g.degree)
    assert f == int(np.sum(col[owner] == col[g.indices]) // 2)
