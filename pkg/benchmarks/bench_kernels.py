"""Time the compiled graph-coloring kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat R]
"""
import argparse
import timeit

import numpy as np

from cfran import _kernels_py
from cfran.association import build_conflict_graph
from cfran.scenario import ScenarioConfig, derive_stream, generate_geometry

try:
    from cfran import _kernels as compiled
except ImportError:
    compiled = None


def graphs():
    for L, delta in ((100, 0.15), (300, 0.1), (1000, 0.05)):
        cfg = ScenarioConfig(num_rrus=L, num_ues=1, num_edus=1)
        geo = generate_geometry(cfg, derive_stream(1, 0, "geometry"))
        yield L, build_conflict_graph(geo, delta)


def bench(mod, g, repeat):
    init = np.random.default_rng(0).integers(0, 4, g.num_nodes).astype(np.int64)
    t_ds = min(timeit.repeat(lambda: mod.dsatur(g.indptr, g.indices), number=1, repeat=repeat))
    t_tb = min(timeit.repeat(lambda: mod.tabucol(g.indptr, g.indices, 4, init, 7, 2000),
                             number=1, repeat=repeat))
    return t_ds, t_tb


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'L':>5} {'edges':>6} {'kernel':>8} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for L, g in graphs():
        py = bench(_kernels_py, g, args.repeat)
        cy = bench(compiled, g, args.repeat) if compiled else (float("nan"),) * 2
        for name, a, b in (("dsatur", py[0], cy[0]), ("tabucol", py[1], cy[1])):
            print(f"{L:>5} {g.num_edges:>6} {name:>8} {1e3 * a:>10.2f} {1e3 * b:>10.2f} {a / b:>8.1f}")


if __name__ == "__main__":
    main()
