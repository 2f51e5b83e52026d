"""Time the numba kernels against the numpy/heapq fallback.

Each kernel runs on the same inputs under both backends; outputs must match
exactly before any timing is reported.  A second table shows query op counts
as n grows for partial TZ (shallow vs deep) and the MN emulator.

    python benchmarks/bench_kernels.py [--sizes 200 400 800] [--repeat 3]
"""
import argparse
import time

import numpy as np

from prdo import _kernels
from prdo.emulators import MetricGraph, MNEmulator
from prdo.generators import erdos_renyi
from prdo.graph import HopGraph
from prdo.harness import random_pairs
from prdo.partial_tz import build_partial_tz


def _best(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True)


def kernel_cases(g):
    hg = HopGraph(g)
    exact = g.multi_source([0])[0]
    rounds = min(g.n, 64)
    return {
        "sssp": lambda: _kernels.sssp(g.indptr, g.nbr, g.adj_eid, g.adj_w, g.adj_tie,
                                      np.arange(0, g.n, 17)),
        "apsp": lambda: _kernels.apsp(g.indptr, g.nbr, g.adj_eid, g.adj_w, g.adj_tie),
        "bf_tables": lambda: hg.tables(0, rounds),
        "bf_first": lambda: hg.first_rounds(0, rounds, exact, 1.5),
    }


def run_kernels(sizes, repeat):
    print(f"{'kernel':<10} {'n':>6} {'numba_s':>10} {'numpy_s':>10} {'speedup':>8}  match")
    for n in sizes:
        g = erdos_renyi(n, min(1.0, 8.0 / n), seed=n)
        for name, fn in kernel_cases(g).items():
            _kernels.USE_NUMBA = True
            fn()  # compile outside the timed region
            fast, t_fast = _best(fn, repeat)
            _kernels.USE_NUMBA = False
            slow, t_slow = _best(fn, 1 if name == "apsp" else repeat)
            _kernels.USE_NUMBA = True
            print(f"{name:<10} {n:>6} {t_fast:>10.4f} {t_slow:>10.4f} "
                  f"{t_slow / max(t_fast, 1e-9):>8.1f}  {_same(fast, slow)}")


def run_ops(sizes):
    print(f"\n{'n':>6} {'tz_h2_max':>10} {'tz_h4_max':>10} {'tz_h4_mean':>11} {'mn_ops':>7}")
    for n in sizes:
        g = erdos_renyi(n, min(1.0, 8.0 / n), seed=n)
        pairs = random_pairs(n, 400, seed=1)
        row = []
        for h in (2, 4):
            tz = build_partial_tz(g, 8, h, seed=0)
            q = [tz.query(u, v).q_evals for u, v in pairs]
            row.append((max(q), float(np.mean(q))))
        pts = np.arange(0, n, max(1, n // 60))
        mn = MNEmulator(MetricGraph.from_graph(g, pts), 3, seed=0)
        ops = max(mn.query_ops(int(a), int(b))[1] for a, b in zip(pts[:20], pts[1:21]))
        print(f"{n:>6} {row[0][0]:>10} {row[1][0]:>10} {row[1][1]:>11.2f} {ops:>7}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 400, 800])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    run_kernels(args.sizes, args.repeat)
    run_ops(args.sizes)


if __name__ == "__main__":
    main()
