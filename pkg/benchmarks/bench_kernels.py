"""Time the compiled and pure-Python kernel backends side by side.

    python benchmarks/bench_kernels.py --repeat 5
"""
import argparse
import time

import numpy as np

from bgcn import kernels
from bgcn.data import synthetic_citation
from bgcn.graph import gcn_adjacency


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes-per-class", type=int, default=400)
    ap.add_argument("--classes", type=int, default=7)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--walkers", type=int, default=200_000)
    ap.add_argument("--steps", type=int, default=11)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    ds = synthetic_citation(args.classes, args.nodes_per_class, 16, p_in=0.01, p_out=0.0005)
    g = ds.graph
    a = gcn_adjacency(g)
    h = np.random.default_rng(0).standard_normal((g.n, args.hidden))
    starts = np.arange(args.walkers) % g.n
    backends = ["python"] + (["compiled"] if kernels.BACKEND == "compiled" else [])
    print(f"graph: n={g.n}, edges={g.num_edges}; default backend: {kernels.BACKEND}")
    rows = []
    ref = {}
    for b in backends:
        t_spmm, y = best_of(lambda: kernels.spmm(a.indptr, a.indices, a.data, h, backend=b),
                            args.repeat)
        t_walk, w = best_of(lambda: kernels.mh_walks(g.row_offsets, g.col_indices, starts,
                                                     args.steps, 1, backend=b), args.repeat)
        if ref:
            assert np.array_equal(y, ref["spmm"]) and np.array_equal(w, ref["walk"])
        ref = {"spmm": y, "walk": w}
        rows.append((b, t_spmm, t_walk))
    print(f"{'backend':<10}{'spmm (ms)':>12}{'walks (ms)':>12}")
    for b, ts, tw in rows:
        print(f"{b:<10}{ts * 1e3:>12.2f}{tw * 1e3:>12.1f}")
    if len(rows) == 2:
        print(f"speedup: spmm x{rows[0][1] / rows[1][1]:.1f}, walks x{rows[0][2] / rows[1][2]:.1f}"
              " (outputs identical)")


if __name__ == "__main__":
    main()
