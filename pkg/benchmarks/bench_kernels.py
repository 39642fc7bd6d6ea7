"""Benchmark the compiled kernels against the pure-Python fallback.

Run from the repository root:

    python benchmarks/bench_kernels.py [--frames 50] [--n 459] [--steps 1000000]

Both backends are imported directly (no env tricks needed); the reported
per-call times cover the tree-construction kernel pair (edge ordering +
Kruskal selection) on realistic correlation distances and the ladder walk.
"""

import argparse
import time

import numpy as np

from mstdyn import kinetics
from mstdyn._kernels import _pure
from mstdyn.corrnet import WindowSpec, _RollingScan
from mstdyn.laddersim import _compile_rows
from mstdyn.synthgen import FactorModelSpec, generate_panel

try:
    from mstdyn._kernels import _fast
except ImportError:
    _fast = None


def bench_mst(backend, dconds, ii, jj, n):
    t0 = time.perf_counter()
    for d in dconds:
        order = backend.argsort_edges(d)
        sel = backend.kruskal_select(order, ii, jj, n)
        assert sel.shape[0] == n - 1
    return (time.perf_counter() - t0) / len(dconds)


def bench_ladder(backend, steps, cdf, jump, row_len):
    uniforms = np.random.Generator(np.random.Philox(5)).random(steps)
    t0 = time.perf_counter()
    backend.ladder_visits(1, uniforms, cdf, jump, row_len, 0, 1)
    return time.perf_counter() - t0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=459)
    parser.add_argument("--frames", type=int, default=50)
    parser.add_argument("--steps", type=int, default=1_000_000)
    args = parser.parse_args()

    print(f"collecting {args.frames} correlation-distance frames (n={args.n})")
    panel = generate_panel(FactorModelSpec(n=args.n, t_days=args.frames + 420,
                                           seed=11))
    scan = _RollingScan(panel, WindowSpec(400, 1))
    dconds = []
    for _f, _s, _cd, ccond, _bad in scan.frames():
        dconds.append(np.sqrt(2.0 * (1.0 - ccond)))
        if len(dconds) >= args.frames:
            break
    ii, jj = scan.px.i, scan.px.j

    kernel = kinetics.theoretical_kernel({k: 0.3 / k for k in range(2, 31)},
                                         3.07, args.n, k_cap=30)
    cdf, jump, row_len = _compile_rows(kernel)

    backends = [("python", _pure)]
    if _fast is not None:
        backends.insert(0, ("cython", _fast))
    else:
        print("compiled backend unavailable; benchmarking the fallback only")

    results = {}
    for name, impl in backends:
        mst_ms = 1000 * bench_mst(impl, dconds, ii, jj, args.n)
        ladder_s = bench_ladder(impl, args.steps, cdf, jump, row_len)
        results[name] = (mst_ms, ladder_s)
        print(f"{name:>7}: tree selection {mst_ms:8.3f} ms/frame | "
              f"ladder {args.steps:,} steps {ladder_s:7.3f} s")
    if len(results) == 2:
        mst_ratio = results["python"][0] / results["cython"][0]
        ladder_ratio = results["python"][1] / results["cython"][1]
        print(f"speedup: tree selection x{mst_ratio:.1f}, ladder x{ladder_ratio:.1f}")


if __name__ == "__main__":
    main()
