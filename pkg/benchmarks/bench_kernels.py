"""Benchmark the compiled kernel against the numpy fallback.

Workload: the standard shrinking-circle run (N vertices, CFL stepping,
per-step resampling), which is what dominates every scenario's runtime.

Usage: python benchmarks/bench_kernels.py [N] [steps]
"""

import sys
import time

import numpy as np

from ambientflow._kernels import py_backend

try:
    from ambientflow._kernels import _core
    backends = [("compiled", _core), ("python", py_backend)]
except ImportError:
    backends = [("python", py_backend)]


def circle(n):
    th = np.arange(n) * (2.0 * np.pi / n)
    return np.column_stack((np.cos(th), np.sin(th)))


def bench(impl, n, nsteps):
    xy = circle(n)
    series = np.empty((nsteps, 7))
    t0 = time.perf_counter()
    out, t, steps, code = impl.advance(
        xy, 0.0, nsteps, 1.0, 0.0, py_backend.FIELD_SADDLE, np.zeros(4),
        0.0, 0.2, 1, np.inf, 1e-12, series)
    elapsed = time.perf_counter() - t0
    return steps, elapsed


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 512
    nsteps = int(sys.argv[2]) if len(sys.argv) > 2 else 20000
    results = {}
    for name, impl in backends:
        steps, elapsed = bench(impl, n, nsteps)
        rate = steps / elapsed
        results[name] = rate
        print(f"{name:9s} N={n} steps={steps} time={elapsed:.3f}s rate={rate:,.0f} steps/s")
    if len(results) == 2:
        print(f"speedup: {results['compiled'] / results['python']:.1f}x")


if __name__ == "__main__":
    main()
