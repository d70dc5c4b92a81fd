"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--samples 24000] [--repeat 3] [--threads 1]

Prints one line per kernel with the best-of-``repeat`` time for each
backend, the speedup, and the largest relative difference of the outputs.
"""
import argparse
import time

import numpy as np

from rdesteady import _kernels
from rdesteady.densities import MixtureDensity1D, ParameterLaw, lhs_sample
from rdesteady.model_rm import trace_det
from rdesteady.randeq import GridSpec2D


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.max(np.abs(a)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


def cases(n, threads):
    law = ParameterLaw([MixtureDensity1D.normal(1.0, 0.05, 1e-6),
                        MixtureDensity1D.normal(1.0, 0.1, 1e-6),
                        MixtureDensity1D.normal(0.25, 0.03, 1e-6)])
    params = lhs_sample(law, n, 1).values
    grid = GridSpec2D(0, 1.5, 0, 1.5, 100, 100)
    sig = GridSpec2D(-1.5, 1.5, -1.5, 1.5, 301, 301)
    t, d = trace_det((1 / 3, 8 / 9), params)
    t, d = np.ascontiguousarray(t), np.ascontiguousarray(d)
    few = np.ascontiguousarray(params[: max(n // 10, 1)])
    return {
        "steady_density 100x100": lambda k: k.steady_density(
            grid.x_centers, grid.y_centers, params, 0.005, 0.005, threads)[0],
        "eig_density 301x301": lambda k: k.eig_density(
            sig.x_centers, sig.y_centers, t, d, 0.01, 0.01, threads),
        "newton_batch": lambda k: k.newton_batch(params, 0.3, 0.9, 1e-12, 100, 1 / 1024,
                                                 threads)[0],
        f"rk4_batch n={len(few)}": lambda k: k.rk4_batch(few, 0.3, 0.9, 0.01, 20000, 1e-8,
                                                         threads)[0],
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=24000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    if "compiled" not in _kernels.available():
        print("compiled backend not built; only the fallback is available")
        return
    comp, py = _kernels.get("compiled"), _kernels.get("python")
    print(f"{'kernel':<26}{'compiled s':>12}{'python s':>12}{'speedup':>10}{'max rel diff':>14}")
    for name, fn in cases(args.samples, args.threads).items():
        tc, oc = _best(lambda: fn(comp), args.repeat)
        tp, op = _best(lambda: fn(py), args.repeat)
        print(f"{name:<26}{tc:>12.3f}{tp:>12.3f}{tp / tc:>10.1f}{_rel(oc, op):>14.2e}")


if __name__ == "__main__":
    main()
