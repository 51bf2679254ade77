"""Compare the compiled and pure-Python kernels on the same inputs.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``
"""

import argparse
import time

import numpy as np

from jointalloc import _kernels_py

try:
    from jointalloc import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _workload(seed: int, n: int):
    rng = np.random.default_rng(seed)
    h = rng.uniform(0.1, 5.0, n)
    c = rng.uniform(0.2, 2.0, n)
    p = c / h * rng.uniform(1.05, 20.0, n)
    groups = []
    for _ in range(n // 4):
        k = int(rng.integers(1, 6))
        hh, cc = rng.uniform(0.1, 5.0, k), rng.uniform(0.2, 2.0, k)
        groups.append((hh, cc, float(np.sum(cc / hh) * rng.uniform(1.05, 5.0))))
    return h.tolist(), c.tolist(), p.tolist(), groups


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(mod, data, repeat):
    h, c, p, groups = data
    out = {}
    out["min_bandwidth"] = _time(lambda: [mod.min_bandwidth(a, b, d) for a, b, d in zip(p, h, c)], repeat)
    out["inv_min_bandwidth"] = _time(
        lambda: [mod.inv_min_bandwidth(1.0 + a, b, d) for a, b, d in zip(p, h, c)], repeat)
    out["solve_single_source"] = _time(
        lambda: [mod.solve_single_source(hh, cc, b) for hh, cc, b in groups], repeat)
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    data = _workload(args.seed, args.n)
    py = run(_kernels_py, data, args.repeat)
    cy = run(_ckernels, data, args.repeat) if _ckernels is not None else None
    print(f"{'kernel':<22}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, t in py.items():
        if cy is None:
            print(f"{name:<22}{t:>12.4f}{'n/a':>12}{'n/a':>10}")
        else:
            print(f"{name:<22}{t:>12.4f}{cy[name]:>12.4f}{t / cy[name]:>9.1f}x")


if __name__ == "__main__":
    main()
