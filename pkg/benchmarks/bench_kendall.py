"""Kendall tau-b timing: compiled merge kernel vs numpy fallback vs scipy.

    python benchmarks/bench_kendall.py [--sizes 1000 10000 100000] [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np
from scipy import stats

from vinedep import _kendall_py, dependence

try:
    from vinedep import _kendall_ext
except ImportError:  # extension not built
    _kendall_ext = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 10000, 100000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    backends = [("numpy", _kendall_py.sorted_pair_counts)]
    if _kendall_ext is not None:
        backends.insert(0, ("cython", _kendall_ext.sorted_pair_counts))
    print(f"{'n':>8} " + " ".join(f"{name:>10}" for name, _ in backends) + f" {'scipy':>10}")
    for n in args.sizes:
        x = rng.integers(0, n // 10 + 2, n).astype(float)
        y = x + rng.normal(size=n)
        row, taus = [], []
        for _, kernel in backends:
            t, pc = best_of(lambda: dependence.pair_counts(x, y, kernel), args.repeat)
            row.append(t)
            taus.append(pc.tau_b())
        t, res = best_of(lambda: stats.kendalltau(x, y), args.repeat)
        row.append(t)
        taus.append(res.statistic)
        assert max(taus) - min(taus) < 1e-12, taus
        print(f"{n:>8} " + " ".join(f"{v * 1e3:>8.2f}ms" for v in row))


if __name__ == "__main__":
    main()
