"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--tests 1000000]

Each row reports the best of ``--repeat`` runs and checks that both
backends return identical arrays.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from chshrand import kernels, lhvm, solver
from chshrand.coremath import C_Q_LITERAL
from chshrand.profile import SettingSet


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def workloads(tests):
    kx, cx, rx, _ = solver._canonical_signatures(4, True)
    ky, cy, ry, _ = solver._canonical_signatures(4, False)
    thresh = np.array([int(float(C_Q_LITERAL) * 4 * p) for p in range(257)], dtype=np.int64)
    a = SettingSet.threshold(8, 3)
    st = lhvm.strategy_from_sets(a, a)
    tables = lhvm._tables(st)
    u = np.random.default_rng(0).random((tests, 3))
    return [
        ("subset_signatures n=4", lambda k: k.subset_signatures(4)),
        ("best_pair n=4", lambda k: k.best_pair(kx, cx, rx, ky, cy, ry, thresh)),
        (f"tally_tests {tests} x n=8", lambda k: k.tally_tests(u, *tables, 8)),
    ]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--tests", type=int, default=1_000_000)
    args = p.parse_args(argv)
    py = kernels.backend("python")
    try:
        cy = kernels.backend("cython")
    except ImportError:
        print("compiled extension not built; only the python backend is available")
        cy = None
    print(f"{'kernel':<28}{'python s':>12}{'cython s':>12}{'speedup':>10}  match")
    for name, fn in workloads(args.tests):
        tp, outp = best_of(lambda: fn(py), args.repeat)
        if cy is None:
            print(f"{name:<28}{tp:>12.4f}{'-':>12}{'-':>10}  -")
            continue
        tc, outc = best_of(lambda: fn(cy), args.repeat)
        print(f"{name:<28}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x  {same(outp, outc)}")


if __name__ == "__main__":
    main()
