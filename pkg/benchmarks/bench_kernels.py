"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Each kernel is run on the same inputs under both backends; results are
checked for agreement before timings are reported. ``--end-to-end`` also
times a short FEW run in a subprocess with and without FEW_DISABLE_NUMBA.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from few import kernels
from few.evolution import lexicase_draws


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def cases(rng):
    n, p = 800, 30
    X = rng.normal(size=(n, p))
    t = (X[:, 0] - X[:, 1] + 0.5 * rng.normal(size=n) > 0).astype(float)
    yield ("logistic l1", lambda k: k(X, t, 1.0, kernels.L1, 1e-6, 10_000),
           kernels.logistic_cd_numba, kernels.logistic_cd_numpy)

    Xs = rng.integers(0, 3, size=(1000, 20)).astype(float)
    ys = rng.integers(0, 2, 1000).astype(np.int64)
    feats = np.arange(20, dtype=np.int64)
    yield ("best split", lambda k: k(Xs, ys, 2, feats, kernels.GINI, 1),
           kernels.best_split_numba, kernels.best_split_numpy)

    errors = rng.random((100, 600)).round(2)
    orders, picks = lexicase_draws(rng, 50, 600)
    yield ("eps-lexicase", lambda k: k(errors, 50, orders, picks),
           kernels.eps_lexicase_numba, kernels.eps_lexicase_numpy)


def agree(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(x, y, atol=1e-6) for x, y in zip(a, b))


END_TO_END = (
    "import time; from few import *; ds = gen_epistasis_xor(seed=0);"
    "t = time.perf_counter();"
    "few_fit(ds.X, ds.y, EngineConfig(population_size=40, generations=30, output_type='bool'));"
    "print(time.perf_counter() - t)"
)


def end_to_end():
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, FEW_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True,
                             text=True, check=True)
        out[label] = float(res.stdout.strip().splitlines()[-1])
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':14s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}  agree")
    for name, call, fast, slow in cases(rng):
        call(fast)  # compile (or load from cache) outside the timing
        t_fast, r_fast = best_of(lambda: call(fast), args.repeat)
        t_slow, r_slow = best_of(lambda: call(slow), args.repeat)
        print(f"{name:14s} {t_fast * 1e3:10.2f} {t_slow * 1e3:10.2f} "
              f"{t_slow / t_fast:8.1f}x  {agree(r_fast, r_slow)}")
    if args.end_to_end:
        t = end_to_end()
        print(f"FEW run (P=40, 30 generations): numba {t['numba']:.2f}s, numpy {t['numpy']:.2f}s")


if __name__ == "__main__":
    main()
