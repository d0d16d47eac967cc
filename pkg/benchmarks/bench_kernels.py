"""Compare the numba and numpy kernels used for QRAM permutations.

    python benchmarks/bench_kernels.py [--repeats 20]
"""
import argparse
import time

import numpy as np

from qpq import _kernels


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def qram_case(n, k, answer_dim):
    data_dims = np.array([1] + [k] * n, dtype=np.int64)
    table = np.zeros((n + 1, k), dtype=np.int64)
    table[1:] = np.arange(1, k + 1)
    return answer_dim, data_dims, table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()
    if not _kernels.USE_NUMBA:
        print("numba disabled (QPQ_DISABLE_NUMBA set or numba missing); nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'size':>12}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for n, k in ((2, 2), (3, 2), (4, 2), (3, 3), (4, 3)):
        case = qram_case(n, k, k + 1)
        jit = lambda: _kernels.qram_permutation(*case)  # noqa: E731
        ref = lambda: _kernels.qram_permutation_numpy(*case)  # noqa: E731
        assert np.array_equal(jit(), ref())
        size = (n + 1) * (k + 1) * k**n
        t_np, t_nb = best_of(ref, args.repeats), best_of(jit, args.repeats)
        print(f"{f'qram_permutation n={n} k={k}':<28}{size:>12}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>10.2f}")
    for rows, cols in ((64, 4096), (1024, 256), (16384, 16)):
        block = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
        perm = rng.permutation(rows)
        assert np.array_equal(_kernels.scatter_rows_jit(block, perm), _kernels.scatter_rows_numpy(block, perm))
        t_np = best_of(lambda: _kernels.scatter_rows_numpy(block, perm), args.repeats)
        t_nb = best_of(lambda: _kernels.scatter_rows_jit(block, perm), args.repeats)
        print(f"{f'scatter_rows {rows}x{cols}':<28}{rows * cols:>12}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>10.2f}")


if __name__ == "__main__":
    main()
