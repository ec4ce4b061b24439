"""Compare the numba kernels against the pure-numpy fallback.

Times the individual kernels on a synthetic feasibility problem and then a
full solver run per method family.  Run from an installed environment:

    python3 benchmarks/compare_backends.py
    python3 benchmarks/compare_backends.py --n 50 --m 500 --iters 2000
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from viouter import MethodConfig, bench, kernels, solve


def time_call(fn, *args, repeats: int = 5) -> float:
    """Best-of wall time in seconds for fn(*args)."""
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def kernel_table(n: int, m: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    interior = rng.standard_normal(n)
    b = A @ interior + rng.uniform(0.1, 0.5, m)
    rnsq = np.einsum("ij,ij->i", A, A)
    x = interior + 3.0 * rng.standard_normal(n)
    rows = np.arange(m, dtype=np.int64)
    weights = np.full(m, 1.0 / m)

    jit = kernels.jit_kernels()
    if jit is None:
        raise SystemExit("numba is not importable; nothing to compare")
    ref = kernels.NUMPY_IMPLS

    cases = [
        ("residuals", (A, b, x)),
        ("argmax_residual", (A, b, x, rows)),
        ("apply_simultaneous", (A, b, rnsq, x, rows, weights)),
        ("apply_composition", (A, b, rnsq, x, rows)),
        ("augmented_scan", (A, b, rnsq, x, 0, min(20, m), 0.0, False)),
        ("dykstra", (A, b, rnsq, x, 100000, 1e-10)),
    ]

    print(f"kernels  (n={n}, m={m})")
    print(f"{'kernel':<20} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, args in cases:
        jit[name](*args)  # compile outside the timed region
        t_np = time_call(ref[name], *args)
        t_nb = time_call(jit[name], *args)
        print(f"{name:<20} {t_np * 1e6:>10.1f}us {t_nb * 1e6:>10.1f}us {t_np / t_nb:>8.1f}x")
    print()


def solver_table(n: int, m: int, iters: int, seed: int) -> None:
    problem = bench.generate_problem(seed, n=n, m=m)
    methods = bench.default_method_grid(m)

    print(f"solver   (n={n}, m={m}, iterations={iters})")
    print(f"{'method':<20} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for method in methods:
        times = {}
        for backend in ("numpy", "numba"):
            kernels.set_backend(backend)
            solve(problem, method, 10)  # warm the dispatch path
            start = time.perf_counter()
            solve(problem, method, iters)
            times[backend] = time.perf_counter() - start
        label = MethodConfig(
            family=method.family,
            block=method.block,
            augmented=method.augmented,
            weights=method.weights,
        ).label
        print(
            f"{label:<20} {times['numpy'] * 1e3:>10.1f}ms "
            f"{times['numba'] * 1e3:>10.1f}ms {times['numpy'] / times['numba']:>8.1f}x"
        )
    kernels.set_backend(None)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=20, help="ambient dimension")
    parser.add_argument("--m", type=int, default=100, help="number of half-spaces")
    parser.add_argument("--iters", type=int, default=1000, help="solver iterations")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    kernel_table(args.n, args.m, args.seed)
    solver_table(args.n, args.m, args.iters, args.seed)


if __name__ == "__main__":
    main()
