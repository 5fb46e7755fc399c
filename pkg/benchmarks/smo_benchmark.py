"""Compare the compiled SMO kernel against the pure-Python fallback.

Both backends implement the same maximal-violating-pair update order, so
their outputs must agree bit for bit; the point of the compiled kernel is
the per-iteration constant. Run:

    python3 benchmarks/smo_benchmark.py [--sizes 100 300 600] [--trials 5]
"""

import argparse
import time

import numpy as np

from kneesound import _smo_py, classify


def problem(rng, n: int):
    X = np.vstack(
        [
            rng.standard_normal((n // 2, 8)) + 0.6,
            rng.standard_normal((n - n // 2, 8)) - 0.6,
        ]
    )
    y = np.r_[np.ones(n // 2), -np.ones(n - n // 2)]
    return classify.kernel_matrix("gaussian", X, X), y


def run(solver, K, y, tol):
    t0 = time.perf_counter()
    alpha, f, iters, gap = solver(K.copy(), y.copy(), 1.0, tol, 10_000_000)
    return time.perf_counter() - t0, alpha, f, iters, gap


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 600])
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--tol", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not classify.COMPILED_SMO:
        print("compiled kernel unavailable; nothing to compare")
        return 1
    from kneesound import _smo

    rng = np.random.default_rng(args.seed)
    print(f"{'n':>5} {'python (s)':>12} {'compiled (s)':>13} {'speedup':>8} "
          f"{'iterations':>11} {'identical':>10}")
    for n in args.sizes:
        t_py = t_c = 0.0
        iters_total = 0
        identical = True
        for _ in range(args.trials):
            K, y = problem(rng, n)
            dt_c, a_c, f_c, it_c, gap_c = run(_smo.solve, K, y, args.tol)
            dt_p, a_p, f_p, it_p, gap_p = run(_smo_py.solve, K, y, args.tol)
            t_c += dt_c
            t_py += dt_p
            iters_total += it_c
            identical &= (
                np.array_equal(a_c, a_p)
                and np.array_equal(f_c, f_p)
                and it_c == it_p
                and gap_c == gap_p
            )
        print(f"{n:>5} {t_py:>12.3f} {t_c:>13.3f} {t_py / t_c:>8.1f} "
              f"{iters_total:>11} {str(identical):>10}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
