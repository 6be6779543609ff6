"""Time the numba kernels against their pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py
The same comparison end to end: DRIFTSETS_PURE_NUMPY=1 driftsets simulate ...
"""

import time

import numpy as np

from driftsets._kernels import NUMBA_ENABLED, _logistic_irls, _pinball_solve, logistic_irls, pinball_solve


def timeit(fn, *args, repeat=5):
    fn(*args)  # warmup (and JIT compile on the numba path)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def pinball_case(n, d, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = X @ rng.standard_normal(d) + rng.standard_normal(n)
    A = np.concatenate([X, np.ones((n, 1))], axis=1)
    w0 = np.linalg.lstsq(A, y, rcond=None)[0]
    return (A, y, 0.05, w0, 200, 0.1 * float(np.std(y)), 0.1, 12)


def logistic_case(n, d, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    t = (rng.random(n) < 1 / (1 + np.exp(-X[:, 0]))).astype(np.float64)
    A = np.concatenate([X, np.ones((n, 1))], axis=1)
    return (A, t, 100, 1e-8)


def main():
    if not NUMBA_ENABLED:
        print("numba backend inactive (DRIFTSETS_PURE_NUMPY set or numba missing);")
        print("timing the numpy path only.")
    rows = []
    for n, d in ((500, 4), (2000, 4), (2000, 8)):
        args = pinball_case(n, d)
        t_np = timeit(_pinball_solve, *args)
        t_nb = timeit(pinball_solve, *args) if NUMBA_ENABLED else float("nan")
        rows.append((f"pinball_solve n={n} d={d}", t_np, t_nb))
    for n, d in ((1000, 5), (4000, 5)):
        args = logistic_case(n, d)
        t_np = timeit(_logistic_irls, *args)
        t_nb = timeit(logistic_irls, *args) if NUMBA_ENABLED else float("nan")
        rows.append((f"logistic_irls n={n} d={d}", t_np, t_nb))

    print(f"{'kernel':32s} {'numpy (ms)':>12s} {'numba (ms)':>12s} {'speedup':>8s}")
    for name, t_np, t_nb in rows:
        ratio = t_np / t_nb if t_nb == t_nb and t_nb > 0 else float("nan")
        print(f"{name:32s} {1e3 * t_np:12.2f} {1e3 * t_nb:12.2f} {ratio:8.2f}")


if __name__ == "__main__":
    main()
