"""Compare the compiled kernels against the pure-Python fallback.

Run directly:

    python3 benchmarks/bench_kernels.py [--repeat 5]

Workload shapes mirror the hot paths: convolution stages of an order-9
autoconvolution on a few-hundred-bin spectrum, and the compensated sums
behind one weight-series evaluation on the default 8001-point grid.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from chfdist import _kernels_py

try:
    from chfdist import _kernels
except ImportError:
    _kernels = None


def best_of(fn, args, repeat: int, min_time: float = 0.05) -> float:
    """Best per-call time in seconds, with an adaptive inner loop."""
    number = 1
    while True:
        started = time.perf_counter()
        for _ in range(number):
            fn(*args)
        elapsed = time.perf_counter() - started
        if elapsed >= min_time:
            break
        number *= 4
    best = elapsed / number
    for _ in range(repeat - 1):
        started = time.perf_counter()
        for _ in range(number):
            fn(*args)
        best = min(best, (time.perf_counter() - started) / number)
    return best


def convolution_cases(rng: np.random.Generator) -> list[tuple[str, tuple]]:
    cases = []
    for la, lb in ((64, 64), (401, 401), (1585, 401)):
        a = rng.random(la)
        b = rng.random(lb)
        cases.append((f"convolve_full {la}x{lb}", (a, b)))
    # Half-empty input: the compiled loop skips zero rows.
    sparse = rng.random(401)
    sparse[rng.random(401) < 0.5] = 0.0
    cases.append(("convolve_full 401x401 half-zero", (sparse, rng.random(401))))
    return cases


def summation_cases(rng: np.random.Generator) -> list[tuple[str, tuple]]:
    cases = []
    for n in (101, 8001):
        scale = 10.0 ** rng.integers(-12, 3, n)
        terms = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * scale
        order = np.argsort(-np.abs(terms), kind="stable")
        cases.append((f"compensated_sum n={n}", (terms[order],)))
    return cases


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not available; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    rows = []
    for name, case_args in convolution_cases(rng):
        t_c = best_of(_kernels.convolve_full, case_args, args.repeat)
        t_py = best_of(_kernels_py.convolve_full, case_args, args.repeat)
        rows.append((name, t_c, t_py))
    for name, case_args in summation_cases(rng):
        t_c = best_of(_kernels.compensated_complex_sum, case_args, args.repeat)
        t_py = best_of(_kernels_py.compensated_complex_sum, case_args, args.repeat)
        rows.append((name, t_c, t_py))

    width = max(len(name) for name, *_ in rows)
    print(f"{'workload':<{width}}  {'compiled':>12}  {'python':>12}  {'ratio':>7}")
    for name, t_c, t_py in rows:
        print(
            f"{name:<{width}}  {t_c * 1e6:>10.2f}us  {t_py * 1e6:>10.2f}us  "
            f"{t_py / t_c:>6.2f}x"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
