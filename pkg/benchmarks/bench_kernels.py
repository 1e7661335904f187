"""Compare the compiled and NumPy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` wall time per call for each kernel and size,
and checks that both backends agree.
"""
import argparse
import timeit

import numpy as np

from sarcv import kernels


def cases():
    rng = np.random.default_rng(0)
    for d, n in [(10, 1024), (65, 256), (65, 1024)]:
        S = rng.standard_normal((d, d)) / d
        inc = rng.standard_normal((n, d))
        q = rng.standard_normal((1, d, d))
        qn = rng.standard_normal((n, d, d))
        yield d, n, S, inc, q, qn


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled extension not available; timing the NumPy backend only")
    print(f"{'kernel':<22}{'d':>5}{'n':>7}" + "".join(f"{b:>14}" for b in backends))
    for d, n, S, inc, q, qn in cases():
        for name, fn, argsets in [
            ("mild_recursion", kernels.mild_recursion, (S, inc, np.zeros(d))),
            ("sup_error (shared q)", kernels.sarcv_sup_error, (inc, q)),
            ("sup_error (per-step)", kernels.sarcv_sup_error, (inc, qn)),
        ]:
            times = []
            results = []
            for b in backends:
                results.append(fn(*argsets, backend=b))
                t = min(timeit.repeat(lambda: fn(*argsets, backend=b), number=3, repeat=args.repeat)) / 3
                times.append(t)
            if len(results) == 2:
                np.testing.assert_allclose(results[0], results[1], rtol=1e-10, atol=1e-10)
            print(f"{name:<22}{d:>5}{n:>7}" + "".join(f"{t * 1e3:>12.3f}ms" for t in times))


if __name__ == "__main__":
    main()
