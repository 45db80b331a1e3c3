"""Compare the compiled and pure-Python kernels on long random signals.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from crossnoise import _pykernels

try:
    from crossnoise import _ckernels
except ImportError:
    _ckernels = None

FS = 16000


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled kernels unavailable, timing the fallback only")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'seconds':>8}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for seconds in (10, 60, 600):
        x = rng.standard_normal(seconds * FS)
        cases = {
            "sum_squares": lambda k: k.sum_squares(x),
            "frame_mean_squares": lambda k: k.frame_mean_squares(x, 400, 160),
        }
        for name, call in cases.items():
            times = {b: bench(lambda k=k: call(k), args.repeat) for b, k in backends.items()}
            row = f"{name:<20}{seconds:>8}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times.values())
            if len(times) == 2:
                row += f"{times['python'] / times['cython']:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()
