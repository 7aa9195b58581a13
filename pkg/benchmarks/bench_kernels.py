"""Timing of the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat R]
"""
import argparse
import timeit

import numpy as np

from dmnls import _kernels_py

try:
    from dmnls import _kernels
except ImportError:
    _kernels = None


def _cases(rng):
    for K in (16, 64, 256):
        X = rng.standard_normal((K, 512)) + 1j * rng.standard_normal((K, 512))
        yield K, X


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    backends = [("python", _kernels_py)] + ([("cython", _kernels)] if _kernels else [])
    if _kernels is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<12}{'K':>6}" + "".join(f"{name + ' ms':>14}" for name, _ in backends) + f"{'speedup':>10}")
    for K, X in _cases(rng):
        dist = _kernels_py.pairwise_l2(X, 0.1)
        for kernel, call in (("pairwise_l2", lambda m: m.pairwise_l2(X, 0.1)),
                             ("pvar_chain", lambda m: m.pvar_chain(dist, 2.5))):
            times = [min(timeit.repeat(lambda: call(m), number=1, repeat=args.repeat)) * 1e3
                     for _, m in backends]
            speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else f"{'-':>10}"
            print(f"{kernel:<12}{K:>6}" + "".join(f"{t:>14.3f}" for t in times) + speed)


if __name__ == "__main__":
    main()
