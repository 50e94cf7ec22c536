"""Time the compiled support scan against the numpy fallback.

Run: python3 benchmarks/bench_support.py [--sizes 64 128 256] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from qkcalc import _support_py

try:
    from qkcalc import _support_c
except ImportError:
    _support_c = None


def case(n: int, stack: int, rng: np.random.Generator):
    idx = np.arange(n, dtype=float)
    dist = np.abs(idx[:, None] - idx[None, :])
    mats = np.zeros((stack, n, n), dtype=np.complex128)
    band = max(1, n // 16)
    mask = dist <= band
    mats[:, mask] = rng.normal(size=(stack, mask.sum())) + 1j * rng.normal(size=(stack, mask.sum()))
    return np.ascontiguousarray(mats), np.ascontiguousarray(dist)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    ap.add_argument("--stack", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'n':>6} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for n in args.sizes:
        mats, dist = case(n, args.stack, rng)
        ref = _support_py.max_support_distance(mats, dist, 1e-14)
        t_py = min(timeit.repeat(lambda: _support_py.max_support_distance(mats, dist, 1e-14),
                                 number=1, repeat=args.repeat))
        if _support_c is None:
            print(f"{n:>6} {t_py * 1e3:>10.3f} {'n/a':>10} {'n/a':>8}")
            continue
        got = _support_c.max_support_distance(mats, dist, 1e-14)
        if got != ref:
            raise SystemExit(f"backends disagree at n={n}: {got} != {ref}")
        t_c = min(timeit.repeat(lambda: _support_c.max_support_distance(mats, dist, 1e-14),
                                number=1, repeat=args.repeat))
        print(f"{n:>6} {t_py * 1e3:>10.3f} {t_c * 1e3:>10.3f} {t_py / t_c:>8.2f}")


if __name__ == "__main__":
    main()
