"""Time the numeric kernels under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py            # both backends
    python3 benchmarks/bench_kernels.py --inner    # current backend only

The backend is fixed at import time, so each one runs in a subprocess with
HYPERKERNEL_NUMBA set accordingly.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _cases():
    from hyperkernel import _kernels as K

    rng = np.random.default_rng(1)
    A = rng.integers(0, K.PRIME, size=(240, 160), dtype=np.int64)
    A[120:] = (A[:120] * 3) % K.PRIME          # dependent half
    pe = np.array([[2, 0], [0, 1], [0, 0]], dtype=np.int64)   # n^2 + k + 6
    pc = np.array([1, 1, 6], dtype=np.int64)
    shifts = np.array([(a, b) for a in range(-25, 26) for b in range(-25, 26)], dtype=np.int64)
    point = np.array([12345, 67890], dtype=np.int64)
    direction = np.array([4242, 1717], dtype=np.int64)
    num = np.array([1.0, 1.0, 0.25])              # (n + 1/2)^2
    den = np.array([1.0, 0.0])                    # n
    return {
        "hyper_partial_sums N=1e6": lambda: K.hyper_partial_sums(num, den, 0.5, 1.0, 0, 10**6, 1000),
        "modp_independent_rows 240x160": lambda: K.modp_independent_rows(A),
        "spread_scan 51x51 window": lambda: K.spread_scan(pe, pc, pe, pc, shifts, point, direction),
    }


def inner(repeat):
    from hyperkernel import _kernels as K

    out = {"backend": K.backend(), "times": {}}
    for name, fn in _cases().items():
        fn()  # warm-up (and compilation)
        best = min(_timed(fn) for _ in range(repeat))
        out["times"][name] = best
    print(json.dumps(out))


def _timed(fn):
    t = time.perf_counter()
    fn()
    return time.perf_counter() - t


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--inner", action="store_true")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if args.inner:
        inner(args.repeat)
        return
    rows = {}
    for flag in ("1", "0"):
        env = dict(os.environ, HYPERKERNEL_NUMBA=flag)
        res = subprocess.run([sys.executable, __file__, "--inner", "--repeat", str(args.repeat)],
                             env=env, capture_output=True, text=True, check=True)
        data = json.loads(res.stdout.strip().splitlines()[-1])
        rows[data["backend"]] = data["times"]
    names = list(next(iter(rows.values())))
    print(f"{'kernel':34s}" + "".join(f"{b:>12s}" for b in rows))
    for n in names:
        print(f"{n:34s}" + "".join(f"{rows[b][n] * 1e3:10.2f}ms" for b in rows))


if __name__ == "__main__":
    main()
