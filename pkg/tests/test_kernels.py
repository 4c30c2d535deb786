import json
import os
import subprocess
import sys

import numpy as np

from hyperkernel import _kernels as K

SCRIPT = r"""
import json, numpy as np
from hyperkernel import _kernels as K
rng = np.random.default_rng(3)
A = rng.integers(0, K.PRIME, size=(30, 12), dtype=np.int64)
A[15:] = (A[:15] * 7) % K.PRIME
pe = np.array([[2, 0], [0, 1], [0, 0]], dtype=np.int64)
pc = np.array([1, 1, 6], dtype=np.int64)
qe = np.array([[1, 0], [0, 0]], dtype=np.int64)
qc = np.array([1, 5], dtype=np.int64)
sh = np.array([(a, b) for a in range(-6, 7) for b in range(-6, 7)], dtype=np.int64)
pt, d = np.array([101, 202], dtype=np.int64), np.array([7, 13], dtype=np.int64)
print(json.dumps({
    "backend": K.backend(),
    "sums": K.hyper_partial_sums([1.0, 0.5], [1.0, 0.0], 0.25, 1.0, 0, 200, 10).tolist(),
    "rows": K.modp_independent_rows(A).tolist(),
    "scan_pp": K.spread_scan(pe, pc, pe, pc, sh, pt, d).tolist(),
    "scan_nq": K.spread_scan(qe, qc, qe, qc, sh, pt, d).tolist(),
}))
"""


def _run(flag):
    env = dict(os.environ, HYPERKERNEL_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_backends_agree():
    fast, slow = _run("1"), _run("0")
    assert slow["backend"] == "numpy"
    assert np.allclose(fast["sums"], slow["sums"], rtol=1e-13)
    for key in ("rows", "scan_pp", "scan_nq"):
        assert fast[key] == slow[key], key
    # n^2+k+6 against itself: only the zero shift; n+5 against itself: every (0, s)
    sh = [(a, b) for a in range(-6, 7) for b in range(-6, 7)]
    assert [s for s, f in zip(sh, fast["scan_pp"]) if f] == [(0, 0)]
    assert [s for s, f in zip(sh, fast["scan_nq"]) if f] == [(0, b) for b in range(-6, 7)]


def test_hyper_partial_sums_exp():
    # t_{n+1}/t_n = x/(n+1): partial sums of exp(x)
    s = K.hyper_partial_sums([1.0], [1.0, 0.0], 0.7, 1.0, 0, 40)
    assert abs(s[-1] - np.exp(0.7)) < 1e-14
    assert len(K.hyper_partial_sums([1.0], [1.0, 0.0], 0.7, 1.0, 0, 40, 10)) == 5


def test_modp_rank():
    A = np.array([[1, 2, 3], [2, 4, 6], [0, 1, 1], [1, 3, 4]], dtype=np.int64)
    assert K.modp_independent_rows(A).tolist() == [0, 2]
    assert K.modp_independent_rows(np.zeros((0, 3))).tolist() == []
