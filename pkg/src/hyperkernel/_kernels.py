"""Numeric inner loops.

Three kernels are provided, each with a numba-compiled and a numpy/pure
Python implementation:

``hyper_partial_sums``
    float64 partial sums of a hypergeometric series given its term ratio.
``modp_independent_rows``
    greedy row selection by Gaussian elimination modulo a word-sized prime.
``spread_scan``
    modular prefilter for the shift window scan used by the spread.

Set ``HYPERKERNEL_NUMBA=0`` to force the fallback.  The fallback is also used
when numba cannot be imported.
"""

from __future__ import annotations

import os

import numpy as np

PRIME = 2147483629  # largest prime below 2**31

_WANT = os.environ.get("HYPERKERNEL_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    if not _WANT:
        raise ImportError
    from numba import njit as _njit

    USING_NUMBA = True
except ImportError:  # pragma: no cover - depends on the environment
    USING_NUMBA = False


def backend() -> str:
    return "numba" if USING_NUMBA else "numpy"


# --------------------------------------------------------------------------
# term-ratio partial sums


def _horner(c, x):
    out = 0.0
    for k in range(c.shape[0]):
        out = out * x + c[k]
    return out


def _hyper_sums_loop(num, den, x, t0, n0, N, stride):
    m = (N - n0) // stride + 1
    out = np.empty(m)
    t = t0
    s = t0
    j = 0
    if stride == 1 or 0 % stride == 0:
        out[0] = s
        j = 1
    n = n0
    while n < N:
        t = t * x * _horner(num, float(n)) / _horner(den, float(n + 1))
        s += t
        n += 1
        if (n - n0) % stride == 0 and j < m:
            out[j] = s
            j += 1
    return out


def _hyper_sums_numpy(num, den, x, t0, n0, N, stride):
    ns = np.arange(n0, N, dtype=np.float64)
    ratios = x * np.polyval(num, ns) / np.polyval(den, ns + 1.0)
    terms = np.empty(N - n0 + 1)
    terms[0] = t0
    terms[1:] = t0 * np.cumprod(ratios)
    sums = np.cumsum(terms)
    return sums[::stride].copy()


def hyper_partial_sums(num, den, x, t0, n0, N, stride=1):
    """Partial sums ``sum_{n0<=n<=M} t_n`` for ``M = n0, n0+stride, ...``.

    ``t_{n+1} / t_n = x * num(n) / den(n+1)`` with ``num`` and ``den`` given
    as float coefficient arrays, highest degree first (``numpy.polyval``
    order).  ``t_{n0} = t0``.
    """
    num = np.ascontiguousarray(num, dtype=np.float64)
    den = np.ascontiguousarray(den, dtype=np.float64)
    if N < n0:
        raise ValueError("N must be at least n0")
    if stride < 1:
        raise ValueError("stride must be positive")
    if USING_NUMBA:
        return _hyper_sums_jit(num, den, float(x), float(t0), int(n0), int(N), int(stride))
    return _hyper_sums_numpy(num, den, float(x), float(t0), int(n0), int(N), int(stride))


# --------------------------------------------------------------------------
# modular row selection


def _modp_rows_loop(A, p):
    rows, cols = A.shape
    basis = np.zeros((cols, cols), dtype=np.int64)
    pivot_used = np.zeros(cols, dtype=np.bool_)
    chosen = np.empty(rows, dtype=np.int64)
    nchosen = 0
    for r in range(rows):
        v = A[r].copy() % p
        for c in range(cols):
            if v[c] != 0 and pivot_used[c]:
                f = v[c]
                for k in range(cols):
                    v[k] = (v[k] - f * basis[c, k]) % p
        lead = -1
        for c in range(cols):
            if v[c] != 0:
                lead = c
                break
        if lead < 0:
            continue
        inv = 1
        b = v[lead]
        e = p - 2
        while e > 0:
            if e & 1:
                inv = (inv * b) % p
            b = (b * b) % p
            e >>= 1
        for k in range(cols):
            v[k] = (v[k] * inv) % p
        # keep the stored basis fully reduced against the new pivot
        for c in range(cols):
            if pivot_used[c] and basis[c, lead] != 0:
                f = basis[c, lead]
                for k in range(cols):
                    basis[c, k] = (basis[c, k] - f * v[k]) % p
        for k in range(cols):
            basis[lead, k] = v[k]
        pivot_used[lead] = True
        chosen[nchosen] = r
        nchosen += 1
        if nchosen == cols:
            break
    return chosen[:nchosen]


def _modp_rows_numpy(A, p):
    A = A % p
    rows, cols = A.shape
    basis = {}
    chosen = []
    for r in range(rows):
        v = A[r].copy()
        for c, bv in basis.items():
            if v[c]:
                v = (v - v[c] * bv) % p
        nz = np.nonzero(v)[0]
        if nz.size == 0:
            continue
        lead = int(nz[0])
        v = (v * pow(int(v[lead]), p - 2, p)) % p
        for c in list(basis):
            if basis[c][lead]:
                basis[c] = (basis[c] - basis[c][lead] * v) % p
        basis[lead] = v
        chosen.append(r)
        if len(chosen) == cols:
            break
    return np.array(chosen, dtype=np.int64)


def modp_independent_rows(A, p=PRIME):
    """Indices of a maximal set of rows of ``A`` independent modulo ``p``.

    Rows are taken greedily in order.  Entries must already be reduced to
    ``[0, p)``; ``p`` must be below ``2**31`` so products fit in int64.
    """
    A = np.ascontiguousarray(A, dtype=np.int64)
    if A.ndim != 2:
        raise ValueError("expected a matrix")
    if A.shape[0] == 0 or A.shape[1] == 0:
        return np.zeros(0, dtype=np.int64)
    if USING_NUMBA:
        return _modp_rows_jit(A, np.int64(p))
    return _modp_rows_numpy(A, int(p))


# --------------------------------------------------------------------------
# spread prefilter


def _polmul_lin(f, deg, a, d, p):
    # f <- f * (a + d*tau), f has degree ``deg``
    out = np.zeros(f.shape[0], dtype=np.int64)
    for k in range(deg + 1):
        out[k] = (out[k] + f[k] * a) % p
        out[k + 1] = (out[k + 1] + f[k] * d) % p
    return out


def _restrict(exps, coeffs, point, direction, p, size):
    # univariate image of a multivariate polynomial along point + tau*direction
    res = np.zeros(size, dtype=np.int64)
    for t in range(exps.shape[0]):
        f = np.zeros(size, dtype=np.int64)
        f[0] = coeffs[t] % p
        deg = 0
        for j in range(exps.shape[1]):
            for _ in range(exps[t, j]):
                f = _polmul_lin(f, deg, point[j] % p, direction[j] % p, p)
                deg += 1
        for k in range(size):
            res[k] = (res[k] + f[k]) % p
    return res


def _degree(f):
    for k in range(f.shape[0] - 1, -1, -1):
        if f[k] != 0:
            return k
    return -1


def _powmod(b, e, p):
    out = 1
    b = b % p
    while e > 0:
        if e & 1:
            out = (out * b) % p
        b = (b * b) % p
        e >>= 1
    return out


def _gcd_degree(f, g, p):
    a = f.copy()
    b = g.copy()
    while True:
        db = _degree(b)
        if db < 0:
            return _degree(a)
        da = _degree(a)
        inv = _powmod(b[db], p - 2, p)
        while da >= db:
            c = (a[da] * inv) % p
            for k in range(db + 1):
                a[da - db + k] = (a[da - db + k] - c * b[k]) % p
            da = _degree(a)
        a, b = b, a


def _spread_scan_loop(pe, pc, qe, qc, shifts, point, direction, p):
    size = max(int(pe.sum(axis=1).max()), int(qe.sum(axis=1).max())) + 2
    fp = _restrict(pe, pc, point, direction, p, size)
    out = np.zeros(shifts.shape[0], dtype=np.bool_)
    for s in range(shifts.shape[0]):
        off = point + shifts[s]
        fq = _restrict(qe, qc, off, direction, p, size)
        out[s] = _gcd_degree(fp, fq, p) > 0
    return out


def spread_scan(p_exps, p_coeffs, q_exps, q_coeffs, shifts, point, direction, prime=PRIME):
    """Flag shifts ``s`` for which ``p`` and ``q(. + s)`` may share a factor.

    Both polynomials are restricted to the random line ``point + tau *
    direction`` and a gcd is taken modulo ``prime``.  A common factor
    survives restriction for generic lines, so unflagged shifts are
    (with high probability) coprime and flagged ones need an exact check.
    """
    args = [np.ascontiguousarray(a, dtype=np.int64) for a in (p_exps, p_coeffs, q_exps, q_coeffs, shifts, point, direction)]
    args[1] %= prime
    args[3] %= prime
    if args[4].shape[0] == 0:
        return np.zeros(0, dtype=np.bool_)
    if USING_NUMBA:
        return _spread_scan_jit(*args, np.int64(prime))
    return _spread_scan_loop(*args, int(prime))


if USING_NUMBA:
    _horner = _njit(cache=True)(_horner)
    _hyper_sums_jit = _njit(cache=True)(_hyper_sums_loop)
    _modp_rows_jit = _njit(cache=True)(_modp_rows_loop)
    _polmul_lin = _njit(cache=True)(_polmul_lin)
    _restrict = _njit(cache=True)(_restrict)
    _degree = _njit(cache=True)(_degree)
    _powmod = _njit(cache=True)(_powmod)
    _gcd_degree = _njit(cache=True)(_gcd_degree)
    _spread_scan_jit = _njit(cache=True)(_spread_scan_loop)
