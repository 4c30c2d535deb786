import random

import mpmath
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperkernel import expr as ex
from hyperkernel.epsex import (EPS, LaurentSeries, NonRationalMultiplicand, ProductAtom, ZeroMultiplicand,
                               eval_truncated, expand_pochhammer, hurwitz_identity, rewrite_hurwitz,
                               series_for_product)

n, a, i = sp.symbols("n a i")
eps = EPS


def _num(e, env):
    return ex.evaluate(e, env)


def test_pochhammer_r_zero():
    s = expand_pochhammer(a, 0, n, 3)
    assert s.order == 0 and s.coeffs == [1] and s.factor == ex.Poch(a, n)


def test_pochhammer_first_order():
    s = expand_pochhammer(a, 3, n, 1)
    gold = 3 * ex.Poch(a, n) * (n / (a * (a + n)) - ex.S([1], a) + ex.S([1], a + n))
    assert sp.cancel(sp.expand(s.coefficient(1) - gold)) == 0


def test_pochhammer_a1_against_gamma_differences():
    # (1 + r eps)_n = Gamma(1+n+r eps)/Gamma(1+r eps), differentiated by central differences
    r = sp.Rational(2, 3)
    s = expand_pochhammer(1, r, n, 1)
    with mpmath.workdps(50):
        h = mpmath.mpf(10) ** -6
        for nv in range(1, 7):
            f = lambda e: mpmath.gamma(1 + nv + r * e) / mpmath.gamma(1 + r * e)
            d = (f(h) - f(-h)) / (2 * h)
            want = r * sp.factorial(nv) * sp.harmonic(nv)
            assert abs(d - mpmath.mpf(sp.Rational(want).p) / sp.Rational(want).q) < mpmath.mpf(10) ** -9
            got = _num(s.coefficient(1), {n: nv})
            assert got == want


def test_hurwitz_identity():
    b = sp.Symbol("b")
    assert hurwitz_identity(1, a, b) == ex.S([1], a + b) - ex.S([1], a)
    assert hurwitz_identity(2, a, 0) == 0
    v = _num(hurwitz_identity(1, 2, 3), {})
    assert v == sum(sp.Rational(1, 2 + k) for k in range(1, 4))
    assert rewrite_hurwitz(ex.HurwitzS(a, n, 1)) == ex.S([1], a + n) - ex.S([1], a)


def test_eps_free_product():
    s = series_for_product(ProductAtom(i**2 + 1, i, 1, n), 3)
    assert s.order == 0 and s.coeffs == [1]
    assert _num(s.factor, {n: 4}) == 2 * 5 * 10 * 17


def test_errors():
    with pytest.raises(ZeroMultiplicand):
        series_for_product(ProductAtom(sp.Integer(0), i, 1, n), 2)
    with pytest.raises(NonRationalMultiplicand):
        series_for_product(ProductAtom(sp.sqrt(i + eps), i, 1, n), 2)
    with pytest.raises(NonRationalMultiplicand):
        series_for_product(ProductAtom(ex.Fact(i) + eps, i, 1, n), 2)


def test_order_zero_consistency():
    h = (i + 2 * eps) * (i**2 + i + 1 - eps) / (i + 3)
    s = series_for_product(ProductAtom(h, i, 1, n), 2)
    for nv in range(0, 6):
        direct = sp.prod([h.subs({eps: 0, i: k}) for k in range(1, nv + 1)])
        assert _num(s.coefficient(0), {n: nv}) == direct


def test_prefactor_extraction():
    # h(0, i) vanishes at i = 2: the series starts at eps^1
    s = series_for_product(ProductAtom(i - 2 + eps, i, 1, n), 2)
    assert s.order == 1
    with mpmath.workdps(50):
        for nv in (3, 5):
            e = mpmath.mpf(10) ** -8
            exact = mpmath.fprod([k - 2 + e for k in range(1, nv + 1)])
            assert abs(s.evaluate(e, {n: nv}) - exact) < mpmath.mpf(10) ** -20


def test_cauchy_associativity():
    h1 = i + eps
    h2 = i**2 + 1 - i + eps
    K = 2
    joint = series_for_product(ProductAtom(h1 * h2, i, 1, n), K)
    sep = series_for_product(ProductAtom(h1, i, 1, n), K) * series_for_product(ProductAtom(h2, i, 1, n), K)
    for k in range(K + 1):
        for nv in range(0, 5):
            assert _num(joint.coefficient(k), {n: nv}) == _num(sep.coefficient(k), {n: nv})


def test_inverse_series():
    s = LaurentSeries(1, [2, 3, 5], 3)
    t = s * s.inverse()
    assert t.order == 0 and t.coeffs[0] == 1 and all(c == 0 for c in t.coeffs[1:])


def test_eval_truncated_basics():
    k = sp.Symbol("k")
    assert eval_truncated(sp.Integer(0)).value == 0
    v = eval_truncated(sp.Sum(1 / k**2, (k, 1, sp.oo)), N=2000, digits=30, extrapolate=3).value
    assert abs(v - mpmath.pi**2 / 6) < 1e-12


def _next_order(h, inverse, trunc, nv):
    """First exponent above trunc whose coefficient is nonzero at n = nv."""
    deep = series_for_product(ProductAtom(h, i, 1, n, inverse=inverse), trunc + 3)
    for k in range(trunc + 1, trunc + 4):
        if _num(deep.coefficient(k), {n: nv}) != 0:
            return k
    return trunc + 4


@settings(max_examples=25, deadline=None, derandomize=True)
@given(st.integers(0, 4), st.integers(3, 12), st.sampled_from([1, 2]))
def test_numeric_order(which, nv, K):
    from strategies import MULTIPLICANDS
    h, inverse = MULTIPLICANDS[which]
    s = series_for_product(ProductAtom(h, i, 1, n, inverse=inverse), K)
    top = _next_order(h, inverse, s.truncation, nv)
    errs = []
    with mpmath.workdps(60):
        for e in (mpmath.mpf(10) ** -3, mpmath.mpf(10) ** -4):
            exact = mpmath.fprod([ex.evaluate(h, {i: j, eps: e}, digits=60) for j in range(1, nv + 1)])
            if inverse:
                exact = 1 / exact
            errs.append(abs(exact - s.evaluate(e, {n: nv}, digits=60)))
    if errs[1] < mpmath.mpf(10) ** -45:
        return
    ratio = errs[0] / errs[1]
    assert 10 ** top / 3 <= ratio <= 3 * 10 ** top
