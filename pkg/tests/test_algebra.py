from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperkernel.algebra import (NoSolution, Undecidable, factor_lin_quad, gcd, integer_roots, leading_coeff,
                                 normalize, ratfun, shift, solve_linear, solve_linear_qq)

n, k, x, i = sp.symbols("n k x i")
B1, C, eps = sp.symbols("B1 C eps")


def test_gcd_examples():
    assert gcd(n**2 - 1, n - 1) == n - 1
    assert gcd(n + k + 2, n + k + 3) == 1
    assert gcd(0, -2*n - 4) == n + 2
    assert gcd(6*n + 6, 0) == n + 1


small_poly = st.lists(st.integers(-4, 4), min_size=1, max_size=4).map(
    lambda cs: sp.sympify(sum(c * m for c, m in zip(cs, [1, n, k, n*k]))))


@settings(max_examples=60, deadline=None)
@given(small_poly, small_poly, small_poly)
def test_gcd_common_factor(p, q, w):
    if p == 0 or q == 0 or w == 0:
        return
    g = gcd(p * w, q * w, gens=[n, k])
    # trial division: g divides both inputs, and w divides g
    for e in (p * w, q * w):
        assert sp.fraction(sp.cancel(e / g))[1].free_symbols == set()
    if w.free_symbols:
        assert sp.fraction(sp.cancel(g / w))[1].free_symbols == set()
    assert leading_coeff(g, [n, k]) > 0


def test_shift_examples():
    assert shift(n + k + 2, (1, 0), (n, k)) == n + k + 3
    assert shift(n**2 + k + 6, (1, 2), (n, k)) == sp.expand(n**2 + 2*n + k + 9)
    assert shift(n**2 + k, (0, 0), (n, k)) == n**2 + k


@given(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), st.tuples(st.integers(-5, 5), st.integers(-5, 5)))
def test_shift_composes(s, t):
    p = n**2 * k - 3*k + n + 7
    st_ = (s[0] + t[0], s[1] + t[1])
    assert shift(shift(p, s, (n, k)), t, (n, k)) == shift(p, st_, (n, k))


def test_integer_roots():
    assert integer_roots(n**2 - 3*n + 2, n) == {1, 2}
    assert integer_roots((2*n - 1) * (n + 4), n) == {-4}
    with pytest.raises(Undecidable):
        integer_roots(n**2 + k + 6, n)
    with pytest.raises(Undecidable):
        integer_roots(2 - eps + B1 - C - 3*i - B1*i + i**2, i)
    # declared parameters are generic: no integer roots
    assert integer_roots(2 - eps + B1 - C - 3*i - B1*i + i**2, i, params=(eps, B1, C)) == set()
    # linear in the variable: parametric root reported
    assert integer_roots(n + k + 2, n) == {-k - 2}


def test_factor_lin_quad():
    lq = factor_lin_quad(sp.expand(x * (x + 1) * (x + 2)), x)
    assert {f for f, _ in lq.linear} == {x, x + 1, x + 2}
    assert lq.residual == 1
    lq = factor_lin_quad(1 - i + i**2, i)
    assert lq.linear == [] and sp.expand(lq.residual - (1 - i + i**2)) == 0
    lq = factor_lin_quad(x - sp.Rational(2, 3), x)
    assert lq.unit == 1 and lq.linear == [(x - sp.Rational(2, 3), 1)]
    lq = factor_lin_quad(sp.Rational(1, 3) * x**2 + x, x)
    assert lq.unit == sp.Rational(1, 3)
    lq = factor_lin_quad(sp.Integer(7), x)
    assert lq.unit == 7 and lq.residual == 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(1, 3)), min_size=1, max_size=3),
       st.integers(-5, 5).filter(bool))
def test_factor_lin_quad_recombines(roots, unit):
    p = unit * sp.Mul(*[(2*x - r) ** m for r, m in roots]) * (x**2 + x + 1)
    lq = factor_lin_quad(sp.expand(p), x)
    assert sp.expand(lq.recombine() - p) == 0
    for f, _ in lq.linear:
        assert sp.Poly(f, x).LC() == 1


def test_ratfun_normalized_and_idempotent():
    num, den = ratfun((n**2 - 1), -(n - 1) * (k + 2))
    assert sp.expand(num + (n + 1)) == 0 and sp.expand(den - (k + 2)) == 0
    assert ratfun(num, den) == (num, den)


def test_solve_linear_examples():
    sol = solve_linear([[1, 0], [0, 1]], [3, n])
    assert sol.particular == [3, n] and sol.nullspace == []
    sol = solve_linear([[1, 1]], [0])
    assert len(sol.nullspace) == 1
    v = sol.nullspace[0]
    assert v[0] + v[1] == 0 and v != [0, 0]
    with pytest.raises(NoSolution):
        solve_linear([[1, 1], [2, 2]], [1, 3])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-9, 9), min_size=16, max_size=16), st.lists(st.integers(-9, 9), min_size=4, max_size=4))
def test_solve_linear_cramer(entries, b):
    A = [entries[4*r:4*r + 4] for r in range(4)]
    M = sp.Matrix(A)
    det = M.det()
    if det == 0:
        return
    sol = solve_linear(A, b)
    for j in range(4):
        Mj = M.copy()
        Mj[:, j] = sp.Matrix(b)
        assert sol.particular[j] == Mj.det() / det
    fast = solve_linear_qq(A, b)
    assert [Fraction(int(sp.Rational(v).p), int(sp.Rational(v).q)) for v in sol.particular] == fast.particular


def test_solve_linear_over_parameters():
    a = sp.Symbol("a")
    sol = solve_linear([[a, 1], [1, a]], [1, 0])
    x0, x1 = sol.particular
    assert sp.cancel(a*x0 + x1 - 1) == 0 and sp.cancel(x0 + a*x1) == 0


def test_normalize_sign():
    assert normalize(-n**2 + k) == n**2 - k
    assert normalize(sp.Integer(0)) == 0
