import random

import mpmath
import pytest
import sympy as sp
from hypothesis import HealthCheck, given, settings

from hyperkernel import expr as ex
from strategies import expressions

n, k, a, b, c, x, y, i = sp.symbols("n k a b c x y i")


def test_parse_examples():
    e = ex.parse("poch(a,n)*poch(b,n)/(poch(c,n)*fact(n))")
    assert e == ex.Poch(a, n) * ex.Poch(b, n) / (ex.Poch(c, n) * ex.Fact(n))
    assert ex.parse("S(1;n)") == ex.HarmonicS(n, 1)
    p = ex.parse("prod((2+B-C-(3+B)*i+i^2), i, 1, n)")
    assert isinstance(p, sp.Product)
    assert ex.parse("HS(2,1;a;n)") == ex.HS([2, 1], a, n)
    assert ex.parse("gamma(1/2 + x)") == ex.Gamma(sp.Rational(1, 2) + x)


def test_print_examples():
    assert ex.to_text(ex.Poch(a, n)) == "poch(a,n)"
    assert ex.to_text(x + 2*y) == "x + 2*y"
    assert ex.to_text(ex.S([2, 1], n)) == "S(2,1;n)"


def test_parse_error_location():
    with pytest.raises(ex.ParseError) as err:
        ex.parse("poch(a,\n n))")
    assert err.value.line == 2
    assert err.value.col >= 1
    with pytest.raises(ex.ParseError) as err:
        ex.parse("1 + * 2")
    assert err.value.expected


def test_whitespace_insensitive():
    assert ex.parse(" poch( a , n ) *S( 1 ; n ) ") == ex.parse("poch(a,n)*S(1;n)")


@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(expressions)
def test_roundtrip(e):
    text = ex.to_text(e)
    back = ex.parse(text)
    assert ex.equal(back, e), text
    assert ex.to_text(back) == text


@settings(max_examples=200, deadline=None)
@given(expressions)
def test_canonical_idempotent(e):
    once = ex.canonical(e)
    assert ex.canonical(once) == once


def test_alpha_equivalence():
    j = sp.Symbol("j")
    assert ex.equal(sp.Product(i + a, (i, 1, n)), sp.Product(j + a, (j, 1, n)))
    assert ex.equal(sp.Sum(1 / i, (i, 1, n)), sp.Sum(1 / k, (k, 1, n)))


def test_substitute_gauss():
    A1, B1, C = sp.symbols("A1 B1 C")
    gen = ex.parse("prod(2+B1-C-3*i-B1*i+i^2,i,1,n)/(fact(n)*poch(A1,n))")
    sub = ex.substitute(gen, {C: -a*b, A1: c, B1: -1 - a - b})
    gold = ex.Poch(a, n) * ex.Poch(b, n) / (ex.Poch(c, n) * ex.Fact(n))
    for nv in range(0, 6):
        env = {a: sp.Rational(3, 7), b: sp.Rational(-5, 3), c: sp.Rational(11, 4), n: nv}
        assert ex.evaluate(sub, env) == ex.evaluate(gold, env)
    assert ex.substitute(gen, {}) == gen


def test_substitute_capture():
    e = ex.parse("sum(x*i, i, 1, n)")
    with pytest.raises(ex.CaptureError):
        ex.substitute(e, {x: i + 1})


def test_substitute_commutes_with_evaluation():
    rng = random.Random(3)
    e = ex.parse("poch(a,n)*S(1;n)/fact(n) + sum(a^i/i, i, 1, n)")
    for _ in range(10):
        av = sp.Rational(rng.randint(1, 30), rng.randint(1, 9))
        nv = rng.randint(0, 8)
        lhs = ex.evaluate(ex.substitute(e, {a: av}), {n: nv})
        rhs = ex.evaluate(e, {a: av, n: nv})
        assert lhs == rhs


def test_evaluate_exact_and_float():
    e = ex.parse("S(1;n) + poch(1/2,n)")
    v = ex.evaluate(e, {n: 3})
    assert v == sp.Rational(11, 6) + sp.Rational(1, 2) * sp.Rational(3, 2) * sp.Rational(5, 2)
    f = ex.evaluate(ex.parse("gamma(x)"), {x: 0.5}, digits=30)
    with mpmath.workdps(40):
        assert abs(f - mpmath.sqrt(mpmath.pi)) < mpmath.mpf(10) ** -25


def test_harmonic_word_validation():
    with pytest.raises(ValueError):
        ex.HarmonicS(n, 0)
