import itertools
import random

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperkernel import catalog
from hyperkernel import expr as ex
from hyperkernel.algebra import Undecidable
from hyperkernel.hypsolve import (HypSystem, IncompatibleSystem, check_compatibility, compute_lambdas, forward_iterate,
                                  solve_first_order_system, to_pochhammer)

n, m, p = sp.symbols("n m p")
a, b, c = sp.symbols("a b c")


def _f1_system():
    al, be, bp, ga = sp.symbols("alpha beta beta1 gam")
    R1 = (al + m + n) * (be + m) / ((m + 1) * (ga + m + n))
    R2 = (al + m + n) * (bp + n) / ((n + 1) * (ga + m + n))
    return HypSystem((m, n), [R1, R2])


def test_compatibility():
    assert check_compatibility(_f1_system()) == (True, None)
    assert check_compatibility(HypSystem((n,), [(a + n) / (n + 1)]))[0]
    sys = _f1_system()
    s2, t2 = sys.pairs()[1]
    bad = HypSystem(sys.vars, [sys.ratios[0], (s2 + 1) / t2])
    ok, wit = check_compatibility(bad)
    assert not ok and wit[:2] == (1, 2) and wit[2] != 0
    with pytest.raises(IncompatibleSystem):
        solve_first_order_system(bad)


def test_lambdas():
    assert compute_lambdas(HypSystem((n,), [(1 + n)**2 / ((n + 1) * (n + 2))])).values == (0,)
    lam = compute_lambdas(HypSystem((n,), [(n + 5) / ((n + 1) * (n - 3))]))
    assert lam.values == (4,) and not lam.heuristic
    # oracle: t vanishes at n = 3 and nowhere above
    t = lambda v: (v + 1) * (v - 3)
    assert t(3) == 0 and all(t(v) != 0 for v in range(4, 6))
    assert compute_lambdas(_f1_system()).values == (0, 0)


def test_lambdas_heuristic_and_undecidable():
    sys = HypSystem((n, m), [(n + m + 1) / ((n + 1) * (n - m + 10)), sp.Integer(1)])
    lam = compute_lambdas(sys, scan_bound=20)
    assert lam.heuristic
    with pytest.raises(Undecidable):
        compute_lambdas(HypSystem((n, m), [(n + 1) / ((n + 1) * (n - m)), sp.Integer(1)]), scan_bound=10)


def test_2f1_general_product():
    A1, B1, C = sp.symbols("A1 B1 C")
    fam = catalog.load_family("2F1")
    sol = solve_first_order_system(HypSystem.from_pldes(fam.recurrences()))
    i = sol.index
    gold = (-C + B1 * (1 - i) + (1 - i) * (2 - i)) / (i * (A1 + i - 1))
    assert sp.cancel(sol.factors[0] - gold) == 0
    # Gauss substitution
    po = to_pochhammer(sol.substitute({C: -a*b, A1: c, B1: -1 - a - b}))
    want = ex.Poch(a, n) * ex.Poch(b, n) / (ex.Poch(c, n) * ex.Fact(n))
    assert ex.equal(po.xreplace({fam.indices[0]: n}), want)


def test_horn2_general_family_is_incompatible():
    fam = catalog.load_family("horn2")
    assert not check_compatibility(HypSystem.from_pldes(fam.recurrences()))[0]


def test_horn2_nesting_structure():
    mm = next(mm for mm in catalog.load_mconditions() if mm.label == "H1")
    fam = catalog.load_family(mm.family)
    sol = solve_first_order_system(HypSystem.from_pldes(fam.recurrences(mm.bindings)))
    v1, v2 = sol.vars
    assert v2 in sol.factors[0].free_symbols
    assert v1 not in sol.factors[1].free_symbols


def test_constant_system():
    sol = solve_first_order_system(HypSystem((n, m), [sp.Integer(1), sp.Integer(1)]))
    assert all(sol.evaluate(pt) == 1 for pt in itertools.product(range(4), repeat=2))
    assert to_pochhammer(sol) == 1


def test_irreducible_quadratic_stays_product():
    sol = solve_first_order_system(HypSystem((n,), [1 - (n + 1) + (n + 1)**2]))
    po = to_pochhammer(sol)
    assert po.has(sp.Product)


def _random_env(sys, rng):
    return {q: sp.Rational(rng.randint(1, 60), rng.randint(7, 13)) for q in sys.params}


SYSTEMS = [(name, None) for name in ("2F1", "3F2")] + [(mm.family, mm) for mm in catalog.load_mconditions()]


@pytest.mark.parametrize("name,mm", SYSTEMS, ids=lambda v: getattr(v, "label", v))
def test_forward_iteration_equivalence(name, mm):
    fam = catalog.load_family(name)
    sys = HypSystem.from_pldes(fam.recurrences(mm.bindings if mm else None))
    sol = solve_first_order_system(sys)
    rng = random.Random(mm.label if mm else name)
    env = _random_env(sys, rng)
    lam = sol.lambdas
    box = itertools.product(*[range(l, l + 5) for l in lam]) if sys.r <= 2 else \
        [tuple(l + rng.randint(0, 4) for l in lam) for _ in range(20)]
    for pt in box:
        assert sol.evaluate(pt, env) == forward_iterate(sys, pt, lam, env)


@pytest.mark.parametrize("mm", catalog.load_mconditions(), ids=lambda mm: mm.label)
def test_pochhammer_matches_product(mm):
    fam = catalog.load_family(mm.family)
    sys = HypSystem.from_pldes(fam.recurrences()).substitute(mm.bindings)
    sol = solve_first_order_system(sys)
    po = to_pochhammer(sol)
    rng = random.Random(mm.label)
    env = _random_env(sys, rng)
    for _ in range(20):
        pt = tuple(l + rng.randint(0, 4) for l in sol.lambdas)
        val = ex.evaluate(po, {**env, **dict(zip(sol.vars, pt))})
        assert val == sol.evaluate(pt, env)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-6, 6), st.booleans()), min_size=1, max_size=4),
       st.integers(1, 5), st.integers(0, 7))
def test_pochhammer_linear_factors(roots, scale, nv):
    # R(n) = scale * prod (n + r)^(+-1): every factor linear, so no products survive
    R = sp.Integer(scale)
    for r, top in roots:
        R *= (n + r + sp.Rational(1, 3)) if top else 1 / (n + r + sp.Rational(1, 2))
    sol = solve_first_order_system(HypSystem((n,), [R]))
    po = to_pochhammer(sol)
    assert not po.has(sp.Product)
    val = ex.evaluate(po, {n: nv + sol.lambdas[0]})
    assert val == sol.evaluate((nv + sol.lambdas[0],))
