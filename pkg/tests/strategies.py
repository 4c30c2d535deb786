"""Hypothesis strategies shared by the property tests."""

import random

import sympy as sp
from hypothesis import strategies as st

from hyperkernel import expr as ex
from hyperkernel.taylor import PLDE

n, k, x, a, b = sp.symbols("n k x a b")
i = sp.Symbol("i")

leaves = st.one_of(
    st.sampled_from([n, k, x, a, b]),
    st.integers(-20, 20).map(sp.Integer),
    st.tuples(st.integers(-9, 9), st.integers(1, 9)).map(lambda t: sp.Rational(*t)),
)


def _node(children):
    small = st.integers(-3, 4)
    word = st.lists(st.integers(1, 3), min_size=1, max_size=3)
    return st.one_of(
        st.tuples(children, children).map(lambda t: t[0] + t[1]),
        st.tuples(children, children).map(lambda t: t[0] * t[1]),
        st.tuples(children, children).map(lambda t: t[0] - t[1]),
        st.tuples(children, small).map(lambda t: t[0] ** t[1] if t[0] != 0 or t[1] > 0 else t[0]),
        st.tuples(children, st.sampled_from([n, k, n + 1, n + k])).map(lambda t: ex.Poch(t[0], t[1])),
        st.sampled_from([n, k, n + 2]).map(ex.Fact),
        children.filter(lambda e: bool(e.free_symbols)).map(ex.Gamma),
        st.tuples(word, st.sampled_from([n, k, n + 1])).map(lambda t: ex.S(t[0], t[1])),
        st.tuples(word, st.sampled_from([a, sp.Rational(1, 2)]), st.sampled_from([n, k]))
          .map(lambda t: ex.HS(t[0], t[1], t[2])),
        st.tuples(children, st.sampled_from([0, 1]), st.sampled_from([n, k]))
          .map(lambda t: sp.Sum(t[0] * i, (i, t[1], t[2]))),
        st.tuples(children, st.sampled_from([n, k]))
          .map(lambda t: sp.Product(t[0] + i, (i, 1, t[1]))),
    )


expressions = st.recursive(leaves, _node, max_leaves=8)


# --------------------------------------------------------------------------
# planted PLDE instances


def _shift(e, s, vars):
    return e.xreplace({v: v + d for v, d in zip(vars, s) if d})


def planted_instance(seed):
    """Inhomogeneous PLDE in (n, k) with the known solution y = p/q.

    Returns (eq, y, q).  The coefficients are r_s * lcm_s q(n+s) with random
    linear r_s, so the right-hand side is a polynomial.
    """
    rng = random.Random(seed)
    V = (n, k)
    shifts = [(0, 0)] + rng.sample([(1, 0), (0, 1), (1, 1), (2, 0), (0, 2)], rng.randint(1, 2))
    q = rng.choice([sp.Integer(1), n**2 + k + rng.randint(1, 5), k**2 + n + rng.randint(1, 5),
                    n**2 + k**2 + rng.randint(1, 3)])
    p = sp.Integer(0)
    while p == 0:
        p = sum(rng.randint(-3, 3) * m for m in (1, n, k))
    L = sp.lcm_list([_shift(q, s, V) for s in shifts])
    terms, rhs = {}, sp.Integer(0)
    for s in shifts:
        r = sp.Integer(0)
        while r == 0:
            r = sum(rng.randint(-3, 3) * m for m in (1, n, k))
        terms[s] = sp.expand(r * L)
        rhs += sp.cancel(r * L / _shift(q, s, V)) * _shift(p, s, V)
    return PLDE(V, terms, sp.expand(rhs), "y"), p / q, q


# --------------------------------------------------------------------------
# eps-product multiplicands for the numeric order check

eps = sp.Symbol("eps")
MULTIPLICANDS = [
    (i - 2 + eps, True),
    (2*eps + 2*i + eps*i + 3*i**2 + 6*eps*i**2 + i**3 + eps*i**3, False),
    ((i + eps) / (i**2 + 1 - eps), True),
    (i**2 + 1 - i + eps, False),
    ((i + 2*eps) * (i + 3 - eps) / (i + 1), False),
]
