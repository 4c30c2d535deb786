"""Exact arithmetic kernel.

Polynomials and rational functions are sympy objects over QQ extended by
named parameters.  This module adds the few operations the rest of the
package needs on top of them: normalized gcd, shifts, integer roots,
linear/quadratic factor extraction and linear solving over Q(params).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import sympy as sp
from sympy.polys.matrices import DomainMatrix


class Undecidable(Exception):
    """Raised when integer roots cannot be decided symbolically."""


class NoSolution(Exception):
    """Raised by solve_linear for an inconsistent system."""


SHIFT, SERIES, PARAM = "shift-variable", "series-variable", "parameter"


@dataclass(frozen=True)
class Symbol:
    name: str
    kind: str = PARAM

    def __post_init__(self):
        if self.kind not in (SHIFT, SERIES, PARAM):
            raise ValueError(f"unknown symbol kind {self.kind!r}")

    @property
    def sym(self) -> sp.Symbol:
        return sp.Symbol(self.name)


def rational(num, den=1) -> sp.Rational:
    return sp.Rational(num, den)


def _gens(*exprs, order: Sequence[sp.Symbol] | None = None):
    free = set()
    for e in exprs:
        free |= sp.sympify(e).free_symbols
    if order:
        head = [g for g in order if g in free]
        rest = sorted(free - set(head), key=lambda s: s.name)
        return head + rest
    return sorted(free, key=lambda s: s.name)


def poly(e, gens: Sequence[sp.Symbol] | None = None) -> sp.Poly:
    """Poly in graded-lex order over the given (or sorted free) symbols."""
    e = sp.sympify(e)
    gens = _gens(e, order=gens)
    if not gens:
        return sp.Poly(e, sp.Dummy("z"), domain="QQ")
    return sp.Poly(e, *gens, domain="QQ")


def leading_coeff(e, gens=None):
    p = poly(e, gens)
    if p.is_zero:
        return sp.Integer(0)
    return p.terms(order="grlex")[0][1]


def normalize(e, gens=None):
    """Make the graded-lex leading coefficient positive."""
    e = sp.expand(e)
    if e == 0:
        return e
    return -e if leading_coeff(e, gens) < 0 else e


def gcd(p, q, gens=None):
    """Primitive polynomial gcd with positive leading coefficient.

    gcd(0, q) is q made primitive and normalized.
    """
    p, q = sp.expand(p), sp.expand(q)
    g = q if p == 0 else p if q == 0 else sp.gcd(p, q)
    if g == 0:
        return g
    if not g.free_symbols:
        return sp.Integer(1)
    _, prim = sp.Poly(g, *_gens(g)).primitive()
    return normalize(prim.as_expr(), gens)


def shift(p, s, shift_vars):
    """N_s p: substitute v_i -> v_i + s_i and expand."""
    sub = {v: v + int(si) for v, si in zip(shift_vars, s) if si}
    if not sub:
        return sp.expand(p)
    return sp.expand(sp.sympify(p).xreplace(sub))


def ratfun(num, den=1):
    """Reduced fraction num/den with normalized denominator."""
    e = sp.cancel(sp.sympify(num) / sp.sympify(den))
    n, d = sp.fraction(e)
    n, d = sp.expand(n), sp.expand(d)
    if d != 0 and d.free_symbols and leading_coeff(d) < 0:
        n, d = -n, -d
    return n, d


def integer_roots(p, v, params: Iterable[sp.Symbol] = ()):
    """Integer roots of p in v.

    Symbols in ``params`` are generic parameters: a root depending on them is
    not an integer identically and is skipped.  Any other symbol counts as a
    shift variable; linear factors in v then give parametric roots and
    anything else raises Undecidable.
    """
    p = sp.expand(p)
    if p == 0:
        raise ValueError("zero polynomial has every root")
    params = set(params)
    found = set()
    _, facs = sp.factor_list(p)
    for f, _m in facs:
        if v not in f.free_symbols:
            continue
        deg = sp.degree(f, v)
        shift_here = f.free_symbols - {v} - params
        if deg == 1:
            a, b = sp.Poly(f, v).all_coeffs()
            root = sp.cancel(-b / a)
            if root.free_symbols & params:
                continue
            if root.free_symbols:
                found.add(root)
            elif root.is_integer:
                found.add(int(root))
        elif shift_here:
            raise Undecidable(f"factor {f} is nonlinear in {v} with shift variables {sorted(map(str, shift_here))}")
        # nonlinear factors irreducible over Q(params) have no rational roots
    return found


@dataclass
class LinQuad:
    unit: sp.Expr
    linear: list = field(default_factory=list)      # (monic factor, multiplicity)
    quadratic: list = field(default_factory=list)   # (monic factor, multiplicity)
    residual: sp.Expr = sp.Integer(1)

    def recombine(self):
        out = self.unit * self.residual
        for f, m in self.linear + self.quadratic:
            out *= f**m
        return sp.expand(out)


def factor_lin_quad(p, v) -> LinQuad:
    """Split p into linear and quadratic factors in v over Q(params).

    Factors are monic in v; the leading coefficients go into the unit.  Since
    sympy factors completely over Q, any quadratic left over has no root in
    the parameter field and is returned in the residual.
    """
    p = sp.expand(p)
    if p == 0:
        raise ValueError("factor_lin_quad of zero")
    c, facs = sp.factor_list(p)
    out = LinQuad(unit=sp.sympify(c))
    residual = sp.Integer(1)
    for f, m in facs:
        d = sp.degree(f, v) if v in f.free_symbols else 0
        if d == 0:
            out.unit *= f**m
            continue
        lc = sp.Poly(f, v).LC()
        mon = sp.expand(sp.cancel(f / lc))
        if d == 1:
            out.unit *= lc**m
            out.linear.append((mon, m))
        else:
            residual *= f**m
    out.residual = residual
    return out


@dataclass
class LinearSolution:
    particular: list
    nullspace: list


def _domain_for(entries):
    syms = set()
    for e in entries:
        syms |= sp.sympify(e).free_symbols
    if not syms:
        return sp.QQ
    return sp.QQ.frac_field(*sorted(syms, key=lambda s: s.name))


def solve_linear(A, b=None, check=True) -> LinearSolution:
    """Solve A x = b exactly over Q(params); returns particular + nullspace."""
    A = [[sp.sympify(x) for x in row] for row in A]
    m = len(A)
    ncols = len(A[0]) if m else 0
    b = [sp.Integer(0)] * m if b is None else [sp.sympify(x) for x in b]
    if len(b) != m:
        raise ValueError("dimension mismatch")
    flat = [x for row in A for x in row] + b
    dom = _domain_for(flat)
    aug = DomainMatrix([[dom.from_sympy(x) for x in row] + [dom.from_sympy(bi)] for row, bi in zip(A, b)],
                       (m, ncols + 1), dom) if m else None
    if m == 0:
        basis = [[sp.Integer(int(i == j)) for i in range(ncols)] for j in range(ncols)]
        return LinearSolution([sp.Integer(0)] * ncols, basis)
    red, pivots = aug.rref()
    rows = red.to_Matrix()
    if ncols in pivots:
        raise NoSolution("inconsistent linear system")
    part = [sp.Integer(0)] * ncols
    for r, c in enumerate(pivots):
        part[c] = rows[r, ncols]
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fcol in free:
        vec = [sp.Integer(0)] * ncols
        vec[fcol] = sp.Integer(1)
        for r, c in enumerate(pivots):
            vec[c] = -rows[r, fcol]
        basis.append(vec)
    sol = LinearSolution(part, basis)
    if check:
        _verify(A, b, sol)
    return sol


def _verify(A, b, sol):
    for row, bi in zip(A, b):
        lhs = sum((a * x for a, x in zip(row, sol.particular)), sp.Integer(0))
        if sp.cancel(lhs - bi) != 0:
            raise AssertionError("solve_linear: particular solution fails")
        for vec in sol.nullspace:
            if sp.cancel(sum((a * x for a, x in zip(row, vec)), sp.Integer(0))) != 0:
                raise AssertionError("solve_linear: nullspace vector fails")


def solve_linear_qq(A, b=None):
    """Fast path for purely rational matrices given as Fractions or ints."""
    m = len(A)
    ncols = len(A[0]) if m else 0
    b = [0] * m if b is None else b
    aug = DomainMatrix([[sp.QQ(Fraction(x).numerator, Fraction(x).denominator) for x in row]
                        + [sp.QQ(Fraction(bi).numerator, Fraction(bi).denominator)]
                        for row, bi in zip(A, b)], (m, ncols + 1), sp.QQ)
    red, pivots = aug.rref()
    rows = red.to_list()
    if ncols in pivots:
        raise NoSolution("inconsistent linear system")
    conv = lambda q: Fraction(int(q.numerator), int(q.denominator))
    part = [Fraction(0)] * ncols
    for r, c in enumerate(pivots):
        part[c] = conv(rows[r][ncols])
    basis = []
    for fcol in (c for c in range(ncols) if c not in pivots):
        vec = [Fraction(0)] * ncols
        vec[fcol] = Fraction(1)
        for r, c in enumerate(pivots):
            vec[c] = -conv(rows[r][fcol])
        basis.append(vec)
    return LinearSolution(part, basis)
