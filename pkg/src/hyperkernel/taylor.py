"""Differential operators and the DE <-> RE conversion.

A DiffOperator is a finite map  multi-index d -> coefficient c(x, params),
standing for sum_d c * d^d/dx^d.  find_re inserts the formal Taylor series
f = sum_n f[n] x^n and compares coefficients; find_de goes back from a
hypergeometric ratio system to theta-form operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as iproduct

import sympy as sp
from sympy.core.function import AppliedUndef
from sympy.functions.combinatorial.numbers import stirling

from . import expr as ex
from .algebra import normalize


class NonPolynomialCoefficient(ValueError):
    pass


def _ff(x, k):
    """Falling factorial x (x-1) ... (x-k+1)."""
    out = sp.Integer(1)
    for j in range(k):
        out *= x - j
    return out


@dataclass
class DiffOperator:
    vars: tuple
    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vars = tuple(self.vars)
        clean = {}
        for d, c in self.terms.items():
            c = sp.expand(c)
            if c != 0:
                clean[tuple(d)] = clean.get(tuple(d), 0) + c
        self.terms = {d: c for d, c in clean.items() if sp.expand(c) != 0}

    # construction --------------------------------------------------------

    @classmethod
    def one(cls, vars):
        return cls(vars, {(0,) * len(vars): sp.Integer(1)})

    @classmethod
    def scalar(cls, vars, c):
        return cls(vars, {(0,) * len(vars): sp.sympify(c)})

    @classmethod
    def d(cls, vars, i, k=1):
        idx = [0] * len(vars)
        idx[i] = k
        return cls(vars, {tuple(idx): sp.Integer(1)})

    @classmethod
    def theta(cls, vars, i, k=1):
        """theta_i^k = sum_j S2(k, j) x_i^j d_i^j."""
        x = vars[i]
        terms = {}
        for j in range(0, k + 1):
            s = stirling(k, j, kind=2)
            if s:
                idx = [0] * len(vars)
                idx[i] = j
                terms[tuple(idx)] = s * x**j
        return cls(vars, terms)

    @classmethod
    def from_theta_poly(cls, poly, thetas, vars):
        """Operator for a commutative polynomial in theta_1..theta_r."""
        poly = sp.Poly(sp.expand(poly), *thetas)
        out = cls(vars)
        for mon, c in poly.terms():
            term = cls.scalar(vars, c)
            for i, k in enumerate(mon):
                if k:
                    term = term * cls.theta(vars, i, k)
            out = out + term
        return out

    @classmethod
    def from_expr(cls, e, func, vars):
        """Read an operator from an expression linear in func(*vars) and its derivatives."""
        vars = tuple(vars)
        e = sp.expand(e)
        atoms = {}
        for node in sp.preorder_traversal(e):
            if isinstance(node, sp.Derivative) and isinstance(node.expr, AppliedUndef):
                idx = [0] * len(vars)
                for v, k in node.variable_count:
                    idx[vars.index(v)] += int(k)
                atoms[node] = tuple(idx)
            elif isinstance(node, AppliedUndef) and str(node.func) == func:
                atoms.setdefault(node, (0,) * len(vars))
        dums = {a: sp.Dummy() for a in atoms}
        lin = sp.expand(e.xreplace(dums))
        terms = {}
        for a, dmy in dums.items():
            c = lin.coeff(dmy)
            terms[atoms[a]] = terms.get(atoms[a], 0) + c
        rest = sp.expand(lin - sum(dmy * lin.coeff(dmy) for dmy in dums.values()))
        if rest != 0:
            raise ValueError(f"operator expression is not linear homogeneous in {func}: {rest}")
        for c in terms.values():
            _, den = sp.fraction(sp.cancel(c))
            if den.free_symbols & set(vars):
                raise NonPolynomialCoefficient(f"coefficient {c} is not polynomial in {vars}")
        return cls(vars, {d: sp.cancel(c) for d, c in terms.items()})

    @classmethod
    def from_text(cls, text, vars, func="f"):
        if "=" in text:
            lhs, rhs = text.split("=", 1)
            e = ex.parse(lhs, func, vars) - ex.parse(rhs, func, vars)
        else:
            e = ex.parse(text, func, vars)
        return cls.from_expr(e, func, vars)

    # algebra ------------------------------------------------------------

    def __add__(self, other):
        terms = dict(self.terms)
        for d, c in other.terms.items():
            terms[d] = terms.get(d, 0) + c
        return DiffOperator(self.vars, terms)

    def __neg__(self):
        return DiffOperator(self.vars, {d: -c for d, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def lmul(self, c):
        """Left multiplication by a function c(x)."""
        return DiffOperator(self.vars, {d: c * v for d, v in self.terms.items()})

    def __mul__(self, other):
        """Composition self o other in the Weyl algebra."""
        if not isinstance(other, DiffOperator):
            return self.lmul(other)
        out = {}
        for a, c1 in self.terms.items():
            for b, c2 in other.terms.items():
                # d^a (c2 d^b) = sum_{g <= a} binom(a, g) (d^g c2) d^(a-g+b)
                for g in iproduct(*(range(k + 1) for k in a)):
                    dc = c2
                    coef = sp.Integer(1)
                    for v, gi, ai in zip(self.vars, g, a):
                        if gi:
                            dc = sp.diff(dc, v, gi)
                        coef *= sp.binomial(ai, gi)
                    if dc == 0:
                        continue
                    idx = tuple(ai - gi + bi for ai, gi, bi in zip(a, g, b))
                    out[idx] = out.get(idx, 0) + c1 * coef * dc
        return DiffOperator(self.vars, out)

    def apply(self, g):
        out = sp.Integer(0)
        for d, c in self.terms.items():
            spec = [(v, k) for v, k in zip(self.vars, d) if k]
            out += c * (sp.diff(g, *spec) if spec else g)
        return out

    def is_zero(self):
        return not self.terms

    def to_expr(self, func="f"):
        f = sp.Function(func)(*self.vars)
        out = sp.Integer(0)
        for d, c in self.terms.items():
            spec = [(v, k) for v, k in zip(self.vars, d) if k]
            out += c * (sp.Derivative(f, *spec) if spec else f)
        return out

    def to_text(self, func="f"):
        if not self.terms:
            return "0"
        parts = []
        for d in sorted(self.terms, key=lambda t: (-sum(t), tuple(-k for k in t))):
            c = sp.factor(self.terms[d])
            spec = [str(func)]
            for v, k in zip(self.vars, d):
                if k:
                    spec += [str(v), str(k)]
            atom = f"D[{','.join(spec)}]" if len(spec) > 1 else str(func)
            ct = ex._PRINTER.doprint(c)
            parts.append(f"({ct})*{atom}" if c != 1 else atom)
        return " + ".join(parts)

    def __eq__(self, other):
        if not isinstance(other, DiffOperator):
            return NotImplemented
        keys = set(self.terms) | set(other.terms)
        return all(sp.expand(self.terms.get(k, 0) - other.terms.get(k, 0)) == 0 for k in keys)


def theta_expand(k, x=sp.Symbol("x")):
    """theta^k as an operator in one variable x."""
    if k < 0:
        raise ValueError("power must be nonnegative")
    return DiffOperator.theta((x,), 0, k)


# --------------------------------------------------------------------------
# partial linear difference equations


@dataclass
class PLDE:
    """sum_s a_s(n) f[n+s] = rhs(n)."""

    vars: tuple
    terms: dict
    rhs: sp.Expr = sp.Integer(0)
    func: str = "f"

    def __post_init__(self):
        self.vars = tuple(self.vars)
        clean = {}
        for s, c in self.terms.items():
            s = tuple(int(x) for x in s)
            clean[s] = sp.expand(clean.get(s, 0) + c)
        self.terms = {s: c for s, c in clean.items() if c != 0}
        self.rhs = sp.expand(self.rhs)

    @property
    def structure_set(self):
        return sorted(self.terms)

    def shifted(self, m):
        """Replace n by n + m in every coefficient and shift."""
        sub = {v: v + k for v, k in zip(self.vars, m) if k}
        terms = {tuple(a + b for a, b in zip(s, m)): sp.expand(c.xreplace(sub)) for s, c in self.terms.items()}
        return PLDE(self.vars, terms, sp.expand(self.rhs.xreplace(sub)), self.func)

    def normalized(self):
        """Shifts made componentwise nonnegative, content cleared, sign fixed."""
        if not self.terms:
            return self
        m = [-min(s[j] for s in self.terms) for j in range(len(self.vars))]
        eq = self.shifted(m)
        coeffs = list(eq.terms.values()) + ([eq.rhs] if eq.rhs != 0 else [])
        g = sp.gcd_list(coeffs) if len(coeffs) > 1 else coeffs[0]
        terms = {s: sp.expand(sp.cancel(c / g)) for s, c in eq.terms.items()}
        rhs = sp.expand(sp.cancel(eq.rhs / g))
        # rational content
        allc = list(terms.values()) + [rhs]
        nums = []
        for c in allc:
            if c != 0:
                nums += [t for t in sp.Poly(c, *sorted(c.free_symbols, key=str) or [sp.Dummy()]).coeffs()]
        den_l = sp.ilcm(*[sp.Rational(q).q for q in nums]) if nums else 1
        num_g = sp.igcd(*[sp.Rational(q).p for q in nums]) if nums else 1
        scale = sp.Rational(den_l, num_g)
        first = max(terms)
        from .algebra import leading_coeff
        if leading_coeff(terms[first], list(self.vars)) < 0:
            scale = -scale
        terms = {s: sp.expand(c * scale) for s, c in terms.items()}
        return PLDE(self.vars, terms, sp.expand(rhs * scale), self.func)

    def apply(self, y):
        """Residual sum_s a_s y(n+s) - rhs for a callable or expression in vars."""
        out = sp.Integer(0)
        for s, c in self.terms.items():
            if callable(y) and not isinstance(y, sp.Basic):
                val = y(*[v + k for v, k in zip(self.vars, s)])
            else:
                val = sp.sympify(y).xreplace({v: v + k for v, k in zip(self.vars, s) if k})
            out += c * val
        return out - self.rhs

    def to_text(self):
        if not self.terms:
            return "0 = 0"
        parts = []
        for s in sorted(self.terms):
            c = sp.factor(self.terms[s])
            args = ",".join(ex._PRINTER.doprint(v + k) for v, k in zip(self.vars, s))
            parts.append(f"({ex._PRINTER.doprint(c)})*{self.func}[{args}]")
        return " + ".join(parts) + " = " + ex._PRINTER.doprint(sp.factor(self.rhs))

    @classmethod
    def from_expr(cls, e, vars, func="f", rhs=0):
        vars = tuple(vars)
        e = sp.expand(e)
        terms = {}
        dums = {}
        for node in sp.preorder_traversal(e):
            if isinstance(node, AppliedUndef) and str(node.func) == func:
                if len(node.args) != len(vars):
                    raise ValueError(f"{node} does not match variables {vars}")
                s = []
                for a, v in zip(node.args, vars):
                    k = sp.expand(a - v)
                    if not k.is_Integer:
                        raise ValueError(f"{node}: argument {a} is not an integer shift of {v}")
                    s.append(int(k))
                dums[node] = (sp.Dummy(), tuple(s))
        lin = sp.expand(e.xreplace({n: d for n, (d, _) in dums.items()}))
        rest = lin
        for node, (d, s) in dums.items():
            c = lin.coeff(d)
            terms[s] = terms.get(s, 0) + c
            rest -= d * c
        rest = sp.expand(rest)
        return cls(vars, terms, sp.expand(sp.sympify(rhs) - rest), func)

    @classmethod
    def from_text(cls, text, vars, func="f"):
        lhs, _, rhs = text.partition("=")
        e = ex.parse(lhs, func, vars)
        r = ex.parse(rhs, func, vars) if rhs.strip() else sp.Integer(0)
        # move any f-terms on the right to the left
        eq = cls.from_expr(e - r, vars, func)
        return eq

    def __eq__(self, other):
        if not isinstance(other, PLDE):
            return NotImplemented
        keys = set(self.terms) | set(other.terms)
        return (all(sp.expand(self.terms.get(k, 0) - other.terms.get(k, 0)) == 0 for k in keys)
                and sp.expand(self.rhs - other.rhs) == 0)


def same_up_to_unit(a: PLDE, b: PLDE) -> bool:
    """True when a = u * b for a nonzero unit u (constant or parameter-only)."""
    if set(a.terms) != set(b.terms):
        return False
    if not a.terms:
        return True
    s0 = min(a.terms)
    u = sp.cancel(a.terms[s0] / b.terms[s0])
    if u.free_symbols & set(a.vars):
        return False
    ok = all(sp.expand(a.terms[s] - u * b.terms[s]) == 0 for s in a.terms)
    return ok and sp.expand(a.rhs - u * b.rhs) == 0


def find_re(op: DiffOperator, series_vars=None, index_vars=None, func="f") -> PLDE:
    """Recurrence for the Taylor coefficients of a solution of op f = 0."""
    xs = tuple(series_vars or op.vars)
    if index_vars is None:
        index_vars = sp.symbols(" ".join(f"n{i + 1}" for i in range(len(xs))))
        index_vars = (index_vars,) if isinstance(index_vars, sp.Symbol) else index_vars
    ns = tuple(index_vars)
    if len(xs) != len(ns):
        raise ValueError("series and index variables differ in number")
    if tuple(op.vars) != xs:
        raise ValueError("operator variables differ from series variables")
    terms = {}
    for d, c in op.terms.items():
        num, den = sp.fraction(sp.cancel(c))
        if den.free_symbols & set(xs):
            raise NonPolynomialCoefficient(f"coefficient {c} is not polynomial in {xs}")
        p = sp.Poly(sp.expand(num), *xs)
        for a, pc in p.terms():
            s = tuple(di - ai for di, ai in zip(d, a))
            w = pc / den
            for n, si, di in zip(ns, s, d):
                w *= _ff(n + si, di)
            terms[s] = terms.get(s, 0) + w
    return PLDE(ns, terms, 0, func).normalized()


def find_de(system, series_vars=None):
    """Operators x_i s_i(theta) - t_i(theta - e_i) for a ratio system.

    ``system`` needs ``vars`` (index variables) and ``ratios`` (list of
    (s_i, t_i) polynomial pairs with R_i = s_i/t_i).
    """
    ns = tuple(system.vars)
    r = len(ns)
    xs = tuple(series_vars) if series_vars else tuple(sp.symbols(" ".join(f"x{i + 1}" for i in range(r)), seq=True))
    th = sp.symbols(" ".join(f"_th{i}" for i in range(r)), seq=True)
    ops = []
    for i, (s, t) in enumerate(system.pairs()):
        s_th = sp.expand(sp.sympify(s).xreplace(dict(zip(ns, th))))
        sub = {n: (th[j] - 1 if j == i else th[j]) for j, n in enumerate(ns)}
        t_th = sp.expand(sp.sympify(t).xreplace(sub))
        op = DiffOperator.from_theta_poly(s_th, th, xs).lmul(xs[i]) - DiffOperator.from_theta_poly(t_th, th, xs)
        ops.append(op)
    return ops
