"""First-order hypergeometric systems and their nested-product solutions.

A system is given by ratios R_i = s_i/t_i with s_i A(n) = t_i A(n + e_i).
Its solution is

    A(n) = A(lam) * prod_{k=lam_1+1}^{n_1} h_1(k, n_2, ..., n_r)
                  * prod_{k=lam_2+1}^{n_2} h_2(k, n_3, ..., n_r) * ...

with h_1(k, ...) = R_1(k-1, n_2, ...) and the later levels obtained from the
system specialized at n_1 = lam_1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import sympy as sp

from . import expr as ex
from .algebra import Undecidable, factor_lin_quad, integer_roots, ratfun


class IncompatibleSystem(ValueError):
    pass


@dataclass
class HypSystem:
    vars: tuple
    ratios: list

    def __post_init__(self):
        self.vars = tuple(self.vars)
        if len(self.ratios) != len(self.vars):
            raise ValueError("need one ratio per index variable")
        self.ratios = [sp.cancel(sp.sympify(R)) for R in self.ratios]
        for R in self.ratios:
            if R == 0:
                raise ValueError("zero ratio")

    @property
    def r(self):
        return len(self.vars)

    def pairs(self):
        return [ratfun(R) for R in self.ratios]

    @property
    def params(self):
        out = set()
        for R in self.ratios:
            out |= R.free_symbols
        return sorted(out - set(self.vars), key=str)

    @classmethod
    def from_pairs(cls, vars, pairs):
        return cls(vars, [sp.sympify(s) / sp.sympify(t) for s, t in pairs])

    @classmethod
    def from_pldes(cls, pldes):
        """Ratios from first-order equations a_0 f[n] + a_{e_i} f[n+e_i] = 0."""
        vars = tuple(pldes[0].vars)
        r = len(vars)
        ratios = [None] * r
        for eq in pldes:
            if len(eq.terms) != 2 or eq.rhs != 0:
                raise ValueError(f"not a first-order homogeneous equation: {eq.to_text()}")
            lo, hi = sorted(eq.terms)
            step = tuple(b - a for a, b in zip(lo, hi))
            if sorted(step) != [0] * (r - 1) + [1]:
                raise ValueError(f"equation is not first order in a single direction: {eq.to_text()}")
            i = step.index(1)
            R = -eq.terms[lo] / eq.terms[hi]
            back = {v: v - k for v, k in zip(vars, lo) if k}
            ratios[i] = sp.cancel(R.xreplace(back))
        if any(R is None for R in ratios):
            raise ValueError("system does not cover every direction")
        return cls(vars, ratios)

    @classmethod
    def from_summand(cls, summand, vars):
        """Shift quotients of a hypergeometric term (Pochhammer ratio)."""
        g = ex.poch_to_gamma(sp.sympify(summand))
        ratios = []
        for v in vars:
            q = sp.gammasimp(g.xreplace({v: v + 1}) / g)
            q = sp.cancel(sp.expand_func(q))
            if q.has(sp.gamma) or not q.is_rational_function(*vars):
                raise ValueError(f"summand is not hypergeometric in {v}")
            ratios.append(q)
        return cls(vars, ratios)

    def substitute(self, bindings):
        return HypSystem(self.vars, [sp.cancel(R.xreplace(bindings)) for R in self.ratios])


def check_compatibility(sys: HypSystem):
    """R_i(n+e_j)/R_i == R_j(n+e_i)/R_j for all i < j; returns (ok, witness)."""
    for i, j in itertools.combinations(range(sys.r), 2):
        vi, vj = sys.vars[i], sys.vars[j]
        Ri, Rj = sys.ratios[i], sys.ratios[j]
        diff = sp.cancel(Ri.xreplace({vj: vj + 1}) * Rj - Rj.xreplace({vi: vi + 1}) * Ri)
        if diff != 0:
            return False, (i + 1, j + 1, diff)
    return True, None


# --------------------------------------------------------------------------
# lambda selection


@dataclass
class Lambdas:
    values: tuple
    heuristic: bool = False


def _linear_sign_ok(f, vars, lam):
    """f linear in vars with rational coefficients: nonzero on n >= lam?"""
    p = sp.Poly(f, *vars)
    if p.total_degree() > 1:
        return None
    cs = [p.coeff_monomial(v) for v in vars]
    c0 = p.coeff_monomial(1)
    low = c0 + sum(c * l for c, l in zip(cs, lam))
    if all(c >= 0 for c in cs) and low > 0:
        return True
    if all(c <= 0 for c in cs) and low < 0:
        return True
    return None


def compute_lambdas(sys: HypSystem, scan_bound: int = 50) -> Lambdas:
    vars = sys.vars
    params = set(sys.params)
    lam = [0] * sys.r
    hard = []
    for i, (s, t) in enumerate(sys.pairs()):
        for poly in (s, t):
            if poly.free_symbols & set(vars) == set():
                continue
            _, facs = sp.factor_list(poly)
            for f, _m in facs:
                fv = f.free_symbols & set(vars)
                if not fv or f.free_symbols & params:
                    continue  # generic in the parameters
                if fv == {vars[i]}:
                    roots = integer_roots(f, vars[i])
                    ints = [r for r in roots if isinstance(r, int)]
                    if ints:
                        lam[i] = max(lam[i], max(ints) + 1)
                else:
                    hard.append((i, f))
    heuristic = False
    for i, f in hard:
        if _linear_sign_ok(f, vars, lam):
            continue
        heuristic = True
        lam[i] = _scan(f, vars, i, lam, scan_bound)
    return Lambdas(tuple(lam), heuristic)


def _scan(f, vars, i, lam, bound):
    fn = sp.lambdify(vars, f, "math")
    for cand in range(lam[i], bound + 1):
        ranges = [range(max(l, 0), bound + 1) if j != i else range(cand, bound + 1)
                  for j, l in enumerate(lam)]
        if all(fn(*pt) != 0 for pt in itertools.product(*ranges)):
            return cand
    raise Undecidable(f"factor {f} vanishes on the scan grid for every lambda <= {bound}")


# --------------------------------------------------------------------------
# product solution


def _fresh(avoid, base="k"):
    names = {str(s) for s in avoid}
    for cand in [base, "i", "j", "l"] + [f"{base}{t}" for t in range(1, 100)]:
        if cand not in names:
            return sp.Symbol(cand)
    raise RuntimeError("no fresh symbol")


@dataclass
class ProductSolution:
    vars: tuple
    lambdas: tuple
    index: sp.Symbol
    factors: list                 # h_i(index, n_{i+1}, ..., n_r)
    constant: sp.Expr = field(default=None)
    heuristic: bool = False

    def __post_init__(self):
        if self.constant is None:
            self.constant = sp.Function("A")(*[sp.Integer(l) for l in self.lambdas])

    def substitute(self, bindings):
        return ProductSolution(self.vars, self.lambdas, self.index,
                               [sp.cancel(h.xreplace(bindings)) for h in self.factors],
                               self.constant, self.heuristic)

    def to_expression(self, constant=None):
        """The nested product as an expression with FiniteProduct nodes."""
        c = self.constant if constant is None else constant
        out = sp.sympify(c)
        for v, lam, h in zip(self.vars, self.lambdas, self.factors):
            out *= sp.Product(h, (self.index, lam + 1, v))
        return ex.canonical(out)

    def evaluate(self, point, bindings=None, constant=1):
        """Exact value at an integer point (Fraction arithmetic)."""
        env = dict(bindings or {})
        val = Fraction(constant)
        pt = dict(zip(self.vars, point))
        for i, (v, lam, h) in enumerate(zip(self.vars, self.lambdas, self.factors)):
            sub = {w: pt[w] for w in self.vars[i + 1:]}
            hh = sp.cancel(h.xreplace(sub).xreplace(env))
            num, den = sp.fraction(hh)
            for k in range(lam + 1, pt[v] + 1):
                a = num.xreplace({self.index: k})
                b = den.xreplace({self.index: k})
                val *= Fraction(int(sp.Rational(a).p), int(sp.Rational(a).q))
                val /= Fraction(int(sp.Rational(b).p), int(sp.Rational(b).q))
        return val


def solve_first_order_system(sys: HypSystem, scan_bound: int = 50) -> ProductSolution:
    ok, wit = check_compatibility(sys)
    if not ok:
        raise IncompatibleSystem(f"ratios {wit[0]} and {wit[1]} are incompatible: {wit[2]}")
    lam = compute_lambdas(sys, scan_bound)
    k = _fresh(set(sys.vars) | set(sys.params))
    factors = []
    fixed = {}
    for i, v in enumerate(sys.vars):
        R = sys.ratios[i].xreplace(fixed)
        factors.append(sp.cancel(R.xreplace({v: k - 1})))
        fixed[v] = sp.Integer(lam.values[i])
    return ProductSolution(sys.vars, lam.values, k, factors, heuristic=lam.heuristic)


def forward_iterate(sys: HypSystem, point, lambdas, bindings=None, constant=1):
    """A(point) by walking the ratios from A(lambdas): n_1 first, then n_2, ..."""
    env = dict(bindings or {})
    cur = list(lambdas)
    val = Fraction(constant)
    ratios = [sp.cancel(R.xreplace(env)) for R in sys.ratios]
    for i, target in enumerate(point):
        while cur[i] < target:
            q = ratios[i].xreplace(dict(zip(sys.vars, cur)))
            q = sp.Rational(q)
            val *= Fraction(int(q.p), int(q.q))
            cur[i] += 1
    return val


# --------------------------------------------------------------------------
# Pochhammer form


@dataclass
class _PochForm:
    pochs: list = field(default_factory=list)       # [base, count, exponent]
    units: dict = field(default_factory=dict)       # base -> exponent
    residual: list = field(default_factory=list)    # (Product node, exponent)

    def unit(self, base, count):
        base = sp.cancel(base)
        if base == 1:
            return
        if base.is_number and base < 0 and base != -1:
            self.unit(-1, count)
            base = -base
        self.units[base] = sp.expand(self.units.get(base, 0) + count)

    def merge(self):
        changed = True
        while changed:
            changed = False
            # (b)_{c1} (a)_{c2} with b = a + c2  ->  (a)_{c1+c2}
            for x, y in itertools.permutations(range(len(self.pochs)), 2):
                b1, c1, e1 = self.pochs[x]
                b2, c2, e2 = self.pochs[y]
                if e1 == e2 and sp.expand(b1 - b2 - c2) == 0:
                    self.pochs[y] = [b2, sp.expand(c1 + c2), e1]
                    del self.pochs[x]
                    changed = True
                    break
            if changed:
                continue
            # 1/(b)_c = (-1)^c (1-b)_{-c}, used only when it enables a merge
            for x, (b, c, e) in enumerate(self.pochs):
                nb, nc, ne = sp.expand(1 - b), sp.expand(-c), -e
                for y, (b2, c2, e2) in enumerate(self.pochs):
                    if y == x or e2 != ne:
                        continue
                    if sp.expand(b2 - nb - nc) == 0 or sp.expand(nb - b2 - c2) == 0:
                        self.pochs[x] = [nb, nc, ne]
                        self.unit(-1, c)
                        changed = True
                        break
                if changed:
                    break
        self.pochs = [p for p in self.pochs if sp.expand(p[1]) != 0]

    def to_expr(self):
        out = sp.Integer(1)
        for base, ex_ in sorted(self.units.items(), key=lambda t: sp.default_sort_key(t[0])):
            if sp.expand(ex_) != 0:
                out *= sp.Pow(base, ex_)
        for b, c, e in self.pochs:
            if b.is_Integer and b >= 1:
                piece = ex.Fact(c + b - 1) / sp.factorial(b - 1)
            else:
                piece = ex.Poch(b, c)
            out *= piece**e
        for node, e in self.residual:
            out *= node**e
        return ex.canonical(out)


def to_pochhammer(sol: ProductSolution, constant=1):
    """Pochhammer form of a product solution; irreducible pieces stay products."""
    form = _PochForm()
    k = sol.index
    for v, lam, h in zip(sol.vars, sol.lambdas, sol.factors):
        count = v - lam
        num, den = sp.fraction(sp.cancel(h))
        for poly, sgn in ((num, 1), (den, -1)):
            if poly.free_symbols & {k} == set():
                form.unit(poly**sgn, count)
                continue
            lq = factor_lin_quad(poly, k)
            form.unit(lq.unit**sgn, count)
            for f, m in lq.linear:
                gamma = sp.expand(f - k)
                for _ in range(m):
                    form.pochs.append([sp.expand(lam + 1 + gamma), count, sgn])
            if lq.residual != 1:
                form.residual.append((sp.Product(lq.residual, (k, lam + 1, v)), sgn))
    form.merge()
    out = form.to_expr()
    return ex.canonical(out * constant) if constant != 1 else out


def pochhammer_solution(pldes_or_system, bindings=None):
    """Convenience pipeline: system -> product -> optional substitution -> Pochhammer form."""
    sys = pldes_or_system if isinstance(pldes_or_system, HypSystem) else HypSystem.from_pldes(pldes_or_system)
    sol = solve_first_order_system(sys)
    if bindings:
        sol = sol.substitute(bindings)
    return sol, to_pochhammer(sol)
