"""Laurent expansion in eps of hypergeometric products.

A product ``prod_{i=lo}^{hi} h(eps, i)`` is split into a finite critical
prefactor (the indices where ``h(0, i)`` vanishes or has a pole) and a tail
whose factors are regular and nonzero at ``eps = 0``.  The tail is
factored; every irreducible factor ``p`` contributes
``prod p(0, i) * exp(sum_i log(p(eps, i)/p(0, i)))`` whose Taylor
coefficients are built from the sums ``sum_i (d/deps)^j log p(eps, i) at 0``.
Those sums are split by partial fractions and recognized as harmonic sums
at shifted arguments where possible; anything else stays a FiniteSum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import sympy as sp

from . import expr as ex
from .algebra import Undecidable, integer_roots

EPS = sp.Symbol("eps")


class ZeroMultiplicand(ValueError):
    pass


class NonRationalMultiplicand(ValueError):
    pass


class PrecisionLoss(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# Laurent series


@dataclass
class LaurentSeries:
    """``factor * sum_j coeffs[j] * eps^(order+j)``, exact through ``truncation``.

    ``factor`` is an eps-free common multiplier (typically the product at
    eps = 0) kept apart for readability; ``coefficient`` folds it in.
    """

    order: int
    coeffs: list
    truncation: int
    factor: sp.Expr = sp.Integer(1)
    eps: sp.Symbol = EPS

    def __post_init__(self):
        self.coeffs = [sp.sympify(c) for c in self.coeffs]
        self.factor = sp.sympify(self.factor)
        self.coeffs = self.coeffs[: max(0, self.truncation - self.order + 1)]
        while self.coeffs and _is_zero(self.coeffs[0]):
            self.coeffs.pop(0)
            self.order += 1
        if not self.coeffs:
            self.order = self.truncation + 1

    @classmethod
    def zero(cls, truncation, eps=EPS):
        return cls(truncation + 1, [], truncation, 1, eps)

    @classmethod
    def constant(cls, c, truncation, eps=EPS):
        return cls(0, [c], truncation, 1, eps)

    def is_zero(self):
        return not self.coeffs

    def relative(self, k):
        j = k - self.order
        if 0 <= j < len(self.coeffs) and k <= self.truncation:
            return self.coeffs[j]
        if k > self.truncation:
            raise ValueError(f"coefficient of eps^{k} beyond truncation {self.truncation}")
        return sp.Integer(0)

    def coefficient(self, k):
        return self.factor * self.relative(k)

    def unfactored(self):
        return LaurentSeries(self.order, [self.factor * c for c in self.coeffs], self.truncation, 1, self.eps)

    def __add__(self, other):
        if not isinstance(other, LaurentSeries):
            other = LaurentSeries.constant(other, self.truncation, self.eps)
        a, b = self, other
        if a.factor != b.factor:
            a, b = a.unfactored(), b.unfactored()
        trunc = min(a.truncation, b.truncation)
        lo = min(a.order, b.order)
        cs = [sp.expand(a.relative(k) + b.relative(k)) for k in range(lo, trunc + 1)]
        return LaurentSeries(lo, cs, trunc, a.factor, self.eps)

    __radd__ = __add__

    def __neg__(self):
        return LaurentSeries(self.order, [-c for c in self.coeffs], self.truncation, self.factor, self.eps)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, LaurentSeries):
            other = sp.sympify(other)
            if other.has(self.eps):
                raise ValueError("scalar multiplier must be free of eps")
            return LaurentSeries(self.order, [sp.expand(other * c) for c in self.coeffs],
                                 self.truncation, self.factor, self.eps)
        a, b = self, other
        if a.is_zero() or b.is_zero():
            t = min(a.truncation + (b.order if not b.is_zero() else 0),
                    b.truncation + (a.order if not a.is_zero() else 0))
            return LaurentSeries.zero(t, self.eps)
        order = a.order + b.order
        trunc = min(a.truncation + b.order, b.truncation + a.order)
        cs = []
        for k in range(order, trunc + 1):
            acc = sp.Integer(0)
            for j in range(a.order, k - b.order + 1):
                acc += a.relative(j) * b.relative(k - j)
            cs.append(sp.expand(acc))
        return LaurentSeries(order, cs, trunc, a.factor * b.factor, self.eps)

    __rmul__ = __mul__

    def inverse(self):
        if self.is_zero():
            raise ZeroDivisionError("inverse of a zero series")
        t, K = self.order, self.truncation - self.order
        a = [self.relative(t + j) for j in range(K + 1)]
        b = [1 / a[0]]
        for k in range(1, K + 1):
            b.append(sp.expand(-sum(a[j] * b[k - j] for j in range(1, k + 1)) * b[0]))
        return LaurentSeries(-t, b, self.truncation - 2 * t, 1 / self.factor, self.eps)

    def to_expr(self):
        body = sum((c * self.eps**(self.order + j) for j, c in enumerate(self.coeffs)), sp.Integer(0))
        return self.factor * body

    def evaluate(self, eps_value, bindings=None, digits=50):
        """Partial Laurent sum at a numeric eps."""
        bindings = dict(bindings or {})
        with mpmath.workdps(digits + 10):
            f = ex.evaluate(self.factor, bindings, digits=digits)
            e = mpmath.mpf(eps_value) if not isinstance(eps_value, Fraction) else \
                mpmath.mpf(eps_value.numerator) / eps_value.denominator
            acc = mpmath.mpf(0)
            for j, c in enumerate(self.coeffs):
                acc += ex.evaluate(c, bindings, digits=digits) * e**(self.order + j)
            return f * acc

    def tidy(self):
        return LaurentSeries(self.order, [tidy(c) for c in self.coeffs], self.truncation,
                             self.factor, self.eps)

    def to_text(self):
        parts = []
        for j, c in enumerate(self.coeffs):
            parts.append(f"eps^{self.order + j}: {ex.to_text(tidy(c))}")
        head = f"factor: {ex.to_text(self.factor)}"
        return "\n".join([head] + parts + [f"O(eps^{self.truncation + 1})"])


def tidy(c):
    """Collect a coefficient over its sum atoms, factoring the rational parts."""
    c = sp.sympify(c)
    atoms = sorted(c.atoms(ex.HarmonicS, ex.HurwitzS, sp.Sum), key=sp.default_sort_key)
    if not atoms:
        return sp.factor(c)
    marks = [sp.Dummy(f"s{k}") for k in range(len(atoms))]
    body = sp.expand(sp.together(c.xreplace(dict(zip(atoms, marks)))))
    num, den = sp.fraction(sp.together(body))
    P = sp.Poly(sp.expand(num), *marks)
    out = sp.Integer(0)
    for mon, cf in P.terms():
        term = sp.factor(cf / den)
        for m, e in zip(atoms, mon):
            term *= m**e
        out += term
    return out


def _is_zero(c):
    c = sp.sympify(c)
    if c == 0:
        return True
    atoms = c.atoms(sp.Sum, sp.Product, ex.HarmonicS, ex.HurwitzS, ex.Poch, ex.Fact)
    if atoms:
        # freeze the transcendental atoms so the rational parts can cancel
        c = c.xreplace({a: sp.Dummy() for a in atoms})
    return sp.cancel(sp.together(c)) == 0


# --------------------------------------------------------------------------
# products


@dataclass
class ProductAtom:
    """``prod_{index=lower}^{upper} multiplicand`` (or its reciprocal)."""

    multiplicand: sp.Expr
    index: sp.Symbol
    lower: sp.Expr
    upper: sp.Expr
    inverse: bool = False
    eps: sp.Symbol = EPS

    def __post_init__(self):
        self.multiplicand = sp.sympify(self.multiplicand)
        self.lower = sp.sympify(self.lower)
        self.upper = sp.sympify(self.upper)

    def to_expr(self):
        p = sp.Product(self.multiplicand, (self.index, self.lower, self.upper))
        return 1 / p if self.inverse else p


def _critical_end(h0, i, lo, params):
    """Smallest l' >= lo with h(0, i) regular and nonzero for every i >= l'."""
    num, den = sp.fraction(sp.cancel(h0))
    hits = []
    for part in (num, den):
        if part.has(i):
            try:
                hits += [r for r in integer_roots(part, i, params) if r >= lo]
            except Undecidable:
                raise
    return max(hits) + 1 if hits else lo


def _series_rational(r, eps, upto):
    """Laurent expansion of a rational function of eps through eps^upto."""
    r = sp.cancel(r)
    if not r.has(eps):
        return LaurentSeries(0, [r], upto, 1, eps)
    num, den = sp.fraction(r)
    pn, pd = sp.Poly(num, eps), sp.Poly(den, eps)
    vn = min(m[0] for m in pn.monoms())
    vd = min(m[0] for m in pd.monoms())
    s = vn - vd
    K = upto - s
    if K < 0:
        return LaurentSeries.zero(upto, eps)
    a = [pn.coeff_monomial(eps**(vn + j)) for j in range(K + 1)]
    b = [pd.coeff_monomial(eps**(vd + j)) for j in range(K + 1)]
    c = []
    for k in range(K + 1):
        c.append(sp.cancel((a[k] - sum(b[j] * c[k - j] for j in range(1, k + 1))) / b[0]))
    return LaurentSeries(s, c, upto, 1, eps)


def _shift_corrections(rho, base, k):
    """S_rho(base + k) - S_rho(base) for an integer k."""
    if k >= 0:
        return sum((1 / (base + j)**rho for j in range(1, k + 1)), sp.Integer(0))
    return -sum((1 / (base - j)**rho for j in range(0, -k)), sp.Integer(0))


def _harmonic_at(rho, base, k):
    """S_rho(base + k), normalized to argument ``base`` plus finite corrections.

    ``base`` is symbolic (or zero); a zero base means a plain integer
    argument, evaluated exactly.
    """
    if base == 0:
        if k < 0:
            raise ValueError("harmonic sum at a negative integer")
        return sum((sp.Rational(1, j**rho) for j in range(1, k + 1)), sp.Integer(0))
    return ex.S([rho], base) + _shift_corrections(rho, base, k)


def _split_constant(A):
    """A = s + k with k the integer constant term (0 if not integral)."""
    A = sp.expand(A)
    k = A.as_coeff_Add()[0]
    if k.is_Integer:
        return sp.expand(A - k), int(k)
    return A, 0


def _sum_linear(c, A, rho, i, lo, hi):
    """sum_{i=lo}^{hi} c/(i+A)^rho written with harmonic sums."""
    s, k = _split_constant(A)
    lo_s, lo_k = _split_constant(lo)
    hi_s, hi_k = _split_constant(hi)
    if lo_s != 0:
        raise NotImplementedError("symbolic lower bounds are not supported")
    # sum_{j=lo+k}^{hi+k} 1/(j+s)^rho = S(s + hi + k) - S(s + lo + k - 1)
    top_base = sp.expand(s + hi_s)
    top = _harmonic_at(rho, top_base, hi_k + k) if top_base != 0 else _harmonic_at(rho, 0, hi_k + k)
    bottom = _harmonic_at(rho, s, lo_k + k - 1) if s != 0 else _harmonic_at(rho, 0, lo_k + k - 1)
    return c * (top - bottom)


def _sum_term(term, i, lo, hi):
    """Closed form (or opaque FiniteSum) for sum_{i=lo}^{hi} term."""
    num, den = sp.fraction(sp.together(term))
    if not den.has(i):
        return sp.expand(sp.factor(sp.summation(sp.expand(term), (i, lo, hi))))
    base, rho = den.as_base_exp() if not den.is_Mul else (None, None)
    if den.is_Mul:
        # constant * (linear)^rho
        cst, rest = den.as_independent(i, as_Add=False)
        base, rho = rest.as_base_exp()
        num = num / cst
    if rho is not None and rho.is_Integer and not num.has(i):
        pb = sp.Poly(base, i)
        if pb.degree() == 1:
            alpha, beta = pb.all_coeffs()
            return _sum_linear(num / alpha**rho, sp.expand(beta / alpha), int(rho), i, lo, hi)
    return sp.Sum(term, (i, lo, hi))


def _sum_rational(g, i, lo, hi):
    g = sp.cancel(g)
    if g == 0:
        return sp.Integer(0)
    out = sp.Integer(0)
    for t in sp.Add.make_args(sp.apart(g, i)):
        out += _sum_term(t, i, lo, hi)
    return out


def _tail_factors(h, eps, i):
    """(eps-dependent irreducible factors with exponents, eps-free remainder)."""
    num, den = sp.fraction(sp.cancel(h))
    out, rest = [], sp.Integer(1)
    for part, sgn in ((num, 1), (den, -1)):
        c, fl = sp.factor_list(part)
        rest *= c**sgn
        for f, e in fl:
            if f.has(eps):
                out.append((f, sgn * e))
            else:
                rest *= f**(sgn * e)
    return out, rest


def _log_sums(p, e, eps, i, lo, hi, K):
    """G_j = e * sum_i [eps^j] d/deps log p(eps, i), j = 0..K-1."""
    P = sp.Poly(p, eps)
    pc = [P.coeff_monomial(eps**j) for j in range(K + 2)]
    dp = [(j + 1) * pc[j + 1] for j in range(K + 1)]
    u = []
    for j in range(K):
        acc = dp[j] - sum(pc[k] * u[j - k] for k in range(1, j + 1))
        u.append(sp.cancel(acc / pc[0]))
    return [sp.expand(e * _sum_rational(uj, i, lo, hi)) for uj in u]


def _exp_series(G, K):
    """Coefficients of exp(sum_{j>=0} G_j eps^(j+1)/(j+1)) through eps^K."""
    p = [sp.Integer(1)]
    for k in range(K):
        acc = sum((G[j] * p[k - j] for j in range(k + 1)), sp.Integer(0))
        p.append(sp.expand(acc / (k + 1)))
    return p


def _zero_product(h0, i, lo, hi):
    from .hypsolve import ProductSolution, to_pochhammer
    h0 = sp.cancel(h0)
    if not h0.has(i):
        return h0**(hi - lo + 1)
    sol = ProductSolution((hi,), (sp.expand(lo - 1),), i, [h0], constant=sp.Integer(1))
    return to_pochhammer(sol)


def series_for_product(atom: ProductAtom, up_to: int, params=None) -> LaurentSeries:
    """Laurent expansion of a product atom through eps^up_to."""
    eps, i = atom.eps, atom.index
    h = sp.sympify(atom.multiplicand)
    if h.has(sp.Sum, sp.Product, ex.Poch, ex.Fact, ex.Gamma, ex.HarmonicS, ex.HurwitzS) or \
            not h.is_rational_function(eps, i):
        raise NonRationalMultiplicand(f"multiplicand is not rational in ({eps}, {i}): {h}")
    h = sp.cancel(h)
    if h == 0:
        raise ZeroMultiplicand("multiplicand is identically zero")
    if params is None:
        params = sorted(h.free_symbols - {eps, i}, key=str)
    lo, hi = atom.lower, atom.upper
    if not h.has(eps):
        s = LaurentSeries(0, [1], up_to, _zero_product(h, i, lo, hi), eps)
        return s.inverse() if atom.inverse else s

    h0 = sp.cancel(h.subs(eps, 0))
    if h0 == 0:
        raise ValueError("multiplicand vanishes at eps=0 for every index; order grows with the range")
    lp = _critical_end(h0, i, lo, params)
    # prefactor r(eps) over lo..lp-1
    r = sp.Integer(1)
    for k in range(int(lp - lo)):
        r *= h.subs(i, lo + k)
    rs = _series_rational(r, eps, up_to + 2 * abs(int(lp - lo)) + 2) if lp != lo else None

    # tail over lp..hi: its relative expansion starts at eps^0
    K_tail = up_to - (rs.order if rs is not None else 0)
    K_tail = max(K_tail, 0)
    factors, _ = _tail_factors(h, eps, i)
    rel = LaurentSeries(0, [1], K_tail, 1, eps)
    for p, e in factors:
        G = _log_sums(p, e, eps, i, lp, hi, K_tail)
        rel = rel * LaurentSeries(0, _exp_series(G, K_tail), K_tail, 1, eps)
    base = _zero_product(h0, i, lp, hi)
    tail = LaurentSeries(0, rel.coeffs if rel.order == 0 else [0] * rel.order + rel.coeffs,
                         K_tail, base, eps)
    out = tail if rs is None else rs * tail
    out = LaurentSeries(out.order, out.coeffs, min(out.truncation, up_to), out.factor, eps)
    if not atom.inverse:
        return out
    if out.order != 0 and out.truncation - 2 * out.order < up_to:
        fwd = ProductAtom(atom.multiplicand, i, lo, hi, False, eps)
        out = series_for_product(fwd, up_to + 2 * out.order, params)
    inv = out.inverse()
    return LaurentSeries(inv.order, inv.coeffs, min(inv.truncation, up_to), inv.factor, eps)


def expand_pochhammer(a, r, n, up_to: int, eps=EPS) -> LaurentSeries:
    """(a + r*eps)_n through eps^up_to."""
    a, r = sp.sympify(a), sp.Rational(r)
    k = sp.Dummy("i", integer=True)
    if r == 0:
        return LaurentSeries(0, [1], up_to, ex.Poch(a, n), eps)
    atom = ProductAtom(k + a - 1 + r * eps, k, 1, n, eps=eps)
    s = series_for_product(atom, up_to)
    return LaurentSeries(s.order, s.coeffs, s.truncation, ex.Poch(a, n), eps) \
        if _same(s.factor, ex.Poch(a, n), n) else s


def _same(u, v, n):
    return sp.simplify(sp.gammasimp(ex.poch_to_gamma(u) / ex.poch_to_gamma(v))) == 1


def hurwitz_identity(l, a, n):
    """S_l(a; n) = S_l(a + n) - S_l(a)."""
    n = sp.sympify(n)
    a = sp.sympify(a)
    if n == 0:
        return sp.Integer(0)
    return ex.S([l], a + n) - ex.S([l], a)


def rewrite_hurwitz(e):
    """Replace single-index Hurwitz sums by harmonic-sum differences."""
    def rep(node):
        if len(node.word) == 1 and node.word[0] > 0:
            return hurwitz_identity(node.word[0], node.args[0], node.args[1])
        return node
    return e.replace(lambda z: isinstance(z, ex.HurwitzS), rep)


# --------------------------------------------------------------------------
# hypergeometric terms in eps


def _pieces(term, eps):
    """Split a monomial-like term into eps-dependent Poch/Fact/Gamma powers and the rest."""
    out, rest = [], sp.Integer(1)
    for f in sp.Mul.make_args(term):
        b, e = f.as_base_exp()
        if isinstance(b, ex.Poch) and b.has(eps) and e.is_Integer:
            out.append((b.args[0], b.args[1], int(e)))
        elif isinstance(b, ex.Fact) and b.has(eps) and e.is_Integer:
            out.append((b.args[0] + 1, None, int(e)))
        elif f.has(eps):
            out.append((f, "rational", 1))
        else:
            rest *= f
    return out, rest


def _poch_order(a0, count):
    """Order in eps of (a0 + r eps)_count, r != 0, for a generic large count."""
    a0 = sp.sympify(a0)
    return 1 if a0.is_Integer and a0 <= 0 else 0


def expand_term(term, up_to: int, eps=EPS) -> LaurentSeries:
    """Laurent expansion of a product of Pochhammer powers and rational factors.

    Pochhammer counts are treated as generic (large enough to reach every
    zero of the base); pieces are expanded only as far as the total order
    requires.
    """
    term = sp.sympify(term)
    pieces, rest = _pieces(term, eps)
    plan = []
    for base, count, e in pieces:
        if count == "rational":
            s = _series_rational(base, eps, up_to)
            plan.append(("rational", base, None, 1, s.order))
            continue
        if count is None:
            raise NonRationalMultiplicand("factorials of eps-dependent arguments are not supported")
        a = sp.expand(base)
        r = a.coeff(eps)
        a0 = sp.expand(a - r * eps)
        if a0.has(eps) or not r.is_Rational:
            raise NonRationalMultiplicand(f"Pochhammer base not linear in {eps}: {base}")
        plan.append(("poch", (a0, r), count, e, _poch_order(a0, count)))
    low = sum(e * t for _, _, _, e, t in plan)
    out = LaurentSeries(0, [rest], up_to, 1, eps)
    for kind, base, count, e, t in plan:
        need = up_to - (low - e * t)
        fwd = need - (e - 1) * t
        if kind == "rational":
            s = _series_rational(base, eps, fwd)
        else:
            a0, r = base
            k = sp.Dummy("i", integer=True)
            s = series_for_product(ProductAtom(k + a0 - 1 + r * eps, k, 1, count, eps=eps), fwd)
        if e < 0:
            s = s.inverse()
        acc = s
        for _ in range(abs(e) - 1):
            acc = acc * s
        out = out * acc
    return LaurentSeries(out.order, out.coeffs, min(out.truncation, up_to), out.factor, eps)


# --------------------------------------------------------------------------
# truncated numeric evaluation


@dataclass
class TruncatedValue:
    value: mpmath.mpf
    tail: mpmath.mpf
    digits: int
    partial: list = field(default_factory=list)

    def __float__(self):
        return float(self.value)


def _truncate(e, N):
    """Replace infinite upper limits by N; return (expression, outermost infinite sum or None)."""
    nodes = [s for s in sp.preorder_traversal(e) if isinstance(s, sp.Sum) and s.limits[0][2] == sp.oo]
    if not nodes:
        return e, None
    top = nodes[0]
    return e.replace(lambda z: isinstance(z, (sp.Sum, sp.Product)) and z.limits[0][2] == sp.oo,
                     lambda z: z.func(z.function, (z.limits[0][0], z.limits[0][1], N))), top


def _richardson(hs, vals):
    """Polynomial extrapolation of vals(h) to h = 0 (Neville)."""
    n = len(vals)
    T = list(vals)
    for k in range(1, n):
        for j in range(n - 1, k - 1, -1):
            T[j] = (hs[j - k] * T[j] - hs[j] * T[j - 1]) / (hs[j - k] - hs[j])
    return T[-1]


def eval_truncated(e, bindings=None, N=1000, digits=30, extrapolate=0):
    """Evaluate ``e`` with every infinite sum cut at ``N``.

    The tail estimate is the magnitude of the last summand of the outermost
    infinite sum (heuristic).  With ``extrapolate = L > 0`` the outermost
    sum is also evaluated at ``N/2, N/4, ..., N/2^L`` (sharing the loop
    cache) and polynomially extrapolated in ``1/N``; this assumes the
    truncation error has an asymptotic expansion in inverse powers of N.
    Raises PrecisionLoss when cancellation in the result exceeds
    ``digits/2`` decimal digits.
    """
    e = ex.canonical(sp.sympify(e))
    bindings = dict(bindings or {})
    env_raw = {(sp.Symbol(k) if isinstance(k, str) else k): v for k, v in bindings.items()}
    Nsym = sp.Dummy("N", integer=True)
    te, top = _truncate(e, Nsym)
    guard = 10
    with mpmath.workdps(digits + guard):
        env = {k: ex._to_mpf(v) for k, v in env_raw.items()}
        ctx = ex._Ctx(False, digits)
        cuts = [N] if not extrapolate or top is None else \
            sorted({max(1, N >> j) for j in range(extrapolate + 1)})
        env[Nsym] = mpmath.mpf(N)
        vals = _fast_partials(e, top, cuts, env, ctx) if top is not None and top == e else None
        if vals is None:
            vals = []
            for c in cuts:
                env[Nsym] = mpmath.mpf(c)
                vals.append(ex._ev(te, env, ctx))
        value = vals[-1]
        if len(vals) > 1:
            value = _richardson([mpmath.mpf(1) / c for c in cuts], vals)
        tail = mpmath.mpf(0)
        if top is not None:
            (i, lo, _), = top.limits
            local = dict(env)
            local[i] = mpmath.mpf(N)
            try:
                tail = abs(ex._ev(top.function, local, ctx))
            except ZeroDivisionError:
                tail = mpmath.inf
        env[Nsym] = mpmath.mpf(N)
        _check_cancellation(te, env, ctx, value, digits)
    return TruncatedValue(+value, tail, digits, vals)


def term_ratio(term, n):
    """t(n+1)/t(n) for a product of Pochhammer/factorial/power/FiniteProduct factors."""
    term = sp.sympify(term)
    ratio, rest = sp.Integer(1), sp.Integer(1)
    for f in sp.Mul.make_args(term):
        b, e = f.as_base_exp()
        if isinstance(b, sp.Product) and e.is_Integer:
            (i, lo, hi), = b.limits
            if lo.has(n) or sp.expand(hi.subs(n, n + 1) - hi) != 1:
                raise ValueError(f"product bounds are not a unit step in {n}")
            ratio *= b.function.subs(i, hi + 1)**e
        else:
            rest *= f
    from .hypsolve import HypSystem
    return sp.cancel(ratio * HypSystem.from_summand(rest, (n,)).ratios[0])


def _fast_partials(e, top, cuts, env, ctx):
    """Partial sums of the outermost infinite sum via term ratios, or None."""
    (i, lo, _), = top.limits
    try:
        lo_v = int(ex._ev(lo, env, ctx))
        terms = list(sp.Add.make_args(sp.expand(top.function, deep=False, mul=False)))
        if any(t.has(sp.Sum) for t in terms):
            return None
        params = sorted(set().union(*(t.free_symbols for t in terms)) - {i}, key=str)
        if any(q not in env for q in params):
            return None
        pieces = []
        for t in terms:
            num, den = sp.fraction(term_ratio(t, i))
            pieces.append((t, sp.lambdify((i, *params), num, "mpmath"),
                           sp.lambdify((i, *params), den, "mpmath")))
    except (ValueError, TypeError, ex.EvaluationError, NotImplementedError):
        return None
    pv = [env[q] for q in params]
    local = dict(env)
    local[i] = mpmath.mpf(lo_v)
    try:
        vals = [ex._ev(t, local, ctx) for t, _, _ in pieces]
    except (ZeroDivisionError, ex.EvaluationError):
        return None
    if any(v == 0 for v in vals):
        return None
    acc = sum(vals, mpmath.mpf(0))
    out, want = [], sorted(cuts)
    k, w = lo_v, 0
    while w < len(want) and want[w] < lo_v:
        out.append(mpmath.mpf(0))
        w += 1
    while True:
        while w < len(want) and want[w] == k:
            out.append(acc)
            w += 1
        if w == len(want):
            return out
        kk = mpmath.mpf(k)
        for j, (_, fn, fd) in enumerate(pieces):
            d = fd(kk, *pv)
            if d == 0:
                return None
            vals[j] = vals[j] * fn(kk, *pv) / d
        k += 1
        acc += sum(vals)


def _check_cancellation(te, env, ctx, value, digits):
    """Compare the result against the sum of absolute summands."""
    mags = []
    for node in sp.preorder_traversal(te):
        if isinstance(node, sp.Sum):
            (i, lo, hi), = node.limits
            try:
                lo_v, hi_v = int(ex._ev(lo, env, ctx)), int(ex._ev(hi, env, ctx))
            except (ex.EvaluationError, TypeError, ValueError):
                return
            if node.function.free_symbols - {i} - set(env):
                return
            # a few sampled summands bound the magnitude scale
            local = dict(env)
            for k in {lo_v, (lo_v + hi_v) // 2, hi_v}:
                if k < lo_v:
                    continue
                local[i] = mpmath.mpf(k)
                try:
                    mags.append(abs(ex._ev(node.function, local, ctx)))
                except (ZeroDivisionError, ex.EvaluationError):
                    pass
            break
    if not mags or value == 0:
        return
    lost = mpmath.log10(max(mags) / abs(value)) if max(mags) > 0 else 0
    if lost > digits / 2:
        raise PrecisionLoss(f"about {int(lost)} digits lost to cancellation (limit {digits // 2})")


def hyper_sum_float(num, den, x, N, t0=1.0, n0=0):
    """Float64 partial sum of a hypergeometric series from its term ratio.

    ``num`` and ``den`` are sympy polynomials in a single variable with
    ``t_{n+1}/t_n = x*num(n)/den(n+1)``.  Uses the compiled kernel.
    """
    from . import _kernels
    nv = sp.Poly(num, *(num.free_symbols or [sp.Symbol("n")]))
    dv = sp.Poly(den, *(den.free_symbols or [sp.Symbol("n")]))
    a = [float(c) for c in nv.all_coeffs()]
    b = [float(c) for c in dv.all_coeffs()]
    return float(_kernels.hyper_partial_sums(a, b, float(x), float(t0), int(n0), int(N), int(N - n0))[-1])


__all__ = [
    "EPS", "LaurentSeries", "ProductAtom", "ZeroMultiplicand", "NonRationalMultiplicand",
    "PrecisionLoss", "series_for_product", "expand_pochhammer", "expand_term",
    "hurwitz_identity", "rewrite_hurwitz", "eval_truncated", "TruncatedValue", "hyper_sum_float",
]
