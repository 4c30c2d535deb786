"""Rational and nested-sum solutions of partial linear difference equations.

Pipeline: denominator bound (aperiodic part from corner coefficients along
several directions, periodic factors collected or reported), numerator
ansatz over monomials times power products of user objects, linear
constraints from random integer points, exact solve, exact verification.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd as igcd

import numpy as np
import sympy as sp

from . import _kernels
from . import expr as ex
from .algebra import NoSolution, solve_linear, solve_linear_qq
from .taylor import PLDE

INFINITE = "Infinite"


class DegenerateStructureSet(ValueError):
    pass


class NoSolutionInAnsatz(NoSolution):
    def __init__(self, msg, bound=None):
        super().__init__(msg)
        self.bound = bound


class UnverifiedSolution(AssertionError):
    pass


class NotHypergeometric(ValueError):
    pass


# --------------------------------------------------------------------------
# integer linear algebra


def _ilcm(xs):
    out = 1
    for x in xs:
        out = out * int(x) // igcd(out, int(x))
    return out


def _igcd(xs):
    out = 0
    for x in xs:
        out = igcd(out, int(x))
    return out


def _int_rows(M):
    """Scale each rational row to integers."""
    out = []
    for row in M:
        row = [sp.Rational(x) for x in row]
        den = _ilcm([x.q for x in row]) if row else 1
        out.append([int(x * den) for x in row])
    return out


def _column_echelon(M, ncols):
    """Unimodular U with M*U in column echelon form; returns (M*U, U, rank)."""
    A = [list(r) for r in M]
    U = [[int(i == j) for j in range(ncols)] for i in range(ncols)]

    def colop(i, j, a, b, c, d):
        # (col_i, col_j) <- (a col_i + b col_j, c col_i + d col_j), det = +-1
        for R in (A, U):
            for row in R:
                x, y = row[i], row[j]
                row[i], row[j] = a * x + b * y, c * x + d * y

    rank = 0
    for r in range(len(A)):
        if rank == ncols:
            break
        for j in range(rank + 1, ncols):
            x, y = A[r][rank], A[r][j]
            if y == 0:
                continue
            g, s, t = _xgcd(x, y)
            colop(rank, j, s, t, -y // g, x // g)
        if A[r][rank] != 0:
            if A[r][rank] < 0:
                for R in (A, U):
                    for row in R:
                        row[rank] = -row[rank]
            rank += 1
    return A, U, rank


def _xgcd(a, b):
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def integer_solutions(M, b, ncols):
    """Integer solutions of M t = b: (particular or None, lattice generators)."""
    if not M:
        return tuple([0] * ncols), [tuple(int(i == j) for i in range(ncols)) for j in range(ncols)]
    rows = []
    for row, bi in zip(M, b):
        row = [sp.Rational(x) for x in row] + [sp.Rational(bi)]
        den = _ilcm([x.q for x in row])
        rows.append([int(x * den) for x in row])
    A = [r[:-1] for r in rows]
    rhs = [r[-1] for r in rows]
    H, U, rank = _column_echelon(A, ncols)
    # solve H z = rhs for z[:rank] by forward substitution on pivot rows
    z = [0] * ncols
    piv = 0
    for r in range(len(H)):
        acc = rhs[r] - sum(H[r][j] * z[j] for j in range(piv))
        if piv < rank and H[r][piv] != 0:
            if acc % H[r][piv]:
                return None, []
            z[piv] = acc // H[r][piv]
            piv += 1
        elif acc != 0:
            return None, []
    t0 = tuple(sum(U[i][j] * z[j] for j in range(ncols)) for i in range(ncols))
    gens = [_canon_vec([U[i][j] for i in range(ncols)]) for j in range(rank, ncols)]
    return t0, gens


def _canon_vec(v):
    v = [int(x) for x in v]
    g = 0
    for x in v:
        g = igcd(g, abs(x))
    if g > 1:
        v = [x // g for x in v]
    for x in v:
        if x != 0:
            if x < 0:
                v = [-y for y in v]
            break
    return tuple(v)


# --------------------------------------------------------------------------
# shifts of irreducible polynomials


def _gens(vars):
    return list(vars)


def _shift(p, t, vars):
    return sp.expand(p.xreplace({v: v + int(k) for v, k in zip(vars, t) if k}))


def _homog(p, vars, d):
    P = sp.Poly(p, *vars)
    return sp.Add(*[c * sp.Mul(*[v**e for v, e in zip(vars, m)]) for m, c in P.terms() if sum(m) == d])


def _coeff_equations(expr, vars, unknowns):
    """Linear equations (rows over Q, rhs) from 'expr == 0' identically in vars and params."""
    expr = sp.expand(expr)
    if expr == 0:
        return [], []
    syms = sorted(expr.free_symbols - set(unknowns), key=str)
    P = sp.Poly(expr, *syms) if syms else None
    rows, rhs = [], []
    coeffs = P.coeffs() if P is not None else [expr]
    for c in coeffs:
        c = sp.expand(c)
        rows.append([c.coeff(u) for u in unknowns])
        rhs.append(-c.subs({u: 0 for u in unknowns}))
    return rows, rhs


def stabilizer(u, vars):
    """Generators of {t in Z^r : u(n+t) = u(n)} for an irreducible u."""
    r = len(vars)
    tv = sp.symbols(f"_t0:{r}")
    grad = sum((tv[j] * sp.diff(u, vars[j]) for j in range(r)), sp.Integer(0))
    rows, rhs = _coeff_equations(grad, vars, tv)
    if not rows:
        return [tuple(int(i == j) for i in range(r)) for j in range(r)]
    _, gens = integer_solutions(rows, [0] * len(rows), r)
    return gens


def is_periodic(u, vars):
    return bool(stabilizer(u, vars))


def shift_equivalence(g, h, vars, window=20):
    """Shifts t with g(n+t) = c*h(n) for irreducible g, h.

    Returns (points, lattices): a finite list of shift tuples and a list of
    (offset, generators) cosets.
    """
    r = len(vars)
    g, h = sp.expand(g), sp.expand(h)
    Pg, Ph = sp.Poly(g, *vars), sp.Poly(h, *vars)
    d = Pg.total_degree()
    if d != Ph.total_degree() or d == 0:
        return [], []
    gd, hd = _homog(g, vars, d), _homog(h, vars, d)
    c = sp.cancel(hd / gd)
    if c.free_symbols & set(vars):
        return [], []
    tv = sp.symbols(f"_t0:{r}")
    lin = _homog(g, vars, d - 1) + sum((tv[j] * sp.diff(gd, vars[j]) for j in range(r)), sp.Integer(0)) \
        - sp.expand(_homog(h, vars, d - 1) / c)
    rows, rhs = _coeff_equations(lin, vars, tv)
    t0, gens = integer_solutions(rows, rhs, r) if rows else (tuple([0] * r), [tuple(int(i == j) for i in range(r)) for j in range(r)])
    if t0 is None:
        return [], []
    stab = stabilizer(g, vars)

    def works(t):
        return sp.expand(_shift(g, t, vars) - h / c) == 0

    if not gens:
        return ([tuple(t0)] if works(t0) else []), []
    if works(t0) and _same_lattice(gens, stab):
        return [], [(tuple(t0), stab)]
    # inconclusive: scan the affine lattice inside the window
    pts = []
    for coeffs in itertools.product(range(-window, window + 1), repeat=len(gens)):
        t = tuple(t0[i] + sum(k * v[i] for k, v in zip(coeffs, gens)) for i in range(r))
        if max(abs(x) for x in t) <= window and works(t):
            pts.append(t)
    if stab:
        return [], [(p, stab) for p in pts[:1]]
    return sorted(set(pts)), []


def _same_lattice(a, b):
    if len(a) != len(b):
        return False
    if not a:
        return True
    Ma, Mb = sp.Matrix(a), sp.Matrix(b)
    return Ma.rank() == Mb.rank() == sp.Matrix.vstack(Ma, Mb).rank() and \
        _lattice_contains(a, b) and _lattice_contains(b, a)


def _lattice_contains(gens, vecs):
    r = len(gens[0])
    M = [[gens[j][i] for j in range(len(gens))] for i in range(r)]
    for v in vecs:
        t0, _ = integer_solutions(M, list(v), len(gens))
        if t0 is None:
            return False
    return True


def _irreducible(p, vars):
    """Irreducible factors of p that involve vars, with multiplicities."""
    p = sp.expand(p)
    if p == 0:
        return []
    _, fl = sp.factor_list(p, *vars)
    out = []
    for f, m in fl:
        if f.free_symbols & set(vars):
            out.append((sp.expand(f), m))
    return out


# --------------------------------------------------------------------------
# spread and dispersion


@dataclass
class SpreadResult:
    finite_shifts: set
    lattices: list = field(default_factory=list)   # (offset, generators)
    complete: bool = True

    @property
    def lattice_generators(self):
        out = []
        for _, gens in self.lattices:
            for g in gens:
                if g not in out:
                    out.append(g)
        return out

    @property
    def is_finite(self):
        return not self.lattices


def spread(p, q, shift_vars, params=(), window=20, method="exact"):
    """{s : gcd(p(n+s), q(n)) != 1}.

    ``method="exact"`` solves the shift equation per pair of irreducible
    factors; ``method="scan"`` checks every shift with |s_i| <= window
    (modular prefilter, exact gcd confirmation).
    """
    vars = tuple(shift_vars)
    p, q = sp.expand(p), sp.expand(q)
    if p == 0 or q == 0:
        raise ValueError("spread of the zero polynomial")
    if method == "scan":
        return _spread_scan(p, q, vars, window)
    shifts, lattices = set(), []
    for g, _ in _irreducible(p, vars):
        for h, _ in _irreducible(q, vars):
            pts, lats = shift_equivalence(g, h, vars, window)
            shifts.update(pts)
            for off, gens in lats:
                shifts.add(tuple(off))
                lattices.append((tuple(off), list(gens)))
    return SpreadResult(shifts, lattices, True)


def _poly_arrays(p, vars):
    P = sp.Poly(p, *vars)
    exps, coeffs = [], []
    for m, c in P.terms():
        c = sp.Rational(c)
        exps.append(list(m))
        coeffs.append((int(c.p) * pow(int(c.q), -1, _kernels.PRIME)) % _kernels.PRIME)
    return np.array(exps, dtype=np.int64).reshape(-1, len(vars)), np.array(coeffs, dtype=np.int64)


def _spread_scan(p, q, vars, window, seed=12345):
    r = len(vars)
    shifts = np.array(list(itertools.product(range(-window, window + 1), repeat=r)), dtype=np.int64)
    rng = random.Random(seed)
    # the kernel shifts q along the line; spread needs gcd(p(n+s), q), i.e. q shifted by -s
    qe, qc = _poly_arrays(q, vars)
    pe, pc = _poly_arrays(p, vars)
    point = np.array([rng.randrange(1, 10**6) for _ in vars], dtype=np.int64)
    direction = np.array([rng.randrange(1, 10**6) for _ in vars], dtype=np.int64)
    mask = _kernels.spread_scan(qe, qc, pe, pc, shifts, point, direction)
    found = set()
    for s in shifts[mask]:
        s = tuple(int(x) for x in s)
        if sp.gcd(_shift(p, s, vars), q) .free_symbols & set(vars):
            found.add(s)
    return SpreadResult(found, [], False)


def dispersion(p, q, shift_vars, params=(), window=20):
    """Componentwise maximum of the spread, or INFINITE."""
    sr = spread(p, q, shift_vars, params, window)
    if sr.lattices:
        return INFINITE
    if not sr.finite_shifts:
        return None
    r = len(tuple(shift_vars))
    return tuple(max(s[i] for s in sr.finite_shifts) for i in range(r))


# --------------------------------------------------------------------------
# denominator bounds


@dataclass
class DenominatorBound:
    aperiodic: sp.Expr
    periodic_known: sp.Expr
    candidate_factors: list
    unknown_lattice: list
    complete: bool

    @property
    def denominator(self):
        return sp.expand(self.aperiodic * self.periodic_known)

    def to_text(self):
        P = ", ".join(ex.to_text(f) for f in self.candidate_factors)
        V = ", ".join("(" + ",".join(map(str, v)) + ")" for v in self.unknown_lattice)
        return (f"d_a: {ex.to_text(sp.factor(self.aperiodic))}\n"
                f"d_p: {ex.to_text(sp.factor(self.periodic_known))}\n"
                f"P: {{{P}}}\nV: {{{V}}}\ncomplete: {str(self.complete).lower()}")


def _unique_extremes(S, w):
    vals = [sum(a * b for a, b in zip(s, w)) for s in S]
    hi, lo = max(vals), min(vals)
    if vals.count(hi) != 1 or vals.count(lo) != 1:
        return None
    return S[vals.index(hi)], S[vals.index(lo)]


def _directions(S, r, reach=3):
    cands = []
    for v in itertools.product(range(-reach, reach + 1), repeat=r):
        if any(v) and _canon_vec(v) == tuple(v):
            cands.append(tuple(v))
    cands.sort(key=lambda v: (sum(abs(x) for x in v), [-x for x in v]))
    good = [w for w in cands if _unique_extremes(S, w) is not None]
    basis = []
    for w in good:
        if sp.Matrix(basis + [list(w)]).rank() > len(basis):
            basis.append(list(w))
        if len(basis) == r:
            break
    if len(basis) < r:
        raise DegenerateStructureSet("no set of directions with unique corners spans the shift space")
    return [tuple(b) for b in basis], good


def _hull_edges_2d(S):
    pts = sorted(set(S))
    if len(pts) < 2:
        return []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    edges = set()
    for a, b in zip(hull, hull[1:] + hull[:1]):
        if a != b:
            edges.add(_canon_vec((b[0] - a[0], b[1] - a[1])))
    return sorted(edges)


def _free_directions(S, r):
    """Directions along which corner arguments give no information."""
    if r == 1:
        return []
    if r == 2:
        return _hull_edges_2d(S)
    out = set()
    for a, b in itertools.combinations(S, 2):
        out.add(_canon_vec([x - y for x, y in zip(b, a)]))
    return sorted(out)


def _orbits(factors, vars):
    """Group irreducible factors into shift orbits: rep -> list of (t, factor, mult)."""
    reps = []
    for f, m in factors:
        placed = False
        for rep in reps:
            pts, lats = shift_equivalence(rep[0], f, vars)
            if pts:
                rep[1].append((pts[0], f, m))
                placed = True
                break
            if lats:
                rep[1].append((lats[0][0], f, m))
                placed = True
                break
        if not placed:
            reps.append((f, [(tuple([0] * len(vars)), f, m)]))
    return reps


def _box_points(W, lo, hi, r):
    """Integer points t with lo_w <= <t, w> <= hi_w for the r independent rows of W."""
    M = sp.Matrix(W)
    Minv = M.inv()
    corners = []
    for choice in itertools.product(*[(l, h) for l, h in zip(lo, hi)]):
        corners.append(Minv * sp.Matrix(choice))
    box = [(int(sp.floor(min(c[i] for c in corners))), int(sp.ceiling(max(c[i] for c in corners))))
           for i in range(r)]
    for t in itertools.product(*[range(a, b + 1) for a, b in box]):
        yield t


def denominator_bound(eq: PLDE, params=None) -> DenominatorBound:
    vars = tuple(eq.vars)
    r = len(vars)
    S = eq.structure_set
    if len(S) < 2:
        raise DegenerateStructureSet("the structure set has a single shift")
    basis, dirs = _directions(S, r)
    corner = {}
    for w in dirs:
        smax, smin = _unique_extremes(S, w)
        corner[w] = (_shift(eq.terms[smax], [-x for x in smax], vars),
                     _shift(eq.terms[smin], [-x for x in smin], vars))
    factors = {}
    for A, B in corner.values():
        for f, m in _irreducible(A, vars) + _irreducible(B, vars):
            key = sp.srepr(sp.Poly(f, *vars).monic().as_expr())
            if key not in factors or factors[key][1] < m:
                factors[key] = (f, m)
    aper, per = [], []
    for f, m in factors.values():
        (per if stabilizer(f, vars) else aper).append((f, m))

    d_a = sp.Integer(1)
    for rep, members in _orbits(aper, vars):
        lo, hi, ok = [], [], True
        mult = max(m for _, _, m in members)
        for w in dirs:
            A, B = corner[w]
            Amax = _orbit_hits(rep, A, vars)
            Bmin = _orbit_hits(rep, B, vars)
            if not Amax or not Bmin:
                ok = False
                break
            U = max(sum(a * b for a, b in zip(t, w)) for t in Amax)
            L = min(sum(a * b for a, b in zip(t, w)) for t in Bmin)
            if L > U:
                ok = False
                break
            lo.append(L)
            hi.append(U)
        if not ok:
            continue
        bidx = [dirs.index(b) for b in basis]
        for t in _box_points(basis, [lo[i] for i in bidx], [hi[i] for i in bidx], r):
            if all(lo[k] <= sum(a * b for a, b in zip(t, w)) <= hi[k] for k, w in enumerate(dirs)):
                d_a *= _shift(rep, t, vars)**mult

    d_p = sp.Integer(1)
    P, V = [], []
    free = _free_directions(S, r)
    for rep, members in _orbits(per, vars):
        L = stabilizer(rep, vars)
        mult = max(m for _, _, m in members)
        resolved = False
        if r == 2 and len(L) == 1:
            v = L[0]
            w = _canon_vec((-v[1], v[0]))
            if _unique_extremes(S, w) is not None:
                smax, smin = _unique_extremes(S, w)
                A = _shift(eq.terms[smax], [-x for x in smax], vars)
                B = _shift(eq.terms[smin], [-x for x in smin], vars)
                Amax, Bmin = _orbit_hits(rep, A, vars), _orbit_hits(rep, B, vars)
                if Amax and Bmin:
                    U = max(sum(a * b for a, b in zip(t, w)) for t in Amax)
                    Lo = min(sum(a * b for a, b in zip(t, w)) for t in Bmin)
                    for c in range(Lo, U + 1):
                        t0, _ = integer_solutions([list(w)], [c], 2)
                        d_p *= _shift(rep, t0, vars)**mult
                resolved = True
        if not resolved:
            P.append(rep)
            for g in L:
                if g not in V:
                    V.append(g)
    for v in free:
        if v not in V:
            V.append(v)
    complete = not P and not V and not per
    return DenominatorBound(sp.expand(d_a), sp.expand(d_p), P, V, complete)


def _orbit_hits(rep, poly, vars):
    """Shifts t such that rep(n+t) divides poly (up to units)."""
    out = []
    for f, _ in _irreducible(poly, vars):
        pts, lats = shift_equivalence(rep, f, vars)
        out += pts
        out += [off for off, _ in lats]
    return out


# --------------------------------------------------------------------------
# objects and shift rules


def _harm_shift(word, base, delta):
    """S_word(base + delta) in terms of S_*(base) for positive words."""
    if not word:
        return sp.Integer(1)
    w1 = word[0]
    if w1 < 0:
        raise ValueError("alternating sums need (-1)^n as an object; not supported in shift rules")
    rest = tuple(word[1:])
    out = ex.S(list(word), base)
    if delta >= 0:
        for j in range(1, delta + 1):
            out += _harm_shift(rest, base, j) / (base + j)**w1
    else:
        for j in range(delta + 1, 1):
            out -= _harm_shift(rest, base, j) / (base + j)**w1
    return out


def _rewrite_atom(node, objects):
    """Express a shifted object through the unshifted objects, or None."""
    if isinstance(node, ex.HarmonicS):
        for o in objects:
            if isinstance(o, ex.HarmonicS) and o.word == node.word:
                d = sp.expand(node.arg - o.arg)
                if d.is_Integer:
                    return _harm_shift(node.word, o.arg, int(d))
        return None
    if isinstance(node, ex.Poch):
        a, c = node.args
        for o in objects:
            if isinstance(o, ex.Poch) and sp.expand(o.args[0] - a) == 0:
                d = sp.expand(c - o.args[1])
                if d.is_Integer:
                    d = int(d)
                    base = a + o.args[1]
                    f = sp.Integer(1)
                    if d >= 0:
                        for j in range(d):
                            f *= base + j
                    else:
                        for j in range(1, -d + 1):
                            f /= base - j
                    return o * f
        return None
    if isinstance(node, ex.Fact):
        return _rewrite_atom(ex.Poch(sp.Integer(1), node.args[0]), objects)
    return None


def rewrite_shifted(e, objects):
    """Rewrite every object atom at a shifted argument (shift rules)."""
    objects = list(objects)
    keep = set(objects)

    def rep(node):
        if node in keep:
            return node
        out = _rewrite_atom(node, objects)
        if out is None:
            raise ValueError(f"{ex.to_text(node)} is not a shift of a listed object")
        return out

    atoms = [a for a in sp.sympify(e).atoms(ex.HarmonicS, ex.Poch, ex.Fact) if a not in keep]
    if not atoms:
        return e
    return sp.sympify(e).xreplace({a: rep(a) for a in atoms})


def validate_objects(objects, eq: PLDE):
    """Objects must be closed under the structure-set shifts."""
    keep = set(objects)
    missing = set()
    for s in eq.structure_set:
        for o in objects:
            shifted = o.xreplace({v: v + k for v, k in zip(eq.vars, s) if k})
            try:
                out = rewrite_shifted(shifted, objects)
            except ValueError as err:
                raise ValueError(f"objects are not shift-stable: {err}") from None
            for a in out.atoms(ex.HarmonicS, ex.Poch, ex.Fact):
                if a not in keep:
                    missing.add(ex.to_text(a))
    if missing:
        raise ValueError("objects are not shift-stable; missing " + ", ".join(sorted(missing)))


# --------------------------------------------------------------------------
# ansatz and solving


@dataclass
class AnsatzSpec:
    degree_bound: int = 2
    objects: list = field(default_factory=list)
    insert_den_factor: sp.Expr = sp.Integer(1)
    symbols: list = field(default_factory=list)
    initial_values: list = field(default_factory=list)   # [(point tuple, value)]
    symbol_degree: int = 1
    random_seed: int = 20240601
    object_degree: int = 2
    combined_degree: bool = True


@dataclass
class SolutionSet:
    particular: sp.Expr | None
    homogeneous_basis: list
    certified: bool
    denominator: sp.Expr = sp.Integer(1)
    numerators: list = field(default_factory=list)
    particular_numerator: sp.Expr | None = None
    bound: DenominatorBound | None = None
    matched: sp.Expr | None = None

    def to_text(self):
        lines = [f"denominator: {ex.to_text(sp.factor(self.denominator))}"]
        if self.particular is not None:
            lines.append(f"particular: {ex.to_text(self.particular)}")
        for b in self.homogeneous_basis:
            lines.append(f"homogeneous: {ex.to_text(b)}")
        if self.matched is not None:
            lines.append(f"matched: {ex.to_text(self.matched)}")
        lines.append(f"certified: {str(self.certified).lower()}")
        return "\n".join(lines)


def _monomials(vars, deg):
    out = []
    for d in range(deg + 1):
        for c in itertools.combinations_with_replacement(vars, d):
            out.append(sp.Mul(*c))
    return out


def _ansatz_terms(vars, spec):
    prods = [sp.Integer(1)]
    for d in range(1, spec.object_degree + 1):
        for c in itertools.combinations_with_replacement(spec.objects, d):
            prods.append(sp.Mul(*c))
    terms = []
    for pi in prods:
        od = sum(sp.Poly(pi, *spec.objects).total_degree() for _ in [0]) if spec.objects and pi != 1 else 0
        deg = spec.degree_bound - od if spec.combined_degree else spec.degree_bound
        if deg < 0:
            continue
        for m in _monomials(vars, deg):
            terms.append((m, pi))
    return terms


class _Frac:
    """Exact evaluation of a rational function at integer points."""

    def __init__(self, e, vars):
        num, den = sp.fraction(sp.together(sp.sympify(e)))
        self.num = self._terms(num, vars)
        self.den = self._terms(den, vars)

    @staticmethod
    def _terms(p, vars):
        P = sp.Poly(sp.expand(p), *vars)
        return [(m, Fraction(int(sp.Rational(c).p), int(sp.Rational(c).q))) for m, c in P.terms()]

    @staticmethod
    def _ev(terms, pt):
        acc = Fraction(0)
        for m, c in terms:
            t = c
            for x, e in zip(pt, m):
                if e:
                    t *= x**e
            acc += t
        return acc

    def __call__(self, pt):
        d = self._ev(self.den, pt)
        if d == 0:
            raise ZeroDivisionError
        return self._ev(self.num, pt) / d


def _object_dummies(objects):
    return [sp.Dummy(f"o{k}") for k in range(len(objects))]


def _split_objects(e, objects, dums):
    """{object-monomial exponent tuple: rational coefficient} for an expression polynomial in objects."""
    e = sp.sympify(e).xreplace(dict(zip(objects, dums)))
    if not dums:
        return {(): sp.together(e)}
    num, den = sp.fraction(sp.together(e))
    if den.free_symbols & set(dums):
        raise ValueError("objects appear in a denominator")
    P = sp.Poly(sp.expand(num), *dums)
    return {m: c / den for m, c in P.terms()}


def _residual(eq, y, objects):
    """sum_s a_s N_s y - rhs with object shifts rewritten."""
    out = sp.Integer(0)
    for s, a in eq.terms.items():
        ys = sp.sympify(y).xreplace({v: v + k for v, k in zip(eq.vars, s) if k})
        out += a * rewrite_shifted(ys, objects)
    return out - eq.rhs


def verify_solution(eq, y, objects=(), homogeneous=False):
    objects = list(objects)
    dums = _object_dummies(objects)
    target = PLDE(eq.vars, eq.terms, 0, eq.func) if homogeneous else eq
    res = _residual(target, y, objects).xreplace(dict(zip(objects, dums)))
    return sp.cancel(sp.together(res)) == 0


def _modp(fr):
    P = _kernels.PRIME
    den = fr.denominator % P
    if den == 0:
        return None
    return (fr.numerator % P) * pow(den, P - 2, P) % P


def _select_rows(rows, rhs):
    """Indices of rows of [A | b] independent modulo a large prime."""
    mat, keep = [], []
    for i, (row, b) in enumerate(zip(rows, rhs)):
        mp = [_modp(x) for x in row] + [_modp(b)]
        if any(x is None for x in mp):
            continue
        mat.append(mp)
        keep.append(i)
    if not mat:
        return []
    idx = _kernels.modp_independent_rows(np.array(mat, dtype=np.int64))
    return [keep[i] for i in idx]


def _random_point(rng, r):
    return tuple(rng.randint(10**3, 10**6) for _ in range(r))


def solve_plde(eq: PLDE, spec: AnsatzSpec | None = None, bound: DenominatorBound | None = None) -> SolutionSet:
    spec = spec or AnsatzSpec()
    vars = tuple(eq.vars)
    objects = list(spec.objects)
    if objects:
        validate_objects(objects, eq)
    if bound is None:
        bound = denominator_bound(eq)
    D = sp.expand(bound.denominator * sp.sympify(spec.insert_den_factor))
    terms = _ansatz_terms(vars, spec)
    dums = _object_dummies(objects)
    params = sorted((set().union(*[c.free_symbols for c in eq.terms.values()]) | eq.rhs.free_symbols
                     | D.free_symbols) - set(vars) - set().union(*[o.free_symbols for o in objects] or [set()]),
                    key=str)
    params = [p for p in params if p not in vars]

    # symbolic pieces: for each shift s and object product pi, N_s pi rewritten
    shift_parts = {}
    for s in eq.terms:
        sub = {v: v + k for v, k in zip(vars, s) if k}
        for _, pi in terms:
            key = (s, pi)
            if key in shift_parts:
                continue
            shift_parts[key] = _split_objects(rewrite_shifted(pi.xreplace(sub), objects), objects, dums)
    rhs_parts = _split_objects(eq.rhs, objects, dums)

    # per unknown j and object monomial mu: rational function X_{j,mu}
    X = []
    mus = set(rhs_parts)
    for m, pi in terms:
        contrib = {}
        for s, a in eq.terms.items():
            sub = {v: v + k for v, k in zip(vars, s) if k}
            base = a * m.xreplace(sub) / D.xreplace(sub)
            for mu, c in shift_parts[(s, pi)].items():
                contrib[mu] = contrib.get(mu, 0) + base * c
        X.append(contrib)
        mus |= set(contrib)
    mus = sorted(mus)
    n_unk = len(terms)

    rng = random.Random(spec.random_seed)
    symbolic = bool(params)
    if symbolic:
        pvals = {p: sp.Integer(rng.randint(10**3, 10**6)) for p in params}
    evals = {}

    def compile_(e):
        e = sp.sympify(e)
        if symbolic:
            return e
        return _Frac(e, vars)

    Xc = [{mu: compile_(c) for mu, c in row.items()} for row in X]
    Rc = {mu: compile_(c) for mu, c in rhs_parts.items()}

    def rows_at(pt):
        out_rows, out_rhs = [], []
        for mu in mus:
            if symbolic:
                sub = dict(zip(vars, pt))
                row = [sp.cancel(Xc[j][mu].xreplace(sub)) if mu in Xc[j] else sp.Integer(0) for j in range(n_unk)]
                b = sp.cancel(Rc[mu].xreplace(sub)) if mu in Rc else sp.Integer(0)
            else:
                row = [Xc[j][mu](pt) if mu in Xc[j] else Fraction(0) for j in range(n_unk)]
                b = Rc[mu](pt) if mu in Rc else Fraction(0)
            out_rows.append(row)
            out_rhs.append(b)
        return out_rows, out_rhs

    target = n_unk + 20
    A, b = [], []
    attempts = 0
    for attempt in range(4):
        while len(A) < target and attempts < 50 * target:
            attempts += 1
            pt = _random_point(rng, len(vars))
            try:
                rr, bb = rows_at(pt)
            except ZeroDivisionError:
                continue
            A += rr
            b += bb
        sol = _solve_rows(A, b, symbolic, pvals if symbolic else None)
        if sol is None:
            raise NoSolutionInAnsatz("no solution within the ansatz", bound)
        part, null = sol
        ok, basis, particular = _certify(eq, terms, D, objects, part, null)
        if ok:
            break
        target += n_unk + 20
    else:
        raise UnverifiedSolution("constraint system kept admitting unverifiable solutions")

    def build(vec):
        num = sum((c * m * pi for c, (m, pi) in zip(vec, terms)), sp.Integer(0))
        return sp.expand(num)

    numerators = [_normalize_num(build(v), vars, objects) for v in basis]
    part_num = build(particular) if particular is not None else None
    result = SolutionSet(
        particular=(part_num / D) if part_num is not None else None,
        homogeneous_basis=[n / D for n in numerators],
        certified=True,
        denominator=D,
        numerators=numerators,
        particular_numerator=part_num,
        bound=bound,
    )
    if not result.homogeneous_basis and result.particular is None:
        raise NoSolutionInAnsatz("only the zero solution lies in the ansatz", bound)
    if spec.initial_values:
        result.matched = match_initial_values(result, spec.initial_values, vars)
    return result


def _normalize_num(num, vars, objects=()):
    """Scale to a primitive integer numerator with positive leading coefficient."""
    num = sp.expand(num)
    if num == 0:
        return num
    dums = _object_dummies(objects)
    back = dict(zip(dums, objects))
    num = num.xreplace(dict(zip(objects, dums)))
    syms = dums + sorted(num.free_symbols - set(dums), key=str)
    P = sp.Poly(num, *syms) if syms else None
    if P is None:
        return sp.Integer(1)
    cs = P.coeffs()
    if all(sp.sympify(c).is_Rational for c in cs):
        den = _ilcm([sp.Rational(c).q for c in cs])
        g = _igcd([int(sp.Rational(c) * den) for c in cs])
        scale = sp.Rational(den, g)
        if P.LC() < 0:
            scale = -scale
        return sp.expand(num * scale).xreplace(back)
    return sp.expand(sp.cancel(num / P.LC())).xreplace(back)


def _solve_rows(A, b, symbolic, pvals):
    if not A:
        return None
    if symbolic:
        numeric_rows = [[sp.Rational(x.xreplace(pvals)) for x in row] for row in A]
        numeric_rhs = [sp.Rational(x.xreplace(pvals)) for x in b]
        fr = lambda q: Fraction(int(q.p), int(q.q))
        idx = _select_rows([[fr(x) for x in r] for r in numeric_rows], [fr(x) for x in numeric_rhs])
        try:
            sol = solve_linear([A[i] for i in idx], [b[i] for i in idx], check=False)
        except NoSolution:
            try:
                sol = solve_linear(A, b, check=False)
            except NoSolution:
                return None
        return [sp.cancel(x) for x in sol.particular], [[sp.cancel(x) for x in v] for v in sol.nullspace]
    idx = _select_rows(A, b)
    try:
        sol = solve_linear_qq([A[i] for i in idx], [b[i] for i in idx])
    except NoSolution:
        try:
            sol = solve_linear_qq(A, b)
        except NoSolution:
            return None
    conv = lambda q: sp.Rational(q.numerator, q.denominator)
    return [conv(x) for x in sol.particular], [[conv(x) for x in v] for v in sol.nullspace]


def _certify(eq, terms, D, objects, part, null):
    """Exact substitution check of the particular solution and every basis vector."""
    def y_of(vec):
        num = sum((c * m * pi for c, (m, pi) in zip(vec, terms)), sp.Integer(0))
        return num / D

    inhom = eq.rhs != 0
    particular = part if inhom else None
    if inhom and not verify_solution(eq, y_of(part), objects):
        return False, [], None
    for v in null:
        if not verify_solution(eq, y_of(v), objects, homogeneous=True):
            return False, [], None
    return True, null, particular


def match_initial_values(sol: SolutionSet, initial, vars):
    """Combine particular + basis to fit initial values exactly."""
    k = len(sol.homogeneous_basis)
    lam = sp.symbols(f"_lam0:{max(k, 1)}")[:k]
    general = (sol.particular if sol.particular is not None else 0) + \
        sum((l * h for l, h in zip(lam, sol.homogeneous_basis)), sp.Integer(0))
    rows, rhs = [], []
    for pt, val in initial:
        sub = dict(zip(vars, pt)) if not isinstance(pt, dict) else pt
        try:
            e = sp.sympify(general).xreplace({sp.Symbol(str(k_)) if isinstance(k_, str) else k_: v for k_, v in sub.items()})
            e = e.replace(lambda z: isinstance(z, (ex.HarmonicS, ex.Poch, ex.Fact)),
                          lambda z: _eval_atom(z))
            e = sp.cancel(e)
        except ZeroDivisionError:
            continue
        if e.has(sp.zoo, sp.nan):
            continue
        rows.append([sp.expand(e).coeff(l) for l in lam])
        rhs.append(sp.sympify(val) - e.subs({l: 0 for l in lam}))
    if not rows:
        raise NoSolution("no usable initial values")
    if k == 0:
        if any(sp.cancel(x) != 0 for x in rhs):
            raise NoSolution("particular solution contradicts the initial values")
        return sol.particular
    try:
        ls = solve_linear(rows, rhs)
    except NoSolution:
        raise NoSolution("initial values are inconsistent with the solution space") from None
    vals = dict(zip(lam, ls.particular))
    return sp.cancel(general.xreplace(vals)) if not general.has(ex.HarmonicS, ex.Poch, ex.Fact) \
        else sp.expand(general.xreplace(vals))


def _eval_atom(z):
    v = ex.evaluate(z, {})
    return sp.Rational(v.numerator, v.denominator)


# --------------------------------------------------------------------------
# hypergeometric prefactor


def _shift_quotient(fac, s, vars):
    """N_s fac / fac as a rational function."""
    from .hypsolve import HypSystem
    try:
        R = HypSystem.from_summand(fac, vars).ratios
    except ValueError as err:
        raise NotHypergeometric(str(err)) from None
    q = sp.Integer(1)
    cur = [0] * len(vars)
    for i, k in enumerate(s):
        step = 1 if k > 0 else -1
        for _ in range(abs(k)):
            if step > 0:
                q *= R[i].xreplace({v: v + c for v, c in zip(vars, cur) if c})
                cur[i] += 1
            else:
                cur[i] -= 1
                q /= R[i].xreplace({v: v + c for v, c in zip(vars, cur) if c})
    return sp.cancel(q)


@dataclass
class PrefactorResult:
    equation: PLDE
    content: sp.Expr
    factor: sp.Expr


def expand_hyperg_pref(eq: PLDE, fac) -> PrefactorResult:
    """Equation for y' where y = fac * y'."""
    fac = sp.sympify(fac)
    vars = tuple(eq.vars)
    if fac == 1:
        return PrefactorResult(eq, sp.Integer(1), fac)
    terms = {s: a * _shift_quotient(fac, s, vars) for s, a in eq.terms.items()}
    rhs = sp.cancel(eq.rhs / fac) if eq.rhs != 0 else sp.Integer(0)
    if eq.rhs != 0 and (rhs.has(ex.Poch, ex.Fact, ex.Gamma) or not rhs.is_rational_function(*vars)):
        raise NotHypergeometric("right-hand side is not a rational multiple of the prefactor")
    dens = [sp.fraction(sp.together(c))[1] for c in list(terms.values()) + [rhs]]
    L = sp.lcm_list(dens) if len(dens) > 1 else dens[0]
    terms = {s: sp.expand(sp.cancel(c * L)) for s, c in terms.items()}
    rhs = sp.expand(sp.cancel(rhs * L))
    polys = [c for c in terms.values()] + ([rhs] if rhs != 0 else [])
    g = sp.gcd_list(polys) if len(polys) > 1 else polys[0]
    g = sp.factor(g)
    terms = {s: sp.expand(sp.cancel(c / g)) for s, c in terms.items()}
    rhs = sp.expand(sp.cancel(rhs / g))
    return PrefactorResult(PLDE(vars, terms, rhs, eq.func), g, fac)


# --------------------------------------------------------------------------
# eps-expansion of solutions


@dataclass
class ExpansionResult:
    coefficients: dict
    equations: list            # (order, eps-free PLDE with its right-hand side)
    eps: sp.Symbol

    def to_expr(self):
        return sum((c * self.eps**k for k, c in sorted(self.coefficients.items())), sp.Integer(0))

    def taus(self):
        return [eq.rhs for _, eq in self.equations]


def _eps_coeffs(e, eps, lo, hi):
    """Coefficients of eps^lo..eps^hi of a rational function of eps."""
    from .epsex import _series_rational
    s = _series_rational(sp.sympify(e), eps, hi)
    return {k: (s.relative(k) if k >= s.order else sp.Integer(0)) for k in range(lo, hi + 1)}


def solve_expand(eq: PLDE, eps, l_min: int, l_max: int, spec: AnsatzSpec, initial=None) -> ExpansionResult:
    """Laurent coefficients y_{l_min}..y_{l_max} of the solution, order by order.

    ``initial`` is a list of (point, value) with values rational in eps (or
    dicts order -> value).
    """
    vars = tuple(eq.vars)
    initial = initial if initial is not None else spec.initial_values
    split = {}
    top = 0
    for s, a in eq.terms.items():
        P = sp.Poly(a, eps)
        split[s] = {m[0]: c for m, c in P.terms()}
        top = max(top, P.degree())
    if all(0 not in d for d in split.values()):
        raise ValueError("all coefficients vanish at eps=0; factor out the overall eps power first")
    rhs_series = _eps_coeffs(eq.rhs, eps, l_min, l_max) if eq.rhs != 0 else {}
    iv = []
    for pt, val in initial or []:
        iv.append((pt, val if isinstance(val, dict) else _eps_coeffs(val, eps, l_min, l_max)))
    objects = list(spec.objects)
    coeffs, eqs = {}, []
    base = {s: d.get(0, sp.Integer(0)) for s, d in split.items()}
    base = {s: c for s, c in base.items() if c != 0}
    for order in range(l_min, l_max + 1):
        tau = rhs_series.get(order, sp.Integer(0))
        for j in range(1, top + 1):
            prev = coeffs.get(order - j)
            if prev is None or prev == 0:
                continue
            for s, d in split.items():
                if j in d:
                    ys = sp.sympify(prev).xreplace({v: v + k for v, k in zip(vars, s) if k})
                    tau -= d[j] * rewrite_shifted(ys, objects)
        tau = sp.cancel(sp.together(tau)) if not tau.has(ex.HarmonicS) else sp.together(tau)
        num, den = sp.fraction(sp.together(tau))
        terms = {s: sp.expand(c * den) for s, c in base.items()}
        step = PLDE(vars, terms, sp.expand(num), eq.func)
        shown = PLDE(vars, base, tau, eq.func)
        eqs.append((order, shown))
        sub_spec = AnsatzSpec(spec.degree_bound, objects, spec.insert_den_factor, spec.symbols,
                              [(pt, d.get(order, sp.Integer(0))) for pt, d in iv],
                              spec.symbol_degree, spec.random_seed, spec.object_degree, spec.combined_degree)
        try:
            sol = solve_plde(step, sub_spec)
        except NoSolution as err:
            raise NoSolution(f"order eps^{order}: {err}") from None
        if sol.matched is None:
            if sol.homogeneous_basis and iv:
                raise NoSolution(f"order eps^{order}: initial values did not fix the solution")
            y = sol.particular if sol.particular is not None else sp.Integer(0)
        else:
            y = sol.matched
        coeffs[order] = sp.factor(y) if not sp.sympify(y).has(ex.HarmonicS) else y
    return ExpansionResult(coeffs, eqs, eps)


__all__ = [
    "INFINITE", "DegenerateStructureSet", "NoSolutionInAnsatz", "UnverifiedSolution", "NotHypergeometric",
    "SpreadResult", "spread", "dispersion", "stabilizer", "is_periodic", "shift_equivalence",
    "integer_solutions", "DenominatorBound", "denominator_bound", "AnsatzSpec", "SolutionSet",
    "solve_plde", "verify_solution", "match_initial_values", "rewrite_shifted", "validate_objects",
    "PrefactorResult", "expand_hyperg_pref", "ExpansionResult", "solve_expand",
]
