"""Series catalog, classifier, convergence data and matching maps.

Data lives in plain text files (see data/README in the repository README):

    catalog_<arity>.txt   label | arity | summand | parameters | convergence
    families.txt          general operator families (configparser sections)
    mconditions.txt       label | family | arity | name -> value; ...

The directory can be overridden with HYPERKERNEL_DATA.
"""

from __future__ import annotations

import configparser
import itertools
import os
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import sympy as sp

from . import expr as ex
from .hypsolve import HypSystem, pochhammer_solution
from .taylor import DiffOperator, find_re


class Unknown(LookupError):
    """No catalog entry matches the summand."""


class NoData(LookupError):
    """No convergence conditions are recorded for the label."""


INDICES = {1: sp.symbols("n", seq=True), 2: sp.symbols("m n"), 3: sp.symbols("m n p"),
           4: sp.symbols("m n p q")}
SERIES = {1: sp.symbols("x", seq=True), 2: sp.symbols("x y"), 3: sp.symbols("x y z"),
          4: sp.symbols("x y z t")}


def data_dir() -> Path:
    env = os.environ.get("HYPERKERNEL_DATA")
    return Path(env) if env else Path(__file__).with_name("data")


@dataclass
class CatalogEntry:
    label: str
    arity: int
    summand: sp.Expr | None
    params: tuple
    convergence: list | None      # sympy relationals, None when not recorded

    @property
    def indices(self):
        return INDICES[self.arity]

    @property
    def series_vars(self):
        return SERIES[self.arity]


def _split(line):
    return [part.strip() for part in line.split("|")]


def _parse_conditions(text):
    if text in ("-", ""):
        return None
    env = {s.name: s for s in SERIES[4]}
    return [sp.sympify(c.strip(), locals=env) for c in text.split(";") if c.strip()]


@lru_cache(maxsize=4)
def _load(path: str):
    entries = {}
    for f in sorted(Path(path).glob("catalog_*.txt")):
        for ln, line in enumerate(f.read_text().splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = _split(line)
            if len(parts) != 5:
                raise ValueError(f"{f.name}:{ln}: expected 5 fields, got {len(parts)}")
            label, arity, summand, params, conv = parts
            arity = int(arity)
            s = None if summand == "?" else ex.parse(summand)
            ps = () if params == "-" else tuple(sp.Symbol(p.strip()) for p in params.split(","))
            if s is not None:
                stray = s.free_symbols - set(ps) - set(INDICES[arity])
                if stray:
                    raise ValueError(f"{f.name}:{ln}: undeclared symbols {sorted(map(str, stray))}")
            entries[(label, arity)] = CatalogEntry(label, arity, s, ps, _parse_conditions(conv))
    return entries


def load_catalog(path=None):
    return _load(str(path or data_dir()))


def get(label, arity=None, path=None):
    cat = load_catalog(path)
    hits = [e for (l, a), e in cat.items() if l == label and (arity is None or a == arity)]
    if not hits:
        raise KeyError(f"no catalog entry {label!r}" + (f" of arity {arity}" if arity else ""))
    if len(hits) > 1:
        raise KeyError(f"label {label!r} exists for several arities; pass arity")
    return hits[0]


# --------------------------------------------------------------------------
# classification


@dataclass
class Classification:
    label: str
    arity: int
    binding: dict                 # catalog parameter -> expression
    permutation: tuple            # catalog index k corresponds to input index permutation[k]
    sign: tuple = ()              # (-1)^(sign . n) factor left over, as exponent vector mod 2


def _pattern(summand, indices):
    """Factors [(exponent, count vector, base)] plus a sign vector mod 2."""
    factors, sign = [], [0] * len(indices)
    idx = list(indices)
    for fac in sp.Mul.make_args(sp.sympify(summand)):
        base, e = fac.as_base_exp()
        if not fac.free_symbols & set(idx):
            continue  # constant with respect to the indices
        if not (e.is_Integer or base == -1):
            raise Unknown(f"factor {fac} is not a Pochhammer power")
        if base == -1:
            p = sp.Poly(e, *idx)
            for i, v in enumerate(idx):
                sign[i] = (sign[i] + int(p.coeff_monomial(v))) % 2
            continue
        if isinstance(base, ex.Fact):
            b, c = sp.Integer(1), base.args[0]
        elif isinstance(base, ex.Poch):
            b, c = base.args
        else:
            raise Unknown(f"factor {fac} is not a Pochhammer symbol")
        if b.free_symbols & set(idx):
            raise Unknown(f"Pochhammer base {b} depends on the indices")
        p = sp.Poly(c, *idx)
        if p.total_degree() > 1 or any(not x.is_Integer for x in p.coeffs()):
            raise Unknown(f"count {c} is not an integer linear form")
        k0 = int(p.coeff_monomial(1))
        vec = [int(p.coeff_monomial(v)) for v in idx]
        b = sp.expand(b + k0)  # (b)_{c+k0} = (b)_{k0} (b+k0)_c, constant dropped
        e = int(e)
        first = next((x for x in vec if x), 0)
        if first < 0:
            # (b)_c = (-1)^c / (1-b)_{-c}
            for i, x in enumerate(vec):
                sign[i] = (sign[i] + x * e) % 2
            b, vec, e = sp.expand(1 - b), [-x for x in vec], -e
        for _ in range(abs(e)):
            factors.append((1 if e > 0 else -1, tuple(vec), b))
    return factors, tuple(sign)


def _bind(cat_factors, in_factors, binding):
    if not cat_factors:
        return binding
    (e, vec, base), rest = cat_factors[0], cat_factors[1:]
    for j, (e2, vec2, base2) in enumerate(in_factors):
        if e2 != e or vec2 != vec:
            continue
        free = [s for s in base.free_symbols if s not in binding]
        if not free:
            if sp.expand(base.xreplace(binding) - base2) != 0:
                continue
            new = binding
        elif len(free) == 1:
            # normalized bases such as 1 - b: solve the linear relation for the parameter
            u, d = free[0], sp.Dummy()
            lhs = sp.expand(base.xreplace({**binding, u: d}) - base2)
            if sp.degree(lhs, d) != 1:
                continue
            new = {**binding, u: sp.expand(-lhs.coeff(d, 0) / lhs.coeff(d, 1))}
        else:
            continue
        out = _bind(rest, in_factors[:j] + in_factors[j + 1:], new)
        if out is not None:
            return out
    return None


def _classify_pfq(factors, sign):
    if any(sign):
        return None
    top = [b for e, v, b in factors if e > 0]
    bot = [b for e, v, b in factors if e < 0]
    if 1 not in bot:
        return None
    bot = list(bot)
    bot.remove(sp.Integer(1))
    if any(v != (1,) for _, v, _ in factors):
        return None
    binding = {sp.Symbol(f"a{i + 1}"): b for i, b in enumerate(top)}
    binding.update({sp.Symbol(f"b{i + 1}"): b for i, b in enumerate(bot)})
    return Classification(f"{len(top)}F{len(bot)}", 1, binding, (0,))


def classify(summand, indices, path=None) -> Classification:
    indices = tuple(indices)
    r = len(indices)
    factors, sign = _pattern(summand, indices)
    if r == 1:
        out = _classify_pfq(factors, sign)
        if out is None:
            raise Unknown("summand is not of pFq type")
        return out
    key = lambda fs: sorted((e, v) for e, v, _ in fs)
    for (label, arity), entry in load_catalog(path).items():
        if arity != r or entry.summand is None:
            continue
        cfac, csign = _pattern(entry.summand, entry.indices)
        for perm in itertools.permutations(range(r)):
            # input index perm[k] plays the role of catalog index k
            mapped = [(e, tuple(v[perm[k]] for k in range(r)), b) for e, v, b in factors]
            if key(mapped) != key(cfac):
                continue
            binding = _bind(cfac, mapped, {})
            if binding is not None:
                s = tuple((sign[perm[k]] - csign[k]) % 2 for k in range(r))
                return Classification(label, arity, binding, perm, s)
    raise Unknown("no catalog entry matches")


# --------------------------------------------------------------------------
# convergence


def _pfq_counts(label):
    if len(label) >= 3 and "F" in label:
        p, _, q = label.partition("F")
        if p.isdigit() and q.isdigit():
            return int(p), int(q)
    return None


def convergence_region(label, arity=None, path=None):
    """Inequalities in the series variables x, y, z, t; raises NoData."""
    pq = _pfq_counts(label)
    if pq is not None:
        p, q = pq
        if p <= q + 1:
            return [sp.Abs(SERIES[1][0]) < 1]
        raise NoData(f"{label} diverges away from the origin")
    try:
        entry = get(label, arity, path)
    except KeyError as exc:
        raise NoData(str(exc)) from None
    if entry.convergence is None:
        raise NoData(f"no convergence conditions recorded for {label}")
    return list(entry.convergence)


def converges_at(label, point, arity=None, path=None) -> bool:
    """Numeric test of the recorded conditions at a point {x: .., y: ..}."""
    conds = convergence_region(label, arity, path)
    env = {sp.Symbol(str(k)): sp.nsimplify(v) if isinstance(v, (int, Fraction)) else sp.Float(v, 30)
           for k, v in point.items()}
    return all(bool(c.xreplace(env)) for c in conds)


# --------------------------------------------------------------------------
# operator families and matching maps


@dataclass
class Family:
    name: str
    vars: tuple
    indices: tuple
    func: str
    operators: list

    def recurrences(self, bindings=None):
        out = []
        for op in self.operators:
            if bindings:
                op = DiffOperator(op.vars, {d: c.xreplace(bindings) for d, c in op.terms.items()})
            out.append(find_re(op, self.vars, self.indices, self.func))
        return out


def _syms(text):
    return tuple(sp.Symbol(s.strip()) for s in text.split(","))


def load_family(name, path=None) -> Family:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read(Path(path or data_dir()) / "families.txt")
    if name not in cp:
        raise KeyError(f"unknown operator family {name!r}")
    sec = cp[name]
    vars, idx, func = _syms(sec["vars"]), _syms(sec["indices"]), sec.get("func", "f")
    keys = sorted((k for k in sec if k.startswith("eq")), key=lambda k: int(k[2:]))
    ops = [DiffOperator.from_text(" ".join(sec[k].split()), vars, func) for k in keys]
    return Family(name, vars, idx, func, ops)


def family_names(path=None):
    cp = configparser.ConfigParser(interpolation=None)
    cp.read(Path(path or data_dir()) / "families.txt")
    return cp.sections()


@dataclass
class MatchingMap:
    label: str
    family: str
    arity: int
    bindings: dict = field(default_factory=dict)


def parse_map(text):
    out = {}
    for item in text.split(";"):
        if not item.strip():
            continue
        lhs, _, rhs = item.partition("->")
        val = ex.parse(rhs)
        for name in lhs.split(","):
            out[sp.Symbol(name.strip())] = val
    return out


def load_mconditions(path=None):
    maps = []
    for line in (Path(path or data_dir()) / "mconditions.txt").read_text().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        label, fam, arity, text = _split(line)
        maps.append(MatchingMap(label, fam, int(arity), parse_map(text)))
    return maps


@dataclass
class MatchReport:
    label: str
    pochhammer: sp.Expr
    classified: Classification | None
    ratios_equal: bool
    numeric_equal: bool
    unmapped: list

    @property
    def ok(self):
        return self.ratios_equal and self.numeric_equal and not self.unmapped


def check_matching(mmap: MatchingMap, points=12, seed=7, path=None) -> MatchReport:
    """Apply a matching map to its family and compare with the catalog summand.

    The family recurrences are solved into a product, converted to Pochhammer
    form and compared with the catalog entry (classifier binding if it
    recognises the result, identical parameter names otherwise) by shift
    quotients and by exact values at random points.
    """
    fam = load_family(mmap.family, path)
    pldes = fam.recurrences(mmap.bindings)
    sys = HypSystem.from_pldes(pldes)
    sol, poch = pochhammer_solution(sys)
    entry = get(mmap.label, mmap.arity, path)
    coeff_syms = set()
    for op in fam.operators:
        for c in op.terms.values():
            coeff_syms |= c.free_symbols - set(fam.vars)
    unmapped = sorted((str(s) for s in coeff_syms - set(mmap.bindings)))
    try:
        cls = classify(poch, fam.indices, path)
        binding = cls.binding if cls.label == mmap.label else {}
    except Unknown:
        cls, binding = None, {}
    target = entry.summand.xreplace(binding).xreplace(dict(zip(entry.indices, fam.indices)))
    ref = HypSystem.from_summand(target, fam.indices)
    ratios_equal = all(sp.cancel(a - b) == 0 for a, b in zip(sys.ratios, ref.ratios))
    rng = random.Random(seed)
    params = sorted(target.free_symbols - set(fam.indices), key=str)
    numeric_equal = True
    for _ in range(points):
        env = {p: sp.Rational(rng.randint(1, 40), rng.randint(41, 97)) for p in params}
        pt = {v: rng.randint(0, 4) for v in fam.indices}
        a = ex.evaluate(poch, {**env, **pt})
        b = ex.evaluate(target, {**env, **pt})
        if a != b:
            numeric_equal = False
            break
    return MatchReport(mmap.label, poch, cls, ratios_equal, numeric_equal, unmapped)
