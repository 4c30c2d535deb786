"""Command-line interface.

Every command prints a human-readable report followed by a ``[result]``
block of ``key = value`` lines in the expression grammar.  Exit codes: 0
success, 2 usage error, 3 parse error, 4 no solution within the ansatz,
5 undecidable or incomplete.
"""

from __future__ import annotations

import argparse
import re
import sys
from dataclasses import dataclass, field

import sympy as sp

from . import catalog, epsex, hypsolve, plde, taylor
from . import expr as ex
from .algebra import NoSolution, Undecidable

DEFAULT_SEED = 20240601

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NOSOL, EXIT_INCOMPLETE = 0, 2, 3, 4, 5

SECTIONS = ("system", "vars", "indices", "params", "options", "initial")


class JobError(Exception):
    """Malformed job file (reported with exit code 3)."""


# --------------------------------------------------------------------------
# job files


@dataclass
class JobFile:
    system: list = field(default_factory=list)      # (line number, text)
    vars: list = field(default_factory=list)
    indices: list = field(default_factory=list)
    params: list = field(default_factory=list)
    options: dict = field(default_factory=dict)
    initial: list = field(default_factory=list)     # (line number, text)
    name: str = "<job>"

    @classmethod
    def parse(cls, text, name="<job>"):
        job = cls(name=name)
        seen = set()
        current = None
        for no, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.fullmatch(r"\[(\w+)\]", line)
            if m:
                sec = m.group(1)
                if sec not in SECTIONS:
                    raise JobError(f"{name}:{no}: unknown section [{sec}]")
                if sec in seen:
                    raise JobError(f"{name}:{no}: duplicate section [{sec}]")
                seen.add(sec)
                current = sec
                continue
            if current is None:
                raise JobError(f"{name}:{no}: text before the first section")
            if current in ("vars", "indices", "params"):
                for tok in line.split(","):
                    tok = tok.strip()
                    if tok:
                        if not re.fullmatch(r"[A-Za-z_]\w*", tok):
                            raise JobError(f"{name}:{no}: bad symbol name {tok!r}")
                        getattr(job, current).append(sp.Symbol(tok))
            elif current == "options":
                key, eq, val = line.partition("=")
                if not eq:
                    raise JobError(f"{name}:{no}: expected key = value")
                job.options[key.strip()] = (no, val.strip())
            else:
                getattr(job, current).append((no, line))
        return job

    @classmethod
    def read(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.parse(fh.read(), path)
        except OSError as err:
            raise JobError(f"cannot read {path}: {err.strerror}") from None

    # helpers ------------------------------------------------------------

    def option(self, key, default=None):
        return self.options[key][1] if key in self.options else default

    def func(self):
        f = self.option("func")
        if f:
            return f
        for _, line in self.system:
            m = re.search(r"D\[\s*([A-Za-z_]\w*)", line) or re.search(r"([A-Za-z_]\w*)\[", line)
            if m:
                return m.group(1)
        return "f"

    def parse_expr(self, no, text, func=None, func_args=()):
        try:
            e = ex.parse(text, func, func_args)
        except ex.ParseError as err:
            raise JobError(f"{self.name}:{no}: {err}") from None
        declared = set(self.vars) | set(self.indices) | set(self.params)
        declared |= {sp.Symbol(self.option("eps", "eps"))}
        free = {s for s in e.free_symbols if not _is_bound(e, s)}
        extra = free - declared
        if extra and (self.vars or self.indices):
            raise JobError(f"{self.name}:{no}: undeclared symbol(s) " + ", ".join(sorted(map(str, extra))))
        return e

    def ansatz(self, seed):
        get = self.option
        objects = []
        if get("objects"):
            no = self.options["objects"][0]
            objects = [self.parse_expr(no, t) for t in split_top(get("objects"))]
        insert = sp.Integer(1)
        if get("insert_den_factor"):
            insert = self.parse_expr(self.options["insert_den_factor"][0], get("insert_den_factor"))
        spec = plde.AnsatzSpec(
            degree_bound=int(get("degree_bound", get("degree", 2))),
            objects=objects,
            insert_den_factor=insert,
            symbols=list(self.params),
            initial_values=[],
            symbol_degree=int(get("symbol_degree", 1)),
            random_seed=int(seed),
            object_degree=int(get("object_degree", 2)),
        )
        return spec

    def initial_values(self, vars):
        out = []
        for no, line in self.initial:
            lhs, arrow, rhs = line.partition("->")
            if not arrow:
                raise JobError(f"{self.name}:{no}: expected 'bindings -> value'")
            pt = dict(parse_bindings(lhs, f"{self.name}:{no}"))
            try:
                point = tuple(int(pt[str(v)]) for v in vars)
            except KeyError as err:
                raise JobError(f"{self.name}:{no}: missing binding for {err.args[0]}") from None
            out.append((point, self.parse_expr(no, rhs.strip())))
        return out


def _is_bound(e, s):
    for node in sp.preorder_traversal(e):
        if isinstance(node, (sp.Sum, sp.Product)) and node.limits[0][0] == s:
            return True
    return False


def split_top(text, sep=","):
    """Split at separators outside brackets."""
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == sep and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def parse_bindings(text, where="--at"):
    out = []
    for part in split_top(text):
        k, eq, v = part.partition("=")
        if not eq:
            raise JobError(f"{where}: expected name=value, got {part!r}")
        try:
            val = ex.parse(v.strip())
        except ex.ParseError as err:
            raise JobError(f"{where}: {err}") from None
        out.append((k.strip(), val))
    return out


# --------------------------------------------------------------------------
# output


class Report:
    def __init__(self, out):
        self.out = out
        self.result = []

    def line(self, text=""):
        self.out.write(text + "\n")

    def put(self, key, value):
        if isinstance(value, sp.Basic):
            value = ex.to_text(value)
        self.result.append((key, "; ".join(str(value).splitlines())))

    def finish(self):
        self.line("[result]")
        for k, v in self.result:
            self.line(f"{k} = {v}")


def _vec(v):
    return "(" + ",".join(str(x) for x in v) + ")"


def _symbols(text):
    return [sp.Symbol(t.strip()) for t in text.split(",") if t.strip()]


# --------------------------------------------------------------------------
# commands


def _des(job):
    f = job.func()
    if not job.vars:
        raise JobError(f"{job.name}: [vars] is required")
    ops = []
    for no, line in job.system:
        try:
            ops.append(taylor.DiffOperator.from_text(line, job.vars, f))
        except ex.ParseError as err:
            raise JobError(f"{job.name}:{no}: {err}") from None
    if not ops:
        raise JobError(f"{job.name}: [system] is empty")
    return ops, f


def _indices(job):
    if job.indices:
        if len(job.indices) != len(job.vars):
            raise JobError(f"{job.name}: [indices] and [vars] differ in length")
        return tuple(job.indices)
    return tuple(sp.symbols(" ".join(f"n{i + 1}" for i in range(len(job.vars))), seq=True))


def cmd_find_re(args, rep):
    job = JobFile.read(args.job)
    ops, f = _des(job)
    idx = _indices(job)
    for k, op in enumerate(ops, 1):
        eq = taylor.find_re(op, job.vars, idx, f)
        rep.line(eq.to_text())
        rep.put(f"re{k}", eq.to_text())
    return EXIT_OK


def cmd_solve_de(args, rep):
    job = JobFile.read(args.job)
    ops, f = _des(job)
    idx = _indices(job)
    eqs = [taylor.find_re(op, job.vars, idx, f) for op in ops]
    for eq in eqs:
        rep.line("recurrence: " + eq.to_text())
    system = hypsolve.HypSystem.from_pldes(eqs)
    sol = hypsolve.solve_first_order_system(system)
    prod = sol.to_expression()
    rep.line("product: " + ex.to_text(prod))
    rep.put("product", prod)
    rep.put("lambdas", _vec(sol.lambdas))
    try:
        poch = hypsolve.to_pochhammer(sol)
        rep.line("pochhammer: " + ex.to_text(poch))
        rep.put("pochhammer", poch)
    except (ValueError, NotImplementedError) as err:
        rep.line(f"pochhammer: unavailable ({err})")
    if sol.heuristic:
        rep.line("note: lambda choice used the heuristic scan")
        rep.put("heuristic", "true")
    return EXIT_OK


def cmd_find_de(args, rep):
    job = JobFile.read(args.job)
    if not job.indices:
        raise JobError(f"{job.name}: [indices] is required")
    series = tuple(job.vars) or None
    f = job.option("func", "f")
    k = 0
    for no, line in job.system:
        summand = job.parse_expr(no, line)
        system = hypsolve.HypSystem.from_summand(summand, job.indices)
        for op in taylor.find_de(system, series):
            k += 1
            rep.line(op.to_text(f) + " = 0")
            rep.put(f"de{k}", op.to_text(f))
    return EXIT_OK


def cmd_classify(args, rep):
    job = JobFile.read(args.job)
    if not job.indices:
        raise JobError(f"{job.name}: [indices] is required")
    no, line = job.system[0]
    summand = job.parse_expr(no, line)
    try:
        cl = catalog.classify(summand, job.indices)
    except catalog.Unknown as err:
        rep.line(f"unknown: {err}")
        rep.put("label", "unknown")
        return EXIT_INCOMPLETE
    rep.line(f"label: {cl.label}")
    rep.put("label", cl.label)
    for k in sorted(cl.binding, key=str):
        rep.line(f"  {k} -> {ex.to_text(cl.binding[k])}")
        rep.put(f"bind.{k}", cl.binding[k])
    rep.put("permutation", _vec(cl.permutation))
    if any(cl.sign):
        rep.put("sign", _vec(cl.sign))
    try:
        region = catalog.convergence_region(cl.label, cl.arity)
        text = " & ".join(ex.to_text(c) if isinstance(c, sp.Basic) else str(c) for c in region)
        rep.line(f"converges for: {text}")
        rep.put("region", text)
    except catalog.NoData as err:
        rep.line(f"convergence: no data ({err})")
        rep.put("region", "unknown")
    return EXIT_OK


def cmd_expand_eps(args, rep):
    job = JobFile.read(args.job)
    eps = sp.Symbol(job.option("eps", "eps"))
    k = 0
    for no, line in job.system:
        term = job.parse_expr(no, line)
        s = epsex.expand_term(term, args.order, eps)
        k += 1
        rep.line(s.to_text())
        rep.put(f"series{k}", s.to_text())
    return EXIT_OK


def _parse_poly(text, where):
    try:
        return ex.parse(text)
    except ex.ParseError as err:
        raise JobError(f"{where}: {err}") from None


def cmd_spread(args, rep):
    vars = _symbols(args.vars)
    p, q = _parse_poly(args.p, "p"), _parse_poly(args.q, "q")
    sr = plde.spread(p, q, vars, _symbols(args.params or ""), args.window, args.method)
    shifts = sorted(sr.finite_shifts)
    rep.line("finite shifts: {" + ", ".join(_vec(s) for s in shifts) + "}")
    rep.put("finite_shifts", "{" + ", ".join(_vec(s) for s in shifts) + "}")
    gens = sr.lattice_generators
    if gens:
        rep.line("lattice: {" + ", ".join(_vec(g) for g in gens) + "} (periodic)")
    rep.put("lattice", "{" + ", ".join(_vec(g) for g in gens) + "}")
    rep.put("periodic", str(bool(gens)).lower())
    rep.put("complete", str(sr.complete).lower())
    return EXIT_OK if sr.complete else EXIT_INCOMPLETE


def cmd_dispersion(args, rep):
    vars = _symbols(args.vars)
    p, q = _parse_poly(args.p, "p"), _parse_poly(args.q, "q")
    d = plde.dispersion(p, q, vars, _symbols(args.params or ""), args.window)
    text = d if isinstance(d, str) else ("none" if d is None else _vec(d))
    rep.line(f"dispersion: {text}")
    rep.put("dispersion", text)
    return EXIT_OK


def _plde(job):
    f = job.func()
    vars = tuple(job.indices or job.vars)
    if not vars:
        raise JobError(f"{job.name}: [indices] is required")
    if len(job.system) != 1:
        raise JobError(f"{job.name}: [system] must hold exactly one equation")
    no, line = job.system[0]
    try:
        return taylor.PLDE.from_text(line, vars, f), vars
    except ex.ParseError as err:
        raise JobError(f"{job.name}:{no}: {err}") from None
    except ValueError as err:
        raise JobError(f"{job.name}:{no}: {err}") from None


def cmd_denominator_bound(args, rep):
    job = JobFile.read(args.job)
    eq, _ = _plde(job)
    b = plde.denominator_bound(eq)
    rep.line(b.to_text())
    _put_bound(rep, b)
    return EXIT_OK if b.complete else EXIT_INCOMPLETE


def _put_bound(rep, b):
    rep.put("d_a", sp.factor(b.aperiodic))
    rep.put("d_p", sp.factor(b.periodic_known))
    rep.put("P", "{" + ", ".join(ex.to_text(f) for f in b.candidate_factors) + "}")
    rep.put("V", "{" + ", ".join(_vec(v) for v in b.unknown_lattice) + "}")
    rep.put("complete", str(b.complete).lower())


def cmd_solve_plde(args, rep):
    job = JobFile.read(args.job)
    eq, vars = _plde(job)
    spec = job.ansatz(args.seed)
    spec.initial_values = job.initial_values(vars)
    fac = sp.Integer(1)
    if args.factor:
        fac = _parse_poly(args.factor, "--factor")
        red = plde.expand_hyperg_pref(eq, fac)
        rep.line("reduced: " + red.equation.to_text())
        eq = red.equation
    sol = plde.solve_plde(eq, spec)
    rep.line(f"denominator: {ex.to_text(sp.factor(sol.denominator))}")
    if sol.particular is not None:
        part = fac * sol.particular
        rep.line("particular: " + ex.to_text(part))
        rep.put("particular", part)
    for k, h in enumerate(sol.homogeneous_basis, 1):
        y = fac * h
        rep.line("solution: " + ex.to_text(y))
        rep.put(f"basis{k}", y)
    if sol.matched is not None:
        rep.line("matched: " + ex.to_text(fac * sol.matched))
        rep.put("matched", fac * sol.matched)
    rep.put("certified", str(sol.certified).lower())
    rep.put("bound_complete", str(sol.bound.complete).lower())
    return EXIT_OK


def cmd_expand_prefactor(args, rep):
    job = JobFile.read(args.job)
    eq, _ = _plde(job)
    fac = _parse_poly(args.factor, "--factor")
    red = plde.expand_hyperg_pref(eq, fac)
    rep.line(f"content: {ex.to_text(red.content)}")
    rep.line(red.equation.to_text())
    rep.put("content", red.content)
    rep.put("equation", red.equation.to_text())
    return EXIT_OK


def cmd_solve_expand(args, rep):
    job = JobFile.read(args.job)
    eq, vars = _plde(job)
    spec = job.ansatz(args.seed)
    eps = sp.Symbol(args.eps)
    res = plde.solve_expand(eq, eps, args.lo, args.hi, spec, job.initial_values(vars))
    for order, e in res.equations:
        rep.line(f"order eps^{order}: {e.to_text()}")
        rep.put(f"tau{order}", e.rhs)
    for order in sorted(res.coefficients):
        c = res.coefficients[order]
        rep.line(f"y[{order}] = {ex.to_text(c)}")
        rep.put(f"y{order}", c)
    return EXIT_OK


def _eps_order(e, eps, upto):
    """Lowest eps power with nonzero coefficient up to ``upto``; None if all vanish."""
    e = sp.together(e)
    if sp.cancel(e) == 0:
        return None
    if e.is_rational_function(eps) and not e.has(sp.Sum, sp.Product, ex.Poch, ex.HarmonicS):
        s = epsex._series_rational(e, eps, upto)
        for k in range(s.order, upto + 1):
            if sp.simplify(s.relative(k)) != 0:
                return k
        return None
    s = sp.series(e, eps, 0, upto + 1).removeO()
    for k in range(-50, upto + 1):
        if sp.simplify(s.coeff(eps, k)) != 0:
            return k
    return None


def cmd_check_de(args, rep):
    job = JobFile.read(args.job)
    ops, f = _des(job)
    eps = sp.Symbol(job.option("eps", "eps"))
    sol = _parse_poly(args.solution, "--solution")
    worst = None
    for k, op in enumerate(ops, 1):
        res = op.apply(sol)
        o = _eps_order(res, eps, args.order)
        text = f"O(eps^{args.order + 1})" if o is None else f"eps^{o}"
        rep.line(f"equation {k}: residual {text}")
        rep.put(f"residual{k}", text)
        if o is not None:
            worst = o if worst is None else min(worst, o)
    ok = worst is None
    rep.put("satisfied_through", args.order if ok else worst - 1)
    return EXIT_OK if ok else EXIT_INCOMPLETE


def cmd_eval(args, rep):
    e = _parse_poly(args.expr, "expr")
    binds = {sp.Symbol(k): v for k, v in parse_bindings(args.at or "")}
    v = epsex.eval_truncated(e, binds, args.trunc, args.digits, args.extrapolate)
    import mpmath
    val = mpmath.nstr(v.value, args.digits)
    rep.line(f"value: {val}")
    rep.line(f"tail: {mpmath.nstr(v.tail, 5)}")
    rep.put("value", val)
    rep.put("tail", mpmath.nstr(v.tail, 5))
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="hyperkernel", description="hypergeometric series and difference equations")
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed (default %(default)s)")
    sub = ap.add_subparsers(dest="command", required=True)

    def job_cmd(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("job")
        p.set_defaults(fn=fn)
        return p

    job_cmd("solve-de", cmd_solve_de, "product solution of a hypergeometric DE system")
    job_cmd("find-re", cmd_find_re, "recurrences for Taylor coefficients")
    job_cmd("find-de", cmd_find_de, "differential equations of a Pochhammer-ratio summand")
    job_cmd("classify", cmd_classify, "catalog label and convergence region")
    p = job_cmd("expand-eps", cmd_expand_eps, "Laurent series in eps")
    p.add_argument("--order", type=int, required=True)
    for name, fn in (("spread", cmd_spread), ("dispersion", cmd_dispersion)):
        p = sub.add_parser(name, help=f"{name} of two polynomials")
        p.add_argument("p")
        p.add_argument("q")
        p.add_argument("--vars", required=True)
        p.add_argument("--params", default="")
        p.add_argument("--window", type=int, default=20)
        if name == "spread":
            p.add_argument("--method", choices=("exact", "scan"), default="exact")
        p.set_defaults(fn=fn)
    job_cmd("denominator-bound", cmd_denominator_bound, "denominator bound of a PLDE")
    p = job_cmd("solve-plde", cmd_solve_plde, "rational / nested-sum solutions of a PLDE")
    p.add_argument("--factor", default=None)
    p = job_cmd("expand-prefactor", cmd_expand_prefactor, "equation for y' with y = factor * y'")
    p.add_argument("--factor", required=True)
    p = job_cmd("solve-expand", cmd_solve_expand, "eps-expansion of a PLDE solution")
    p.add_argument("--eps", default="eps")
    p.add_argument("--from", dest="lo", type=int, required=True)
    p.add_argument("--to", dest="hi", type=int, required=True)
    p = job_cmd("check-de", cmd_check_de, "order in eps of the residual of a candidate solution")
    p.add_argument("--solution", required=True)
    p.add_argument("--order", type=int, required=True)
    p = sub.add_parser("eval", help="numeric value with truncated infinite sums")
    p.add_argument("expr")
    p.add_argument("--at", default="")
    p.add_argument("--trunc", type=int, default=1000)
    p.add_argument("--digits", type=int, default=30)
    p.add_argument("--extrapolate", type=int, default=0)
    p.set_defaults(fn=cmd_eval)
    # options after the subcommand too
    for action in list(sub.choices.values()):
        action.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    return ap


def main(argv=None, out=None):
    out = out or sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    rep = Report(out)
    try:
        code = args.fn(args, rep)
    except JobError as err:
        sys.stderr.write(f"parse error: {err}\n")
        return EXIT_PARSE
    except ex.ParseError as err:
        sys.stderr.write(f"parse error: {err}\n")
        return EXIT_PARSE
    except NoSolution as err:
        sys.stderr.write(f"no solution: {err}\n")
        bound = getattr(err, "bound", None)
        if bound is not None:
            rep.line(bound.to_text())
            _put_bound(rep, bound)
        rep.put("status", "no-solution")
        rep.finish()
        return EXIT_NOSOL
    except (Undecidable, plde.DegenerateStructureSet) as err:
        sys.stderr.write(f"undecidable: {err}\n")
        rep.put("status", "undecidable")
        rep.finish()
        return EXIT_INCOMPLETE
    except hypsolve.IncompatibleSystem as err:
        sys.stderr.write(f"no solution: {err}\n")
        rep.put("status", "incompatible")
        rep.finish()
        return EXIT_NOSOL
    except (ValueError, ZeroDivisionError, ex.EvaluationError, ex.CaptureError) as err:
        # the job parsed but describes something the command cannot take
        sys.stderr.write(f"job error: {err}\n")
        return EXIT_PARSE
    rep.finish()
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
