"""Hypergeometric operators, recurrences, product solutions, eps-expansions and PLDE solving."""

from .expr import parse, to_text, evaluate
from .taylor import DiffOperator, PLDE, find_re, find_de
from .hypsolve import HypSystem, ProductSolution, solve_first_order_system, to_pochhammer
from .epsex import LaurentSeries, ProductAtom, series_for_product, expand_pochhammer, expand_term, eval_truncated
from .plde import (AnsatzSpec, DenominatorBound, SolutionSet, SpreadResult, denominator_bound, dispersion,
                   expand_hyperg_pref, solve_expand, solve_plde, spread)

__version__ = "0.1.0"
