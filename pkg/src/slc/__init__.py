"""Exact and approximate inference for a stochastic lambda calculus."""

from slc.approx import SampleStats, eval_improper, eval_pruned, mc_estimate, mc_sample_one, prune
from slc.distribution import Distribution
from slc.evaluator import (EvalCache, EvalConfig, EvalResult, Laziness, eval_cached,
                           normalize_eta, papply, peval)
from slc.reductions import (RedexKind, beta, count_occurrences, distribution_free, eta,
                            gamma_l, gamma_r, shift, substitute)
from slc.syntax import ParseError, parse, show
from slc.terms import (App, Dist, Lam, Term, Var, fingerprint, level, mk_app, mk_apps,
                       mk_dist, mk_lam, mk_var)

__version__ = "0.1.0"
