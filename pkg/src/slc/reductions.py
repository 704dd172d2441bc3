"""Rewrite rules: beta, gamma_L, gamma_R and eta, plus substitution helpers.

Substitution follows the level-guided recursion: a subterm whose level is
below the index being replaced cannot mention it and is returned as-is, which
is what lets interned subterms be shared between the redex and its contractum.
"""

from __future__ import annotations

import enum
from functools import lru_cache

from slc.terms import (App, Dist, Lam, Term, TermError, Var, mk_app, mk_dist,
                       mk_lam, mk_var)

__all__ = [
    "RedexKind", "ReductionError", "NonClosedArgument", "NotAnAbstraction",
    "IndexUnderflow", "GuardViolation", "NotGammaLRedex", "NotGammaRRedex",
    "NotEtaRedex", "substitute", "shift", "beta", "gamma_l", "gamma_r", "eta",
    "distribution_free", "count_occurrences", "occurs_under_binder",
    "beta_allowed",
]


class RedexKind(enum.Enum):
    BETA = "beta"
    GAMMA_L = "gamma_L"
    GAMMA_R = "gamma_R"
    ETA = "eta"


class ReductionError(TermError):
    pass


class NonClosedArgument(ReductionError):
    pass


class NotAnAbstraction(ReductionError):
    pass


class IndexUnderflow(ReductionError):
    pass


class GuardViolation(ReductionError):
    pass


class NotGammaLRedex(ReductionError):
    pass


class NotGammaRRedex(ReductionError):
    pass


class NotEtaRedex(ReductionError):
    pass


def _subst(expr: Term, arg: Term, depth: int, memo: dict) -> Term:
    if expr.level < depth:
        return expr
    key = (expr, depth)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(expr, Var):
        # only reachable for index >= depth; indices above it belong to outer binders
        out = arg if expr.index == depth else mk_var(expr.index - 1)
    elif isinstance(expr, Lam):
        out = mk_lam(_subst(expr.body, arg, depth + 1, memo))
    elif isinstance(expr, App):
        out = mk_app(_subst(expr.fn, arg, depth, memo), _subst(expr.arg, arg, depth, memo))
    else:
        out = mk_dist([(_subst(e, arg, depth, memo), p) for e, p in expr.entries])
    memo[key] = out
    return out


@lru_cache(maxsize=1 << 16)
def substitute(abstraction: Term, argument: Term) -> Term:
    """Contract ``((lam e) argument)`` to ``e[argument/1]``.

    ``argument`` must be closed, so it never needs shifting.
    """
    if not isinstance(abstraction, Lam):
        raise NotAnAbstraction(f"substitute needs an abstraction, got {abstraction}")
    if argument.level != 0:
        raise NonClosedArgument(f"argument {argument} has level {argument.level}")
    return _subst(abstraction.body, argument, 1, {})


def shift(t: Term, delta: int, cutoff: int = 1) -> Term:
    """Add ``delta`` to every free variable of ``t`` with index >= ``cutoff``."""
    memo: dict = {}

    def go(e: Term, c: int) -> Term:
        if e.level < c:
            return e
        key = (e, c)
        if key in memo:
            return memo[key]
        if isinstance(e, Var):
            if e.index + delta < 1:
                raise IndexUnderflow(f"shifting {e.index} by {delta} leaves the index range")
            out = mk_var(e.index + delta)
        elif isinstance(e, Lam):
            out = mk_lam(go(e.body, c + 1))
        elif isinstance(e, App):
            out = mk_app(go(e.fn, c), go(e.arg, c))
        else:
            out = mk_dist([(go(x, c), p) for x, p in e.entries])
        memo[key] = out
        return out

    if delta == 0:
        return t
    return go(t, cutoff)


def distribution_free(t: Term) -> bool:
    """True iff no distribution node occurs anywhere inside ``t``."""
    if t._dfree is None:
        if isinstance(t, Var):
            t._dfree = True
        elif isinstance(t, Lam):
            t._dfree = distribution_free(t.body)
        elif isinstance(t, App):
            t._dfree = distribution_free(t.fn) and distribution_free(t.arg)
        else:
            t._dfree = False
    return t._dfree


def _occurrences(body: Term, index: int, memo: dict) -> tuple[int, int]:
    """(free occurrences of ``index`` not under a binder, occurrences under one)."""
    if body.level < index:
        return 0, 0
    key = (body, index)
    if key in memo:
        return memo[key]
    if isinstance(body, Var):
        out = (1, 0) if body.index == index else (0, 0)
    elif isinstance(body, Lam):
        top, deep = _occurrences(body.body, index + 1, memo)
        out = (0, top + deep)
    elif isinstance(body, App):
        a = _occurrences(body.fn, index, memo)
        b = _occurrences(body.arg, index, memo)
        out = (a[0] + b[0], a[1] + b[1])
    else:
        top = deep = 0
        for e, _ in body.entries:
            t, d = _occurrences(e, index, memo)
            top += t
            deep += d
        out = (top, deep)
    memo[key] = out
    return out


def count_occurrences(body: Term, index: int = 1) -> int:
    """Number of free occurrences of variable ``index`` in ``body``."""
    top, deep = _occurrences(body, index, {})
    return top + deep


def occurs_under_binder(body: Term, index: int = 1) -> bool:
    return _occurrences(body, index, {})[1] > 0


def beta_allowed(fn: Lam, arg: Term) -> bool:
    """Decidable sufficient condition for substituting ``arg`` into ``fn``.

    Holds when ``arg`` is an abstraction, contains no distribution at all, or
    is used at most once and not beneath a binder of the body.  An occurrence
    beneath a binder may be evaluated once per call of that inner function,
    which would turn one shared sample into several independent ones.
    """
    if isinstance(arg, Lam) or distribution_free(arg):
        return True
    top, deep = _usage(fn)
    return deep == 0 and top <= 1


@lru_cache(maxsize=1 << 16)
def _usage(fn: Lam) -> tuple[int, int]:
    return _occurrences(fn.body, 1, {})


def beta(app: Term, improper: bool = False) -> Term:
    if not (isinstance(app, App) and isinstance(app.fn, Lam)):
        raise NotAnAbstraction(f"not a beta redex: {app}")
    if not improper and not beta_allowed(app.fn, app.arg):
        raise GuardViolation(
            f"argument {app.arg} may reduce to a distribution and is used more than once")
    return substitute(app.fn, app.arg)


def gamma_l(app: Term) -> Term:
    if not (isinstance(app, App) and isinstance(app.fn, Dist)):
        raise NotGammaLRedex(f"operator is not a distribution: {app}")
    return mk_dist([(mk_app(f, app.arg), p) for f, p in app.fn.entries])


def gamma_r(app: Term) -> Term:
    if not (isinstance(app, App) and isinstance(app.arg, Dist)):
        raise NotGammaRRedex(f"operand is not a distribution: {app}")
    return mk_dist([(mk_app(app.fn, e), p) for e, p in app.arg.entries])


def eta(lam: Term) -> Term:
    if not (isinstance(lam, Lam) and isinstance(lam.body, App)
            and isinstance(lam.body.arg, Var) and lam.body.arg.index == 1):
        raise NotEtaRedex(f"not of the form (lam (e 1)): {lam}")
    e = lam.body.fn
    if count_occurrences(e, 1):
        raise NotEtaRedex(f"variable 1 occurs free in {e}")
    if not distribution_free(e):
        raise GuardViolation(f"{e} may reduce to a distribution")
    return shift(e, -1, 1)
