"""Weak-head evaluation of closed terms to outcome distributions.

``peval`` evaluates a term, ``papply`` applies an evaluated operator to an
unevaluated operand.  Applications are left-outermost first.  A distributed
operator is split with gamma_L, a distributed operand with gamma_R, and an
abstraction operand is substituted (beta).  An application operand is
evaluated first in paper-exact mode.  Improved mode substitutes it lazily
whenever ``beta_allowed`` says that is safe.

One unit of fuel pays for one beta, gamma_L or gamma_R step.  When fuel runs
out inside a branch, that branch's probability is reported as unknown mass and
the remaining branches still get evaluated.  Pruning works the same way: a
branch whose absolute probability falls below ``prune_epsilon`` is dropped
into unknown mass.
"""

from __future__ import annotations

import enum
import sys
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, TypeVar

from slc.distribution import Distribution
from slc.reductions import (NotEtaRedex, GuardViolation, RedexKind, beta_allowed,
                            eta, substitute)
from slc.syntax import show
from slc.terms import (PROB_TOL, App, Dist, Lam, Term, TermError, mk_app, mk_dist,
                       mk_lam)

__all__ = [
    "Laziness", "EvalConfig", "EvalResult", "EvalCache", "Step",
    "EvalError", "FreeVariable", "FuelExhausted", "NotAFunction", "EvaluationTooDeep",
    "peval", "papply", "eval_cached", "normalize_eta", "run_deep",
]

RECURSION_LIMIT = 200_000
STACK_BYTES = 1 << 30
_DEEP_THREAD = "slc-deep-eval"
_stack_lock = threading.Lock()
_deep_workers = 0
_saved_limit = 1000

T = TypeVar("T")


class EvalError(TermError):
    pass


class FreeVariable(EvalError):
    pass


class FuelExhausted(EvalError):
    pass


class NotAFunction(EvalError):
    pass


class EvaluationTooDeep(EvalError):
    pass


class Laziness(enum.Enum):
    PAPER = "paper-exact"
    IMPROVED = "improved"


@dataclass(frozen=True)
class EvalConfig:
    fuel: int | None = None
    laziness: Laziness = Laziness.IMPROVED
    improper_beta: bool = False
    prune_epsilon: float = 0.0
    cache: bool = True
    trace: bool = False
    strict: bool = False  # raise FuelExhausted instead of reporting unknown mass

    def __post_init__(self):
        if self.fuel is not None and self.fuel < 1:
            raise ValueError(f"fuel must be >= 1 or None, got {self.fuel}")
        if not 0.0 <= self.prune_epsilon < 1.0:
            raise ValueError(f"prune_epsilon must be in [0, 1), got {self.prune_epsilon}")

    @property
    def signature(self) -> tuple:
        return (self.laziness, self.improper_beta)


@dataclass(frozen=True)
class Step:
    kind: RedexKind
    before: Term
    after: Term

    def format(self, number: int) -> str:
        return f"{number} {self.kind.value} {show(self.before)} => {show(self.after)}"


@dataclass
class EvalResult:
    outcome: Distribution
    unknown_mass: float
    steps_used: int
    cache_hits: int
    trace: list[Step] | None = None

    @property
    def resolved_mass(self) -> float:
        return self.outcome.total


class EvalCache:
    """Complete evaluation results keyed by (term, config signature).

    Entries are only ever complete outcomes, so concurrent writers for the
    same key store equal values and races are harmless.
    """

    def __init__(self):
        self._data: dict[tuple, dict[Term, float]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._data)

    def get(self, term: Term, signature: tuple) -> dict[Term, float] | None:
        return self._data.get((term, signature))

    def put(self, term: Term, signature: tuple, outcome: dict[Term, float]) -> None:
        with self._lock:
            self._data.setdefault((term, signature), outcome)


class _OutOfFuel(Exception):
    pass


Partial = tuple[dict[Term, float], float]  # (outcome weights, unknown mass), local scale


def run_deep(fn: Callable[[], T]) -> T:
    """Call ``fn`` on a thread with a large stack and a high recursion limit.

    Evaluation recursion follows the term's reduction depth, which for
    recursive programs is far beyond what the main thread's stack allows.
    """
    if threading.current_thread().name == _DEEP_THREAD:
        return fn()
    box: dict = {}

    def target():
        try:
            box["value"] = fn()
        except RecursionError:
            box["error"] = EvaluationTooDeep(
                "evaluation nested too deeply; the term may not terminate (try a fuel bound)")
        except BaseException as exc:  # re-raised on the caller's thread
            box["error"] = exc

    global _deep_workers, _saved_limit
    with _stack_lock:
        # the limit is interpreter-wide; raise it while any deep worker runs
        if _deep_workers == 0:
            _saved_limit = sys.getrecursionlimit()
            sys.setrecursionlimit(max(_saved_limit, RECURSION_LIMIT))
        _deep_workers += 1
        old = threading.stack_size(STACK_BYTES)
        try:
            worker = threading.Thread(target=target, name=_DEEP_THREAD, daemon=True)
            worker.start()
        finally:
            threading.stack_size(old)
    try:
        worker.join()
    finally:
        with _stack_lock:
            _deep_workers -= 1
            if _deep_workers == 0:
                sys.setrecursionlimit(_saved_limit)
    if "error" in box:
        raise box["error"]
    return box["value"]


class _Run:
    def __init__(self, cfg: EvalConfig, cache: EvalCache | None,
                 on_step: Callable[[int, Step], None] | None):
        self.cfg = cfg
        self.sig = cfg.signature
        self.cache = cache if (cfg.cache and cfg.prune_epsilon == 0.0) else None
        self.lazy = cfg.laziness is Laziness.IMPROVED
        self.eps = cfg.prune_epsilon
        self.steps = 0
        self.hits = 0
        self.trace: list[Step] | None = [] if cfg.trace else None
        self.on_step = on_step
        self.recording = cfg.trace or on_step is not None

    def charge(self) -> None:
        if self.cfg.fuel is not None and self.steps >= self.cfg.fuel:
            raise _OutOfFuel
        self.steps += 1

    def record(self, kind: RedexKind, before: Term, after: Term) -> None:
        step = Step(kind, before, after)
        if self.trace is not None:
            self.trace.append(step)
        if self.on_step is not None:
            self.on_step(self.steps, step)

    def spread(self, entries: Iterable[tuple[Term, float]], w: float,
               fn: Callable[[Term, float], Partial]) -> Partial:
        """Weighted sum of ``fn`` over ``entries``, absorbing pruned and starved branches."""
        out: dict[Term, float] = {}
        unknown = 0.0
        mass = 0.0
        for x, p in entries:
            mass += p
            wp = w * p
            if wp < self.eps:
                unknown += p
                continue
            try:
                vals, u = fn(x, wp)
            except _OutOfFuel:
                if self.cfg.strict:
                    raise
                unknown += p
                continue
            for v, q in vals.items():
                out[v] = out.get(v, 0.0) + p * q
            unknown += p * u
        if unknown == 0.0 and len(out) == 1 and abs(mass - 1.0) <= PROB_TOL:
            # a full distribution collapsing to one value; drop the rounding noise
            out = dict.fromkeys(out, 1.0)
        return out, unknown

    def peval(self, t: Term, w: float) -> Partial:
        if isinstance(t, Lam):
            return {t: 1.0}, 0.0
        if t.level:
            raise FreeVariable(f"cannot evaluate open term {show(t)}")
        if self.cache is not None:
            hit = self.cache.get(t, self.sig)
            if hit is not None:
                self.hits += 1
                return hit, 0.0
        if isinstance(t, Dist):
            out = self.spread(t.entries, w, self.peval)
        else:
            fvals, unknown = self.peval(t.fn, w)
            out = self.papply(fvals, unknown, t.arg, w)
        if self.cache is not None and out[1] == 0.0:
            self.cache.put(t, self.sig, out[0])
        return out

    def peval_app(self, f: Term, a: Term, w: float) -> Partial:
        return self.peval(mk_app(f, a), w)

    def papply(self, fvals: dict[Term, float], unknown: float, a: Term, w: float) -> Partial:
        if unknown == 0.0 and len(fvals) == 1:
            (f,) = fvals
            return self.apply_lam(f, a, w)
        if len(fvals) > 1:
            self.charge()
            if self.recording:
                self.record(RedexKind.GAMMA_L, mk_app(mk_dist(fvals.items()), a),
                            mk_dist((mk_app(f, a), p) for f, p in fvals.items()))
        out, u = self.spread(fvals.items(), w, lambda f, wf: self.peval_app(f, a, wf))
        return out, u + unknown

    def apply_lam(self, f: Term, a: Term, w: float) -> Partial:
        if not isinstance(f, Lam):
            raise NotAFunction(f"{show(f)} is not a function")
        if isinstance(a, Lam) or self.cfg.improper_beta or (self.lazy and beta_allowed(f, a)):
            return self.beta(f, a, w)
        if isinstance(a, Dist):
            self.charge()
            if self.recording:
                self.record(RedexKind.GAMMA_R, mk_app(f, a),
                            mk_dist((mk_app(f, e), p) for e, p in a.entries))
            return self.spread(a.entries, w, lambda e, we: self.peval_app(f, e, we))
        vals, unknown = self.peval(a, w)
        if unknown == 0.0 and len(vals) == 1:
            (v,) = vals
            return self.beta(f, v, w)
        if len(vals) > 1:
            self.charge()
            if self.recording:
                self.record(RedexKind.GAMMA_R, mk_app(f, mk_dist(vals.items())),
                            mk_dist((mk_app(f, v), p) for v, p in vals.items()))
        out, u = self.spread(vals.items(), w, lambda v, wv: self.peval_app(f, v, wv))
        return out, u + unknown

    def beta(self, f: Lam, a: Term, w: float) -> Partial:
        self.charge()
        body = substitute(f, a)
        if self.recording:
            self.record(RedexKind.BETA, mk_app(f, a), body)
        return self.peval(body, w)

    def top(self, go: Callable[[], Partial]) -> Partial:
        try:
            return go()
        except _OutOfFuel:
            if self.cfg.strict:
                raise FuelExhausted(f"fuel of {self.cfg.fuel} steps exhausted") from None
            return {}, 1.0

    def result(self, out: Partial) -> EvalResult:
        vals, unknown = out
        return EvalResult(Distribution(vals), unknown, self.steps, self.hits, self.trace)


def peval(t: Term, cfg: EvalConfig = EvalConfig(), cache: EvalCache | None = None,
          on_step: Callable[[int, Step], None] | None = None) -> EvalResult:
    """Evaluate closed term ``t`` to a distribution over weak head normal forms.

    ``on_step(number, step)`` is called for every reduction as it happens.
    """
    if t.level:
        raise FreeVariable(f"cannot evaluate open term {show(t)}")
    if cfg.cache and cache is None:
        cache = EvalCache()
    run = _Run(cfg, cache, on_step)
    return run.result(run_deep(lambda: run.top(lambda: run.peval(t, 1.0))))


def papply(f: Term | EvalResult, a: Term, cfg: EvalConfig = EvalConfig(),
           cache: EvalCache | None = None) -> EvalResult:
    """Apply an evaluated operator (a term in weak head normal form, a ``Dist``
    of them, or an ``EvalResult``) to the closed operand ``a``."""
    if isinstance(f, EvalResult):
        fvals, unknown = dict(f.outcome), f.unknown_mass
    elif isinstance(f, Dist):
        fvals, unknown = dict(f.entries), 0.0
    else:
        fvals, unknown = {f: 1.0}, 0.0
    if a.level:
        raise FreeVariable(f"cannot apply to open term {show(a)}")
    if cfg.cache and cache is None:
        cache = EvalCache()
    run = _Run(cfg, cache, None)
    return run.result(run_deep(lambda: run.top(lambda: run.papply(fvals, unknown, a, 1.0))))


def eval_cached(t: Term, cfg: EvalConfig, cache: EvalCache) -> EvalResult:
    """``peval`` against a cache that outlives the call."""
    return peval(t, cfg, cache)


def normalize_eta(t: Term) -> Term:
    """Apply every eta reduction whose side conditions hold, until none is left."""
    memo: dict[Term, Term] = {}

    def go(e: Term) -> Term:
        if e in memo:
            return memo[e]
        if isinstance(e, Lam):
            out = mk_lam(go(e.body))
            try:
                out = eta(out)
            except (NotEtaRedex, GuardViolation):
                pass
        elif isinstance(e, App):
            out = mk_app(go(e.fn), go(e.arg))
        elif isinstance(e, Dist):
            out = mk_dist((go(x), p) for x, p in e.entries)
        else:
            out = e
        memo[e] = out
        return out

    def fixpoint() -> Term:
        e = t
        while True:
            nxt = go(e)
            if nxt is e:
                return e
            e = nxt

    return run_deep(fixpoint)
