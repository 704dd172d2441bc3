"""Approximate inference: pruning, improper beta, and Monte-Carlo sampling.

Fuel-bounded evaluation (unknown mass instead of a guessed distribution for
cut-off recursion) is ``EvalConfig(fuel=...)`` in ``slc.evaluator``.

Sampling is reproducible across versions.  Sample ``i`` of a run with seed
``s`` draws from ``numpy.random.Generator(PCG64(SeedSequence(s,
spawn_key=(i,))))``.  At each random choice it takes one ``random()`` double
``u`` and picks the first entry, in canonical order, whose cumulative
probability exceeds ``u * total``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from slc.distribution import Distribution
from slc.evaluator import (EvalConfig, EvalResult, FreeVariable, FuelExhausted,
                           Laziness, NotAFunction, peval, run_deep)
from slc.reductions import beta_allowed, substitute
from slc.syntax import format_prob, show
from slc.terms import Dist, Lam, Term, mk_app

__all__ = ["prune", "eval_pruned", "eval_improper", "mc_sample_one", "mc_estimate",
           "sample_rng", "SampleStats"]


def prune(d: Mapping[Term, float], epsilon: float) -> tuple[Distribution, float]:
    """Drop entries below ``epsilon`` and renormalize the rest.

    Returns the pruned distribution and the dropped mass.  If every entry is
    below the threshold the single most probable one survives.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    items = list(d.items())
    if not items:
        raise ValueError("cannot prune an empty distribution")
    keep = [(t, p) for t, p in items if p >= epsilon]
    if not keep:
        keep = [max(items, key=lambda tp: tp[1])]
    dropped = math.fsum(p for t, p in items) - math.fsum(p for _, p in keep)
    kept_mass = math.fsum(p for _, p in keep)
    return Distribution((t, p / kept_mass) for t, p in keep), max(dropped, 0.0)


def eval_pruned(t: Term, cfg: EvalConfig) -> EvalResult:
    """Evaluate while dropping branches whose absolute probability is below
    ``cfg.prune_epsilon``; the dropped mass is reported as unknown.

    With ``prune_epsilon == 0`` nothing is dropped and this is ``peval``.
    """
    return peval(t, cfg)


def eval_improper(t: Term, cfg: EvalConfig = EvalConfig()) -> EvalResult:
    """Evaluate with beta allowed on any operand, treating every use of a
    distributed argument as an independent draw."""
    return peval(t, dataclasses.replace(cfg, improper_beta=True))


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed % (1 << 64), spawn_key=(index,))))


def _choose(entries, rng: np.random.Generator) -> Term:
    u = rng.random() * math.fsum(p for _, p in entries)
    acc = 0.0
    for term, p in entries:
        acc += p
        if u < acc:
            return term
    return entries[-1][0]


class _Sampler:
    def __init__(self, rng: np.random.Generator, fuel: int | None, lazy: bool, improper: bool):
        self.rng = rng
        self.fuel = fuel
        self.lazy = lazy
        self.improper = improper
        self.steps = 0

    def charge(self) -> None:
        if self.fuel is not None and self.steps >= self.fuel:
            raise FuelExhausted(f"sample needed more than {self.fuel} steps")
        self.steps += 1

    def sample(self, t: Term) -> Term:
        while True:
            if isinstance(t, Lam):
                return t
            if isinstance(t, Dist):
                t = _choose(t.entries, self.rng)
                continue
            if t.level:
                raise FreeVariable(f"cannot sample open term {show(t)}")
            return self.apply(self.sample(t.fn), t.arg)

    def apply(self, f: Term, a: Term) -> Term:
        if not isinstance(f, Lam):
            raise NotAFunction(f"{show(f)} is not a function")
        while True:
            if isinstance(a, Lam) or self.improper or (self.lazy and beta_allowed(f, a)):
                self.charge()
                return self.sample(substitute(f, a))
            if isinstance(a, Dist):
                self.charge()
                a = _choose(a.entries, self.rng)
            else:
                a = self.sample(a)


def mc_sample_one(t: Term, rng: np.random.Generator, fuel: int | None = None,
                  laziness: Laziness = Laziness.IMPROVED, improper_beta: bool = False) -> Term:
    """Draw one weak head normal form from the distribution of ``t``."""
    sampler = _Sampler(rng, fuel, laziness is Laziness.IMPROVED, improper_beta)
    return run_deep(lambda: sampler.sample(t))


@dataclass(frozen=True)
class SampleStats:
    samples: int
    seed: int
    estimate: Distribution
    l1_to_exact: float | None = None

    def format(self) -> str:
        lines = [f"samples: {self.samples}", f"seed: {self.seed}"]
        lines += [f"{show(t)}: {format_prob(p)}" for t, p in self.estimate.items()]
        if self.l1_to_exact is not None:
            lines.append(f"l1_to_exact: {format_prob(self.l1_to_exact)}")
        return "\n".join(lines)


def mc_estimate(t: Term, n: int, seed: int, fuel: int | None = None,
                exact: Mapping[Term, float] | None = None,
                laziness: Laziness = Laziness.IMPROVED) -> SampleStats:
    """Empirical distribution of ``n`` independent samples of ``t``.

    Pass ``exact`` to have the L1 distance to it filled in.
    """
    if n < 1:
        raise ValueError(f"need at least one sample, got {n}")
    lazy = laziness is Laziness.IMPROVED

    def draw_all() -> dict[Term, int]:
        counts: dict[Term, int] = {}
        for i in range(n):
            v = _Sampler(sample_rng(seed, i), fuel, lazy, False).sample(t)
            counts[v] = counts.get(v, 0) + 1
        return counts

    counts = run_deep(draw_all)
    estimate = Distribution((v, c / n) for v, c in counts.items())
    l1 = estimate.l1(exact) if exact is not None else None
    return SampleStats(n, seed, estimate, l1)
