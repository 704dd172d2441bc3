"""Weighted outcome sets produced by evaluation.

Unlike a ``Dist`` term, a ``Distribution`` may carry less than unit mass (the
rest is reported separately as unknown) and its support may be empty.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping

from slc.syntax import canonical_order, format_prob, show
from slc.terms import Term, mk_dist


class Distribution(Mapping):
    """Immutable mapping from terms to probabilities in canonical term order."""

    __slots__ = ("_probs",)

    def __init__(self, items: Mapping | Iterable[tuple[Term, float]] = ()):
        if isinstance(items, Mapping):
            items = items.items()
        merged: dict[Term, float] = {}
        for t, p in items:
            merged[t] = merged.get(t, 0.0) + float(p)
        self._probs = dict(canonical_order(merged.items()))

    def __getitem__(self, t: Term) -> float:
        return self._probs[t]

    def __iter__(self):
        return iter(self._probs)

    def __len__(self) -> int:
        return len(self._probs)

    def __hash__(self):
        return hash(tuple(self._probs.items()))

    @property
    def total(self) -> float:
        return math.fsum(self._probs.values())

    def prob(self, t: Term) -> float:
        return self._probs.get(t, 0.0)

    def as_term(self) -> Term:
        return mk_dist(self._probs.items())

    def l1(self, other: Mapping) -> float:
        support = set(self) | set(other)
        return math.fsum(abs(self.get(t, 0.0) - other.get(t, 0.0)) for t in support)

    def max_deviation(self, other: Mapping) -> float:
        support = set(self) | set(other)
        return max((abs(self.get(t, 0.0) - other.get(t, 0.0)) for t in support), default=0.0)

    def close_to(self, other: Mapping, tol: float = 1e-9) -> bool:
        return self.max_deviation(other) <= tol

    def __repr__(self) -> str:
        inner = ", ".join(f"{show(t)}: {format_prob(p)}" for t, p in self._probs.items())
        return "Distribution({" + inner + "})"
