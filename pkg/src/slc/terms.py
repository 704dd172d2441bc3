"""Hash-consed stochastic lambda terms in de Bruijn notation.

Every term is built through the smart constructors below (``mk_var``,
``mk_lam``, ``mk_app``, ``mk_dist``).  Structurally identical terms are
interned to a single object, so ``a is b`` (and ``a == b``) is structural
equality and terms can key dictionaries directly.

Each node caches its *level* (the number of enclosing binders needed to close
it) and a 128-bit fingerprint.  Distribution fingerprints are the XOR of their
entry fingerprints, so they do not depend on entry order.
"""

from __future__ import annotations

import hashlib
import math
import struct
import threading
from typing import Iterable

__all__ = [
    "Term", "Var", "Lam", "App", "Dist", "TermStore",
    "TermError", "InvalidIndex", "InvalidProbability", "EmptyDistribution",
    "mk_var", "mk_lam", "mk_app", "mk_apps", "mk_dist", "level", "fingerprint",
    "default_store", "use_store", "DEFAULT_SEED", "PROB_TOL",
]

DEFAULT_SEED = 0x5EED_1A3B_DA7A
PROB_TOL = 1e-9
FP_BITS = 128


class TermError(ValueError):
    pass


class InvalidIndex(TermError):
    pass


class InvalidProbability(TermError):
    pass


class EmptyDistribution(TermError):
    pass


class Term:
    """Base class of interned term nodes.  Never instantiate directly."""

    __slots__ = ("uid", "level", "fp", "_text", "_plen", "_dfree")

    def __init__(self, uid: int, level: int, fp: int):
        self.uid = uid
        self.level = level
        self.fp = fp
        self._text: str | None = None
        self._plen: int | None = None
        self._dfree: bool | None = None

    @property
    def closed(self) -> bool:
        return self.level == 0

    def __str__(self) -> str:
        from slc.syntax import show
        return show(self)

    def __repr__(self) -> str:
        from slc.syntax import TEXT_CACHE_LIMIT, printed_length
        n = printed_length(self)
        text = str(self) if n <= TEXT_CACHE_LIMIT else f"({n} characters)"
        return f"<{type(self).__name__} #{self.uid} {text}>"

    # identity semantics: interning makes these structural
    __hash__ = object.__hash__

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    def __reduce__(self):
        raise TypeError("interned terms are process-local; serialize with slc.syntax.show")


class Var(Term):
    __slots__ = ("index",)

    def __init__(self, uid, index: int, fp):
        super().__init__(uid, index, fp)
        self.index = index


class Lam(Term):
    __slots__ = ("body",)

    def __init__(self, uid, body: Term, fp):
        super().__init__(uid, max(body.level - 1, 0), fp)
        self.body = body


class App(Term):
    __slots__ = ("fn", "arg")

    def __init__(self, uid, fn: Term, arg: Term, fp):
        super().__init__(uid, max(fn.level, arg.level), fp)
        self.fn = fn
        self.arg = arg


class Dist(Term):
    """A finite weighted set of terms; ``entries`` is in canonical order."""

    __slots__ = ("entries",)

    def __init__(self, uid, entries: tuple[tuple[Term, float], ...], fp):
        super().__init__(uid, max(t.level for t, _ in entries), fp)
        self.entries = entries

    @property
    def mass(self) -> float:
        return math.fsum(p for _, p in self.entries)


class TermStore:
    """Intern table plus the keyed hash used for fingerprints.

    The table only grows.  All constructors are safe to call from several
    threads; interning is done under a lock.
    """

    def __init__(self, seed: int = DEFAULT_SEED):
        self.seed = seed
        self._key = (seed % (1 << 128)).to_bytes(16, "little")
        self._table: dict[tuple, Term] = {}
        self._lock = threading.Lock()
        self._lam_tag = self._hash(b"lam")
        self._app_tag = self._hash(b"app")

    def __len__(self) -> int:
        return len(self._table)

    def _hash(self, *parts: bytes) -> int:
        h = hashlib.blake2b(digest_size=FP_BITS // 8, key=self._key)
        for part in parts:
            h.update(part)
        return int.from_bytes(h.digest(), "little")

    @staticmethod
    def _b(x: int) -> bytes:
        return x.to_bytes(FP_BITS // 8, "little")

    def _intern(self, key: tuple, build) -> Term:
        term = self._table.get(key)
        if term is not None:
            return term
        with self._lock:
            term = self._table.get(key)
            if term is None:
                term = build(len(self._table))
                self._table[key] = term
            return term

    def entry_fingerprint(self, term: Term, prob: float) -> int:
        return self._hash(b"ent", self._b(term.fp), struct.pack("<d", prob))

    def var(self, index: int) -> Var:
        if isinstance(index, bool) or not isinstance(index, int) or index < 1:
            raise InvalidIndex(f"variable index must be a positive integer, got {index!r}")
        return self._intern(("v", index), lambda uid: Var(
            uid, index, self._hash(b"var", index.to_bytes(8, "little"))))

    def lam(self, body: Term) -> Lam:
        return self._intern(("l", body.uid), lambda uid: Lam(
            uid, body, self._hash(self._b(self._lam_tag), self._b(body.fp))))

    def app(self, fn: Term, arg: Term) -> App:
        return self._intern(("a", fn.uid, arg.uid), lambda uid: App(
            uid, fn, arg, self._hash(self._b(self._app_tag), self._b(fn.fp), self._b(arg.fp))))

    def dist(self, raw_entries: Iterable[tuple[Term, float]]) -> Term:
        merged: dict[Term, float] = {}
        seen = False
        for term, prob in raw_entries:
            seen = True
            prob = float(prob)
            if not prob > 0.0 or not math.isfinite(prob):
                raise InvalidProbability(f"probability must be in (0, 1], got {prob!r}")
            if prob > 1.0 + PROB_TOL:
                raise InvalidProbability(f"probability must be in (0, 1], got {prob!r}")
            if isinstance(term, Dist):
                for sub, q in term.entries:
                    merged[sub] = merged.get(sub, 0.0) + prob * q
            else:
                merged[term] = merged.get(term, 0.0) + prob
        if not seen:
            raise EmptyDistribution("a distribution needs at least one entry")
        if len(merged) == 1:
            (term, prob), = merged.items()
            if abs(prob - 1.0) <= PROB_TOL:
                return term
        from slc.syntax import canonical_order
        entries = tuple(canonical_order(merged.items()))
        key = ("d",) + tuple((t.uid, p) for t, p in entries)
        return self._intern(key, lambda uid: Dist(uid, entries, self._xor_entries(entries)))

    def _xor_entries(self, entries) -> int:
        fp = 0
        for term, prob in entries:
            fp ^= self.entry_fingerprint(term, prob)
        return fp


_store = TermStore()


def default_store() -> TermStore:
    return _store


def use_store(store: TermStore) -> TermStore:
    """Swap the process-wide store; terms built before the swap must not be mixed in."""
    global _store
    previous, _store = _store, store
    return previous


def mk_var(index: int) -> Var:
    return _store.var(index)


def mk_lam(body: Term) -> Lam:
    return _store.lam(body)


def mk_app(fn: Term, arg: Term) -> App:
    return _store.app(fn, arg)


def mk_apps(fn: Term, *args: Term) -> Term:
    """Left-associated application ``(fn a1 a2 ...)``."""
    for arg in args:
        fn = _store.app(fn, arg)
    return fn


def mk_dist(raw_entries: Iterable[tuple[Term, float]]) -> Term:
    """Build a canonical distribution.

    Nested distributions are flattened, duplicate entries merged, entries
    sorted by printed form, and a lone entry of mass 1 collapses to the term
    itself.
    """
    return _store.dist(raw_entries)


def level(t: Term) -> int:
    return t.level


def fingerprint(t: Term) -> int:
    return t.fp
