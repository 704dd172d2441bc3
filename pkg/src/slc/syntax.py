"""Concrete ASCII syntax for stochastic lambda terms (the ``.slc`` format).

Grammar::

    term  ::= INT                       ; de Bruijn variable, >= 1
            | "(" "lam" term+ ")"       ; abstraction, several terms = application body
            | "(" term term* ")"        ; left-associated application
            | "{" entry ("," entry)* "}"
    entry ::= term ":" PROB             ; decimal, exponent or a/b fraction in (0, 1]

``;`` starts a comment running to end of line.  ``λ`` is accepted as a synonym
for ``lam``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cmp_to_key
from typing import Iterable

from slc.terms import (PROB_TOL, App, Dist, Lam, Term, Var, mk_app, mk_dist,
                       mk_lam, mk_var)

__all__ = ["parse", "show", "format_prob", "printed_length", "compare_printed",
           "canonical_order", "ParseError", "ParseErrorKind", "SourceSpan"]


class ParseErrorKind(enum.Enum):
    UNEXPECTED_TOKEN = "UnexpectedToken"
    BAD_PROBABILITY = "BadProbability"
    EMPTY_DISTRIBUTION = "EmptyDistribution"
    UNBALANCED_DELIMITER = "UnbalancedDelimiter"
    ZERO_INDEX = "ZeroIndex"


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int


class ParseError(ValueError):
    def __init__(self, kind: ParseErrorKind, message: str, span: SourceSpan):
        super().__init__(f"{kind.value} at {span.start}-{span.end}: {message}")
        self.kind = kind
        self.message = message
        self.span = span


_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN = re.compile(
    rf"""
    (?P<ws>\s+|;[^\n]*)
  | (?P<punct>[(){{}}:,])
  | (?P<lam>(?:lam|λ)(?![A-Za-z0-9_]))
  | (?P<num>{_NUM}(?:/{_NUM})?)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)
_INT = re.compile(r"\d+")
_CLOSERS = {"(": ")", "{": "}"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    start: int
    end: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.start, self.end)


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        if kind == "ws":
            continue
        if kind == "bad":
            raise ParseError(ParseErrorKind.UNEXPECTED_TOKEN,
                             f"unexpected character {m.group()!r}",
                             SourceSpan(m.start(), m.end()))
        toks.append(_Tok(kind, m.group(), m.start(), m.end()))
    return toks


def _to_fraction(text: str) -> Fraction:
    num, _, den = text.partition("/")
    value = Fraction(num)
    if den:
        value /= Fraction(den)
    return value


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Tok | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def eof_span(self) -> SourceSpan:
        return SourceSpan(len(self.text), len(self.text))

    def next(self, closing: _Tok | None = None) -> _Tok:
        tok = self.peek()
        if tok is None:
            if closing is not None:
                raise ParseError(ParseErrorKind.UNBALANCED_DELIMITER,
                                 f"{closing.text!r} is never closed", closing.span)
            raise ParseError(ParseErrorKind.UNEXPECTED_TOKEN,
                             "unexpected end of input", self.eof_span())
        self.pos += 1
        return tok

    def expect(self, text: str, opener: _Tok) -> _Tok:
        tok = self.next(opener)
        if tok.text != text:
            raise self.unexpected(tok, f"expected {text!r}", opener)
        return tok

    @staticmethod
    def unexpected(tok: _Tok, why: str = "", opener: _Tok | None = None) -> ParseError:
        if opener is not None and tok.text in _CLOSERS.values() and tok.text != _CLOSERS[opener.text]:
            return ParseError(ParseErrorKind.UNBALANCED_DELIMITER,
                              f"{tok.text!r} does not close {opener.text!r} at {opener.start}",
                              tok.span)
        msg = f"unexpected {tok.text!r}" + (f", {why}" if why else "")
        return ParseError(ParseErrorKind.UNEXPECTED_TOKEN, msg, tok.span)

    def term(self, opener: _Tok | None = None) -> Term:
        tok = self.next(opener)
        if tok.kind == "num":
            if not _INT.fullmatch(tok.text):
                raise self.unexpected(tok, "variables are positive integers")
            index = int(tok.text)
            if index == 0:
                raise ParseError(ParseErrorKind.ZERO_INDEX,
                                 "de Bruijn indices start at 1", tok.span)
            return mk_var(index)
        if tok.text == "(":
            return self.paren(tok)
        if tok.text == "{":
            return self.dist(tok)
        raise self.unexpected(tok, "expected a term", opener)

    def paren(self, opener: _Tok) -> Term:
        head = self.peek()
        if head is not None and head.kind == "lam":
            self.pos += 1
            body = self.sequence(opener)
            return mk_lam(body)
        return self.sequence(opener)

    def sequence(self, opener: _Tok) -> Term:
        """One or more terms up to the matching ')', applied left to right."""
        tok = self.peek()
        if tok is not None and tok.text == ")":
            raise self.unexpected(tok, "empty parentheses")
        result = self.term(opener)
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError(ParseErrorKind.UNBALANCED_DELIMITER,
                                 "'(' is never closed", opener.span)
            if tok.text == ")":
                self.pos += 1
                return result
            result = mk_app(result, self.term(opener))

    def dist(self, opener: _Tok) -> Term:
        tok = self.peek()
        if tok is not None and tok.text == "}":
            raise ParseError(ParseErrorKind.EMPTY_DISTRIBUTION,
                             "a distribution needs at least one entry",
                             SourceSpan(opener.start, tok.end))
        entries = []
        while True:
            entry = self.term(opener)
            self.expect(":", opener)
            entries.append((entry, self.prob(opener)))
            tok = self.next(opener)
            if tok.text == "}":
                break
            if tok.text != ",":
                raise self.unexpected(tok, "expected ',' or '}'", opener)
        total = sum(Fraction(p) for _, p in entries)
        if abs(total - 1) > PROB_TOL:
            raise ParseError(ParseErrorKind.BAD_PROBABILITY,
                             f"distribution mass is {float(total)!r}, not 1",
                             SourceSpan(opener.start, tok.end))
        return mk_dist(entries)

    def prob(self, opener: _Tok) -> float:
        tok = self.next(opener)
        if tok.kind != "num":
            raise self.unexpected(tok, "expected a probability")
        try:
            value = _to_fraction(tok.text)
        except ZeroDivisionError:
            raise ParseError(ParseErrorKind.BAD_PROBABILITY,
                             "division by zero", tok.span) from None
        if not 0 < value <= 1:
            raise ParseError(ParseErrorKind.BAD_PROBABILITY,
                             f"{tok.text} is not in (0, 1]", tok.span)
        return float(value)


def parse(text: str) -> Term:
    """Parse exactly one term from ``text``."""
    p = _Parser(text)
    if p.peek() is None:
        raise ParseError(ParseErrorKind.UNEXPECTED_TOKEN, "no term in input", p.eof_span())
    t = p.term()
    extra = p.peek()
    if extra is not None:
        raise p.unexpected(extra, "trailing input after a complete term")
    return t


def format_prob(p: float) -> str:
    s = format(p, ".12g")
    # 12 digits is not always enough to get the same float (and hence the same term) back
    return s if float(s) == p else repr(p)


TEXT_CACHE_LIMIT = 4096  # longer printed forms are rebuilt on demand, not stored


def printed_length(t: Term) -> int:
    """Length of ``show(t)`` without building it (linear in the shared DAG)."""
    if t._plen is None:
        if t._text is not None:
            t._plen = len(t._text)
        elif isinstance(t, Var):
            t._plen = len(str(t.index))
        elif isinstance(t, Lam):
            t._plen = printed_length(t.body) + 6
        elif isinstance(t, App):
            # an operator that is itself an application shares its parentheses
            extra = 1 if isinstance(t.fn, App) else 3
            t._plen = printed_length(t.fn) + printed_length(t.arg) + extra
        else:
            t._plen = 2 * len(t.entries) + sum(
                printed_length(e) + 2 + len(format_prob(p)) for e, p in t.entries)
    return t._plen


def _pieces(t: Term) -> list:
    """One level of the printed form of ``t``: strings and subterms, in order."""
    if isinstance(t, Var):
        return [str(t.index)]
    if isinstance(t, Lam):
        return ["(lam ", t.body, ")"]
    if isinstance(t, App):
        spine = []
        head = t
        while isinstance(head, App):
            spine.append(head.arg)
            head = head.fn
        out = ["(", head]
        for arg in reversed(spine):
            out += [" ", arg]
        out.append(")")
        return out
    out = ["{"]
    for i, (e, p) in enumerate(t.entries):
        if i:
            out.append(", ")
        out += [e, f": {format_prob(p)}"]
    out.append("}")
    return out


def compare_printed(a: Term, b: Term) -> int:
    """Order of ``show(a)`` and ``show(b)`` as strings.

    Large printed forms are unfolded a level at a time and shared subterms met
    at the same position are skipped whole, so terms with exponentially long
    printed forms compare in time proportional to their DAG.
    """
    if a is b:
        return 0
    if printed_length(a) <= TEXT_CACHE_LIMIT and printed_length(b) <= TEXT_CACHE_LIMIT:
        x, y = show(a), show(b)
        return (x > y) - (x < y)
    # stacks hold pending pieces, next piece last
    left, right = [a], [b]
    while left and right:
        x, y = left.pop(), right.pop()
        if x is y:
            continue
        if not isinstance(x, str) or not isinstance(y, str):
            for piece, stack in ((x, left), (y, right)):
                if isinstance(piece, str):
                    stack.append(piece)
                elif printed_length(piece) <= TEXT_CACHE_LIMIT:
                    stack.append(show(piece))
                else:
                    stack.extend(reversed(_pieces(piece)))
            continue
        n = min(len(x), len(y))
        if x[:n] != y[:n]:
            return -1 if x[:n] < y[:n] else 1
        if len(x) > n:
            left.append(x[n:])
        if len(y) > n:
            right.append(y[n:])
    return bool(left) - bool(right)


_printed_key = cmp_to_key(lambda x, y: compare_printed(x[0], y[0]))


def canonical_order(items: Iterable[tuple[Term, float]]) -> list[tuple[Term, float]]:
    """Sort (term, probability) pairs by the printed form of the term."""
    return sorted(items, key=_printed_key)


def show(t: Term) -> str:
    """Canonical printed form; ``parse(show(t)) is t``."""
    if t._text is not None:
        return t._text
    if printed_length(t) > TEXT_CACHE_LIMIT:
        return _show_large(t)
    if isinstance(t, Var):
        text = str(t.index)
    elif isinstance(t, Lam):
        text = f"(lam {show(t.body)})"
    elif isinstance(t, App):
        spine = []
        head = t
        while isinstance(head, App):
            spine.append(head.arg)
            head = head.fn
        parts = [show(head)] + [show(a) for a in reversed(spine)]
        text = "(" + " ".join(parts) + ")"
    elif isinstance(t, Dist):
        text = "{" + ", ".join(f"{show(e)}: {format_prob(p)}" for e, p in t.entries) + "}"
    else:
        raise TypeError(f"not a term: {t!r}")
    t._text = text
    return text


def _show_large(t: Term) -> str:
    # not cached: keeping every large printed form alive would cost quadratic memory
    out = []
    stack = [t]
    while stack:
        piece = stack.pop()
        if isinstance(piece, str):
            out.append(piece)
        elif piece._text is not None or printed_length(piece) <= TEXT_CACHE_LIMIT:
            out.append(show(piece))
        else:
            stack.extend(reversed(_pieces(piece)))
    return "".join(out)
