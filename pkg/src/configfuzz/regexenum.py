"""Bounded enumeration of the language of a small regex subset.

Supported syntax: literal characters, escaped punctuation (``\\.`` and
friends), positive character classes with ranges (``[a-c5]``), alternation,
grouping, and the quantifiers ``?``, ``{m}``, ``{m,n}``.  The unbounded
quantifiers are rewritten to bounded ones before enumeration: ``*`` becomes
``{0,max_repeat}``, ``+`` becomes ``{1,max_repeat}``, and ``{m,}`` becomes
``{m,max(m,max_repeat)}``.

Everything else (anchors, ``.``, negated classes, backreferences,
lookaround, ``\\d``-style classes, flags) raises
:class:`UnsupportedPatternError`: enumerating those would either be
infinite or depend on an alphabet the pattern never names.

Enumeration order is deterministic: alternatives left to right, repetition
counts low to high, class members in written order, and concatenation as
an odometer whose leftmost position varies slowest.  Duplicate strings
keep their first position.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

PUNCTUATION_ESCAPES = set("\\^$.|?*+()[]{}-/ '\"!#%&,:;<=>@_`~")


class UnsupportedPatternError(ValueError):
    """Pattern uses syntax outside the enumerable subset."""


# Parse tree.  A pattern is an Alternation of Concatenations of Repeats.


@dataclass(frozen=True, slots=True)
class Literal:
    char: str


@dataclass(frozen=True, slots=True)
class CharClass:
    # Expanded member list in written order, duplicates removed.
    chars: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class Group:
    body: "Alternation"


@dataclass(frozen=True, slots=True)
class Repeat:
    atom: "Literal | CharClass | Group"
    low: int
    high: int | None  # None marks an unbounded quantifier ({m,}, *, +)


@dataclass(frozen=True, slots=True)
class Concatenation:
    parts: tuple[Repeat, ...]


@dataclass(frozen=True, slots=True)
class Alternation:
    branches: tuple[Concatenation, ...]


class _Parser:
    def __init__(self, pattern: str) -> None:
        self.pattern = pattern
        self.pos = 0

    def error(self, message: str) -> UnsupportedPatternError:
        return UnsupportedPatternError(f"{message} at position {self.pos} in {self.pattern!r}")

    def peek(self) -> str | None:
        if self.pos < len(self.pattern):
            return self.pattern[self.pos]
        return None

    def take(self) -> str:
        ch = self.pattern[self.pos]
        self.pos += 1
        return ch

    def parse(self) -> Alternation:
        alt = self.parse_alternation()
        if self.pos != len(self.pattern):
            raise self.error(f"unexpected {self.pattern[self.pos]!r}")
        return alt

    def parse_alternation(self) -> Alternation:
        branches = [self.parse_concatenation()]
        while self.peek() == "|":
            self.take()
            branches.append(self.parse_concatenation())
        return Alternation(tuple(branches))

    def parse_concatenation(self) -> Concatenation:
        parts: list[Repeat] = []
        while True:
            ch = self.peek()
            if ch is None or ch in "|)":
                return Concatenation(tuple(parts))
            parts.append(self.parse_repeat())

    def parse_repeat(self) -> Repeat:
        atom = self.parse_atom()
        ch = self.peek()
        if ch == "?":
            self.take()
            return Repeat(atom, 0, 1)
        if ch == "*":
            self.take()
            return Repeat(atom, 0, None)
        if ch == "+":
            self.take()
            return Repeat(atom, 1, None)
        if ch == "{":
            return self.parse_braces(atom)
        return Repeat(atom, 1, 1)

    def parse_braces(self, atom: Literal | CharClass | Group) -> Repeat:
        self.take()  # {
        low = self.parse_int("repetition count")
        ch = self.peek()
        if ch == "}":
            self.take()
            return Repeat(atom, low, low)
        if ch != ",":
            raise self.error("expected ',' or '}' in quantifier")
        self.take()
        if self.peek() == "}":
            self.take()
            return Repeat(atom, low, None)
        high = self.parse_int("repetition count")
        if self.peek() != "}":
            raise self.error("expected '}' in quantifier")
        self.take()
        if high < low:
            raise self.error(f"quantifier {{{low},{high}}} is reversed")
        return Repeat(atom, low, high)

    def parse_int(self, what: str) -> int:
        digits = []
        while (ch := self.peek()) is not None and ch.isdigit():
            digits.append(self.take())
        if not digits:
            raise self.error(f"expected {what}")
        return int("".join(digits))

    def parse_atom(self) -> Literal | CharClass | Group:
        ch = self.peek()
        if ch is None:
            raise self.error("expected an atom")
        if ch == "(":
            self.take()
            if self.peek() == "?":
                raise self.error("(?...) groups are not supported")
            body = self.parse_alternation()
            if self.peek() != ")":
                raise self.error("unclosed group")
            self.take()
            return Group(body)
        if ch == "[":
            return self.parse_class()
        if ch == "\\":
            return Literal(self.parse_escape())
        if ch in "^$.*+?{}|)":
            raise self.error(f"unsupported construct {ch!r}")
        return Literal(self.take())

    def parse_escape(self) -> str:
        self.take()  # backslash
        ch = self.peek()
        if ch is None:
            raise self.error("dangling backslash")
        if ch.isalnum():
            raise self.error(f"escape \\{ch} is not supported")
        if ch not in PUNCTUATION_ESCAPES:
            raise self.error(f"escape \\{ch} is not supported")
        return self.take()

    def parse_class(self) -> CharClass:
        self.take()  # [
        if self.peek() == "^":
            raise self.error("negated classes are not supported")
        members: list[str] = []
        seen: set[str] = set()

        def add(ch: str) -> None:
            if ch not in seen:
                seen.add(ch)
                members.append(ch)

        first = True
        while True:
            ch = self.peek()
            if ch is None:
                raise self.error("unclosed character class")
            if ch == "]" and not first:
                self.take()
                if not members:
                    raise self.error("empty character class")
                return CharClass(tuple(members))
            first = False
            if ch == "\\":
                lo = self.parse_escape()
            else:
                lo = self.take()
            if self.peek() == "-" and self.pos + 1 < len(self.pattern) and self.pattern[self.pos + 1] != "]":
                self.take()  # -
                if self.peek() == "\\":
                    hi = self.parse_escape()
                else:
                    hi = self.take()
                if ord(hi) < ord(lo):
                    raise self.error(f"class range {lo}-{hi} is reversed")
                for code in range(ord(lo), ord(hi) + 1):
                    add(chr(code))
            else:
                add(lo)


def parse_pattern(pattern: str) -> Alternation:
    """Parse ``pattern``; raises :class:`UnsupportedPatternError` otherwise."""
    return _Parser(pattern).parse()


def _bound(rep: Repeat, max_repeat: int) -> tuple[int, int]:
    if rep.high is not None:
        return rep.low, rep.high
    return rep.low, max(rep.low, max_repeat)


def _enum_alternation(node: Alternation, max_repeat: int) -> Iterator[str]:
    for branch in node.branches:
        yield from _enum_concatenation(branch.parts, max_repeat)


def _enum_concatenation(parts: Sequence[Repeat], max_repeat: int) -> Iterator[str]:
    if not parts:
        yield ""
        return
    head, tail = parts[0], parts[1:]
    for prefix in _enum_repeat(head, max_repeat):
        for suffix in _enum_concatenation(tail, max_repeat):
            yield prefix + suffix


def _enum_repeat(rep: Repeat, max_repeat: int) -> Iterator[str]:
    low, high = _bound(rep, max_repeat)
    for count in range(low, high + 1):
        yield from _enum_power(rep.atom, count, max_repeat)


def _enum_power(atom: Literal | CharClass | Group, count: int, max_repeat: int) -> Iterator[str]:
    if count == 0:
        yield ""
        return
    for prefix in _enum_atom(atom, max_repeat):
        for suffix in _enum_power(atom, count - 1, max_repeat):
            yield prefix + suffix


def _enum_atom(atom: Literal | CharClass | Group, max_repeat: int) -> Iterator[str]:
    if isinstance(atom, Literal):
        yield atom.char
    elif isinstance(atom, CharClass):
        yield from atom.chars
    else:
        yield from _enum_alternation(atom.body, max_repeat)


def enumerate_pattern(
    pattern: str, *, max_repeat: int = 3, max_values: int | None = None
) -> list[str]:
    """All strings the bounded pattern matches, deduplicated, in order.

    ``max_values`` caps the output length; the cap applies after
    deduplication so the result is a prefix of the full enumeration.
    """
    tree = parse_pattern(pattern)
    if max_repeat < 1:
        raise ValueError("max_repeat must be positive")
    out: list[str] = []
    seen: set[str] = set()
    for value in _enum_alternation(tree, max_repeat):
        if value in seen:
            continue
        seen.add(value)
        out.append(value)
        if max_values is not None and len(out) >= max_values:
            break
    return out
