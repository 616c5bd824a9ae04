"""Abstract syntax, parser and printer for BBI formulae.

Concrete syntax, tightest binding first::

    ~A            negation (prefix)
    A * B         separating conjunction
    A & B         conjunction
    A | B         disjunction
    A -* B        magic wand
    A -> B        implication

All binary connectives associate to the right.  Constants are ``T``,
``F`` and ``T*`` (alias ``emp``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

RESERVED = frozenset({"T", "F", "emp"})
_NAME = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


class FormulaError(ValueError):
    pass


class ParseError(FormulaError):
    def __init__(self, message: str, position: int, expected: frozenset[str] = frozenset()):
        self.position = position
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message} at position {position}{detail}")


@dataclass(frozen=True)
class Atom:
    name: str

    def __post_init__(self):
        if not _NAME.fullmatch(self.name):
            raise FormulaError(f"invalid atom name {self.name!r}")
        if self.name in RESERVED:
            raise FormulaError(f"reserved word {self.name!r} used as an atom")


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bot:
    pass


@dataclass(frozen=True)
class MEmp:
    pass


@dataclass(frozen=True)
class Not:
    sub: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Imp:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Star:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Wand:
    left: "Formula"
    right: "Formula"


Formula = Union[Atom, Top, Bot, MEmp, Not, And, Or, Imp, Star, Wand]
Binary = (And, Or, Imp, Star, Wand)

# binding strength of the binary connectives, larger binds tighter
_PREC = {Star: 5, And: 4, Or: 3, Wand: 2, Imp: 1}
_SYMBOL = {Star: "*", And: "&", Or: "|", Wand: "-*", Imp: "->"}
_BY_SYMBOL = {sym: cls for cls, sym in _SYMBOL.items()}


def size(f: Formula) -> int:
    """Number of connectives."""
    match f:
        case Not(sub):
            return 1 + size(sub)
        case And(l, r) | Or(l, r) | Imp(l, r) | Star(l, r) | Wand(l, r):
            return 1 + size(l) + size(r)
        case _:
            return 0


def atoms(f: Formula) -> set[str]:
    match f:
        case Atom(name):
            return {name}
        case Not(sub):
            return atoms(sub)
        case And(l, r) | Or(l, r) | Imp(l, r) | Star(l, r) | Wand(l, r):
            return atoms(l) | atoms(r)
        case _:
            return set()


def subformulas(f: Formula) -> Iterator[Formula]:
    """Post-order traversal, children before parents."""
    match f:
        case Not(sub):
            yield from subformulas(sub)
        case And(l, r) | Or(l, r) | Imp(l, r) | Star(l, r) | Wand(l, r):
            yield from subformulas(l)
            yield from subformulas(r)
    yield f


def is_atomic(f: Formula) -> bool:
    return isinstance(f, Atom)


# -- lexer ------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(T\*)|(->|-\*)|([()~&|*])|([A-Za-z][A-Za-z0-9_]*))")


def tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        tokens.append((m.group(m.lastindex), m.start(m.lastindex)))
        pos = m.end()
    tokens.append(("$end", len(text)))
    return tokens


# -- parser -----------------------------------------------------------------

_PRIMARY_START = frozenset({"(", "~", "T", "F", "T*", "emp", "<atom>"})


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expression(self, min_prec: int = 1) -> Formula:
        left = self.unary()
        while True:
            tok, _ = self.peek()
            cls = _BY_SYMBOL.get(tok)
            if cls is None or _PREC[cls] < min_prec:
                return left
            self.advance()
            # right associative: the right operand may contain the same operator
            right = self.expression(_PREC[cls])
            left = cls(left, right)

    def unary(self) -> Formula:
        tok, pos = self.advance()
        match tok:
            case "~":
                return Not(self.unary())
            case "(":
                inner = self.expression()
                close, cpos = self.advance()
                if close != ")":
                    raise ParseError(f"unexpected {_show(close)}", cpos,
                                     frozenset({")"}) | frozenset(_BY_SYMBOL))
                return inner
            case "T":
                return Top()
            case "F":
                return Bot()
            case "T*" | "emp":
                return MEmp()
        if _NAME.fullmatch(tok):
            return Atom(tok)
        raise ParseError(f"unexpected {_show(tok)}", pos, _PRIMARY_START)


def _show(tok: str) -> str:
    return "end of input" if tok == "$end" else repr(tok)


def parse(text: str) -> Formula:
    p = _Parser(text)
    f = p.expression()
    tok, pos = p.peek()
    if tok != "$end":
        raise ParseError(f"unexpected {_show(tok)}", pos, frozenset(_BY_SYMBOL) | {"$end"})
    return f


# -- printer ----------------------------------------------------------------

def show(f: Formula) -> str:
    """Render with the fewest parentheses that still re-parse to f."""
    match f:
        case Atom(name):
            return name
        case Top():
            return "T"
        case Bot():
            return "F"
        case MEmp():
            return "T*"
        case Not(sub):
            inner = show(sub)
            return "~" + (f"({inner})" if isinstance(sub, Binary) else inner)
    prec = _PREC[type(f)]
    left, right = show(f.left), show(f.right)
    if isinstance(f.left, Binary) and _PREC[type(f.left)] <= prec:
        left = f"({left})"
    if isinstance(f.right, Binary) and _PREC[type(f.right)] < prec:
        right = f"({right})"
    return f"{left} {_SYMBOL[type(f)]} {right}"


def read_suite(text: str) -> list[str]:
    """Formula lines of a suite file: '#' starts a comment, blank lines skipped."""
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    return lines
