"""LTL abstract syntax, a small recursive-descent parser and a printer."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

RESERVED = frozenset({"X", "F", "G", "U", "R", "true", "false"})


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class Next:
    arg: "Formula"


@dataclass(frozen=True)
class Eventually:
    arg: "Formula"


@dataclass(frozen=True)
class Always:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Release:
    left: "Formula"
    right: "Formula"


Formula = Union[Const, Atom, Not, Next, Eventually, Always, And, Or, Implies, Until, Release]
UNARY = (Not, Next, Eventually, Always)
BINARY = (And, Or, Implies, Until, Release)
TRUE, FALSE = Const(True), Const(False)


class LtlSyntaxError(ValueError):
    """Malformed formula text; ``position`` is a 0-based character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UndeclaredAtomError(ValueError):
    pass


_TOKEN = re.compile(r"\s*(?:(?P<sym>&&|\|\||->|<>|\[\]|[()!&|~])|(?P<ident>[A-Za-z_][A-Za-z0-9_]*))")

_UNARY_SYMBOLS = {"!": Not, "~": Not, "X": Next, "F": Eventually, "<>": Eventually, "G": Always, "[]": Always}
_SYMBOL_ALIASES = {"&": "&&", "|": "||"}


def _tokenize(text: str, atoms: frozenset[str]) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise LtlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start("sym") if m.group("sym") else m.start("ident")
        if m.group("sym"):
            tokens.append((_SYMBOL_ALIASES.get(m.group("sym"), m.group("sym")), start))
        else:
            word = m.group("ident")
            if word not in atoms and word not in RESERVED and set(word) <= set("XFG"):
                # run-together unary operators such as "GF"
                tokens.extend((ch, start + i) for i, ch in enumerate(word))
            else:
                tokens.append((word, start))
        pos = m.end()
    tokens.append(("<end>", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens, atoms):
        self.tokens = tokens
        self.i = 0
        self.atoms = atoms

    def peek(self):
        return self.tokens[self.i][0]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind):
        tok, pos = self.take()
        if tok != kind:
            raise LtlSyntaxError(f"expected {kind!r}, found {tok!r}", pos)

    def implication(self):
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implication())
        return left

    def disjunction(self):
        node = self.conjunction()
        while self.peek() == "||":
            self.take()
            node = Or(node, self.conjunction())
        return node

    def conjunction(self):
        node = self.temporal()
        while self.peek() == "&&":
            self.take()
            node = And(node, self.temporal())
        return node

    def temporal(self):
        left = self.unary()
        if self.peek() in ("U", "R"):
            op = Until if self.take()[0] == "U" else Release
            return op(left, self.temporal())
        return left

    def unary(self):
        tok, pos = self.take()
        if tok in _UNARY_SYMBOLS:
            return _UNARY_SYMBOLS[tok](self.unary())
        if tok == "(":
            node = self.implication()
            self.expect(")")
            return node
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if tok == "<end>":
            raise LtlSyntaxError("unexpected end of formula", pos)
        if tok in RESERVED or not tok[0].isalpha() and tok[0] != "_":
            raise LtlSyntaxError(f"unexpected {tok!r}", pos)
        if tok not in self.atoms:
            raise UndeclaredAtomError(f"atom {tok!r} at position {pos} is not a declared region")
        return Atom(tok)


def parse_ltl(text: str, atoms: Iterable[str]) -> Formula:
    """Parse ``text`` into a formula over the declared ``atoms``.

    Unary operators (``!``, ``X``, ``F``/``<>``, ``G``/``[]``) bind tightest,
    then the right-associative ``U`` and ``R``, then ``&&``, ``||`` and
    finally the right-associative ``->``.
    """
    atoms = frozenset(atoms)
    clash = atoms & RESERVED
    if clash:
        raise ValueError(f"region names clash with operators: {sorted(clash)}")
    parser = _Parser(_tokenize(text, atoms), atoms)
    node = parser.implication()
    tok, pos = parser.take()
    if tok != "<end>":
        raise LtlSyntaxError(f"unexpected {tok!r}", pos)
    return node


_PRINT_UNARY = {Not: "!", Next: "X", Eventually: "F", Always: "G"}
_PRINT_BINARY = {And: "&&", Or: "||", Implies: "->", Until: "U", Release: "R"}


def to_text(f: Formula) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, UNARY):
        return f"{_PRINT_UNARY[type(f)]} {to_text(f.arg)}"
    return f"({to_text(f.left)} {_PRINT_BINARY[type(f)]} {to_text(f.right)})"


def size(f: Formula) -> int:
    if isinstance(f, (Const, Atom)):
        return 1
    if isinstance(f, UNARY):
        return 1 + size(f.arg)
    return 1 + size(f.left) + size(f.right)


def atoms_of(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return frozenset([f.name])
    if isinstance(f, Const):
        return frozenset()
    if isinstance(f, UNARY):
        return atoms_of(f.arg)
    return atoms_of(f.left) | atoms_of(f.right)
