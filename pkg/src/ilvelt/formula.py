"""Formulas of the box/rhd modal language, concrete syntax, and the axiom schemata.

The core AST has exactly five constructors: bottom, atoms, implication, box,
and the binary modality rhd (written ``|>``).  Everything else (``~ & | <-> <>``)
is surface syntax that the parser desugars classically:

    ~a      ==  a -> false
    a & b   ==  ~(a -> ~b)
    a | b   ==  ~a -> b
    a <-> b ==  (a -> b) & (b -> a)
    <>a     ==  ~[]~a

Precedence, tightest first: ~ [] <>  then  &  then  |  then  |>  then  ->
then <->.  ``->`` and ``<->`` associate to the right, ``&`` and ``|`` to the
left, and ``|>`` does not associate at all (chains must be parenthesized).

Atoms match ``[a-z][a-zA-Z0-9_]*``.  The names ``A``, ``B``, ``C`` are a
reserved metavariable namespace used by schemata; they parse as atoms but are
never legal valuation atoms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class ParseError(ValueError):
    """Raised on malformed formula text; carries the offending position."""

    def __init__(self, message, pos):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class Bottom(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Box(Formula):
    body: Formula


@dataclass(frozen=True)
class Rhd(Formula):
    left: Formula
    right: Formula


BOTTOM = Bottom()

ATOM_RE = re.compile(r"[a-z][a-zA-Z0-9_]*")
METAVARIABLES = ("A", "B", "C")


def Not(f: Formula) -> Formula:
    return Implies(f, BOTTOM)


def And(a: Formula, b: Formula) -> Formula:
    return Not(Implies(a, Not(b)))


def Or(a: Formula, b: Formula) -> Formula:
    return Implies(Not(a), b)


def Iff(a: Formula, b: Formula) -> Formula:
    return And(Implies(a, b), Implies(b, a))


def Diamond(f: Formula) -> Formula:
    return Not(Box(Not(f)))


def is_metavariable(name: str) -> bool:
    return name in METAVARIABLES


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_PUNCT = ("<->", "->", "|>", "[]", "<>", "~", "&", "|", "(", ")")


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                tokens.append((p, i))
                i += len(p)
                break
        else:
            m = ATOM_RE.match(text, i)
            if m:
                tokens.append((m.group(), i))
                i = m.end()
            elif text[i] in METAVARIABLES:
                tokens.append((text[i], i))
                i += 1
            else:
                raise ParseError(f"unknown token {text[i]!r}", i)
    tokens.append((None, n))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.tokens[self.k][0]

    def pos(self):
        return self.tokens[self.k][1]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok[0]

    def expect(self, tok):
        if self.peek() != tok:
            raise ParseError(f"expected {tok!r}, found {self.peek()!r}", self.pos())
        self.take()

    def parse(self):
        f = self.parse_iff()
        if self.peek() is not None:
            raise ParseError(f"unexpected token {self.peek()!r}", self.pos())
        return f

    def parse_iff(self):
        left = self.parse_implies()
        if self.peek() == "<->":
            self.take()
            return Iff(left, self.parse_iff())
        return left

    def parse_implies(self):
        left = self.parse_rhd()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.parse_implies())
        return left

    def parse_rhd(self):
        left = self.parse_or()
        if self.peek() == "|>":
            self.take()
            right = self.parse_or()
            if self.peek() == "|>":
                raise ParseError("'|>' does not associate; parenthesize the chain", self.pos())
            return Rhd(left, right)
        return left

    def parse_or(self):
        f = self.parse_and()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.parse_and())
        return f

    def parse_and(self):
        f = self.parse_unary()
        while self.peek() == "&":
            self.take()
            f = And(f, self.parse_unary())
        return f

    def parse_unary(self):
        tok = self.peek()
        if tok == "~":
            self.take()
            return Not(self.parse_unary())
        if tok == "[]":
            self.take()
            return Box(self.parse_unary())
        if tok == "<>":
            self.take()
            return Diamond(self.parse_unary())
        if tok == "(":
            self.take()
            f = self.parse_iff()
            self.expect(")")
            return f
        if tok == "false":
            self.take()
            return BOTTOM
        if tok is not None and (ATOM_RE.fullmatch(tok) or is_metavariable(tok)):
            self.take()
            return Atom(tok)
        raise ParseError(f"unexpected token {tok!r}", self.pos())


def parse(text: str) -> Formula:
    """Parse concrete syntax into the desugared five-constructor core."""
    return _Parser(text).parse()


# Printing uses core connectives only, so parse(print_formula(f)) == f is
# immediate; re-sugaring would buy brevity at the price of a second grammar.

def _render(f, ctx):
    # ctx: "top" (anything goes), "impl_left" (no bare ->), "rhd" (no bare -> or |>)
    if isinstance(f, Bottom):
        return "false"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Box):
        if isinstance(f.body, (Atom, Bottom, Box)):
            return f"[]{_render(f.body, 'rhd')}"
        return f"[]({_render(f.body, 'top')})"
    if isinstance(f, Rhd):
        text = f"{_render(f.left, 'rhd')} |> {_render(f.right, 'rhd')}"
        return f"({text})" if ctx == "rhd" else text
    if isinstance(f, Implies):
        # right-associative: a -> b -> c needs no parens, (a -> b) -> c does
        text = f"{_render(f.left, 'impl_left')} -> {_render(f.right, 'top')}"
        return f"({text})" if ctx != "top" else text
    raise TypeError(f"not a formula: {f!r}")


def print_formula(f: Formula) -> str:
    """Canonical text of a core AST, with minimal parentheses."""
    return _render(f, "top")


def subformulas(f: Formula) -> list[Formula]:
    """All distinct subformulas, children strictly before parents."""
    seen = {}

    def walk(g):
        if g in seen:
            return
        if isinstance(g, Implies):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, Box):
            walk(g.body)
        elif isinstance(g, Rhd):
            walk(g.left)
            walk(g.right)
        seen[g] = None

    walk(f)
    return list(seen)


def atom_names(f: Formula) -> set[str]:
    return {g.name for g in subformulas(f) if isinstance(g, Atom)}


# ---------------------------------------------------------------------------
# Schemata
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Schema:
    """An axiom schema: a formula over the metavariables A, B, C."""

    id: str
    body: Formula

    @property
    def metavariables(self) -> tuple[str, ...]:
        names = atom_names(self.body)
        return tuple(m for m in METAVARIABLES if m in names)


class InstantiationError(ValueError):
    pass


def instantiate(schema: Schema, subst: dict[str, Formula]) -> Formula:
    """Substitute formulas for the schema's metavariables, homomorphically."""
    missing = [m for m in schema.metavariables if m not in subst]
    if missing:
        raise InstantiationError(f"no binding for metavariable(s) {', '.join(missing)}")

    def sub(f):
        if isinstance(f, Atom) and is_metavariable(f.name):
            return subst[f.name]
        if isinstance(f, Implies):
            return Implies(sub(f.left), sub(f.right))
        if isinstance(f, Box):
            return Box(sub(f.body))
        if isinstance(f, Rhd):
            return Rhd(sub(f.left), sub(f.right))
        return f

    return sub(schema.body)


_SCHEMA_TEXTS = [
    ("L1", "[](A -> B) -> ([]A -> []B)"),
    ("L2", "[]A -> [][]A"),
    ("L3", "[]([]A -> A) -> []A"),
    ("J1", "[](A -> B) -> A |> B"),
    ("J2", "(A |> B) & (B |> C) -> A |> C"),
    ("J3", "(A |> C) & (B |> C) -> A | B |> C"),
    ("J4", "A |> B -> (<>A -> <>B)"),
    ("J5", "<>A |> A"),
    ("M", "A |> B -> A & []C |> B & []C"),
    ("P", "A |> B -> [](A |> B)"),
    ("M0", "A |> B -> <>A & []C |> B & []C"),
    ("W", "A |> B -> A |> B & []~A"),
    ("Wstar", "A |> B -> B & []C |> B & []C & []~A"),
    ("P0", "A |> <>B -> [](A |> B)"),
    ("R", "A |> B -> ~(A |> ~C) |> B & []C"),
    ("Rstar", "A |> B -> ~(A |> ~C) |> B & []C & []~A"),
]

SCHEMAS: dict[str, Schema] = {sid: Schema(sid, parse(text)) for sid, text in _SCHEMA_TEXTS}

IL_AXIOMS = ("L1", "L2", "L3", "J1", "J2", "J3", "J4", "J5")


def schema(sid: str) -> Schema:
    try:
        return SCHEMAS[sid]
    except KeyError:
        raise KeyError(f"unknown schema {sid!r}; known: {', '.join(SCHEMAS)}") from None
