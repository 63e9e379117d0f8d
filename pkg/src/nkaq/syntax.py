"""Expression language shared by every other module.

Expressions are immutable trees built from ``0``, ``1``, atoms, ``+``, ``·``
and ``*``.  Effect negation ``~x`` is an extra node used by the effect layer.
Sums and products are kept flattened; sums are sorted by a fixed total order
but never collapsed, so ``a + a`` keeps both operands.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

ACTION = "action"
EFFECT = "effect"


@dataclass(frozen=True)
class Symbol:
    name: str
    sort: str = ACTION

    def __post_init__(self):
        if self.sort not in (ACTION, EFFECT):
            raise ValueError(f"unknown sort {self.sort!r}")


class Expr:
    """Base class.  Subclasses are frozen dataclasses."""

    tag = -1

    @cached_property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)

    @cached_property
    def key(self) -> tuple:
        return (self.size, self._struct())

    @cached_property
    def is_ground(self) -> bool:
        """False when a metavariable occurs somewhere below."""
        return all(c.is_ground for c in self.children)

    def _struct(self) -> tuple:
        return (self.tag,)

    @property
    def children(self) -> tuple:
        return ()

    def __lt__(self, other: "Expr") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return print_expr(self)

    def __add__(self, other: "Expr") -> "Expr":
        return mk_sum([self, other])

    def __mul__(self, other: "Expr") -> "Expr":
        return mk_prod([self, other])


@dataclass(frozen=True, eq=True)
class Zero(Expr):
    tag = 0

    def __repr__(self):
        return "Zero()"


@dataclass(frozen=True, eq=True)
class One(Expr):
    tag = 1

    def __repr__(self):
        return "One()"


@dataclass(frozen=True, eq=True)
class Atom(Expr):
    symbol: Symbol
    tag = 2

    @property
    def name(self) -> str:
        return self.symbol.name

    def _struct(self):
        return (self.tag, self.symbol.name, self.symbol.sort)

    def __repr__(self):
        return f"Atom({self.symbol.name!r})"


@dataclass(frozen=True, eq=True)
class Sum(Expr):
    args: tuple
    tag = 3

    def __post_init__(self):
        if len(self.args) < 2:
            raise ValueError("Sum needs at least two operands")

    @property
    def children(self):
        return self.args

    def _struct(self):
        return (self.tag, tuple(a.key for a in self.args))

    def __repr__(self):
        return f"Sum({list(self.args)!r})"


@dataclass(frozen=True, eq=True)
class Prod(Expr):
    args: tuple
    tag = 4

    def __post_init__(self):
        if len(self.args) < 2:
            raise ValueError("Prod needs at least two operands")

    @property
    def children(self):
        return self.args

    def _struct(self):
        return (self.tag, tuple(a.key for a in self.args))

    def __repr__(self):
        return f"Prod({list(self.args)!r})"


@dataclass(frozen=True, eq=True)
class Star(Expr):
    arg: Expr
    tag = 5

    @property
    def children(self):
        return (self.arg,)

    def _struct(self):
        return (self.tag, self.arg.key)

    def __repr__(self):
        return f"Star({self.arg!r})"


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    """Syntactic effect negation; only the effect rules look inside it."""

    arg: Expr
    tag = 6

    @property
    def children(self):
        return (self.arg,)

    def _struct(self):
        return (self.tag, self.arg.key)

    def __repr__(self):
        return f"Neg({self.arg!r})"


ZERO = Zero()
ONE = One()


def atom(name: str, sort: str = ACTION) -> Atom:
    return Atom(Symbol(name, sort))


def mk_sum(args: Iterable[Expr]) -> Expr:
    flat = []
    for a in args:
        if isinstance(a, Sum):
            flat.extend(a.args)
        else:
            flat.append(a)
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(sorted(flat, key=lambda x: x.key)))


def mk_prod(args: Iterable[Expr]) -> Expr:
    flat = []
    for a in args:
        if isinstance(a, Prod):
            flat.extend(a.args)
        else:
            flat.append(a)
    if not flat:
        return ONE
    if len(flat) == 1:
        return flat[0]
    return Prod(tuple(flat))


def canonical(e: Expr) -> Expr:
    if isinstance(e, Sum):
        return mk_sum(canonical(a) for a in e.args)
    if isinstance(e, Prod):
        return mk_prod(canonical(a) for a in e.args)
    if isinstance(e, Star):
        return Star(canonical(e.arg))
    if isinstance(e, Neg):
        return Neg(canonical(e.arg))
    return e


def is_canonical(e: Expr) -> bool:
    return canonical(e) == e


def atoms_of(e: Expr) -> set:
    if isinstance(e, Atom):
        return {e.symbol}
    out = set()
    for c in e.children:
        out |= atoms_of(c)
    return out


def substitute(e: Expr, binding: Mapping) -> Expr:
    """Replace atoms homomorphically.  Keys may be Symbols or names."""
    if isinstance(e, Atom):
        if e.symbol in binding:
            return binding[e.symbol]
        if e.symbol.name in binding:
            return binding[e.symbol.name]
        return e
    if isinstance(e, Sum):
        return mk_sum(substitute(a, binding) for a in e.args)
    if isinstance(e, Prod):
        return mk_prod(substitute(a, binding) for a in e.args)
    if isinstance(e, Star):
        return Star(substitute(e.arg, binding))
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, binding))
    return e


def subterm(e: Expr, path: Iterable[int]) -> Expr:
    for i in path:
        e = e.children[i]
    return e


# ---------------------------------------------------------------------------
# alphabets


class Alphabet:
    """Symbol table; names are unique and sorts fixed at declaration."""

    def __init__(self, symbols: Iterable[Symbol] = ()):
        self._by_name: dict[str, Symbol] = {}
        for s in symbols:
            self.declare(s.name, s.sort)

    @classmethod
    def of(cls, actions: Iterable[str] = (), effects: Iterable[str] = ()) -> "Alphabet":
        alpha = cls()
        for n in actions:
            alpha.declare(n, ACTION)
        for n in effects:
            alpha.declare(n, EFFECT)
        return alpha

    def declare(self, name: str, sort: str = ACTION) -> Symbol:
        if not _IDENT.fullmatch(name):
            raise ValueError(f"bad identifier {name!r}")
        old = self._by_name.get(name)
        if old is not None:
            if old.sort != sort:
                raise ValueError(f"symbol {name!r} already declared as {old.sort}")
            return old
        sym = Symbol(name, sort)
        self._by_name[name] = sym
        return sym

    def __contains__(self, name) -> bool:
        return name in self._by_name

    def __getitem__(self, name: str) -> Symbol:
        return self._by_name[name]

    def get(self, name: str):
        return self._by_name.get(name)

    def __iter__(self):
        return iter(self._by_name.values())

    def __len__(self):
        return len(self._by_name)

    def names(self) -> list[str]:
        return list(self._by_name)

    def actions(self) -> list[Symbol]:
        return [s for s in self if s.sort == ACTION]

    def effects(self) -> list[Symbol]:
        return [s for s in self if s.sort == EFFECT]


# ---------------------------------------------------------------------------
# parsing


class ParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


class UndeclaredSymbol(ParseError):
    def __init__(self, name: str, pos: int):
        super().__init__(f"undeclared symbol {name!r}", pos)
        self.name = name


_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_']*")
_TOKEN = re.compile(r"\s*(?:(?P<ident>[A-Za-z][A-Za-z0-9_']*)|(?P<num>[01](?![0-9A-Za-z_']))"
                    r"|(?P<rel><=|>=|≤|≥|=)|(?P<op>[+*()·.~¬]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, alphabet):
        self.toks = _tokenize(text)
        self.i = 0
        self.alphabet = alphabet

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.next()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def starts_base(self) -> bool:
        kind, val, _ = self.peek()
        return kind in ("ident", "num") or val in ("(", "~", "¬")

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek()[1] == "+":
            self.next()
            terms.append(self.term())
        return mk_sum(terms)

    def term(self) -> Expr:
        if not self.starts_base():
            kind, val, pos = self.peek()
            raise ParseError(f"expected a term, found {val or 'end of input'!r}", pos)
        factors = [self.factor()]
        while True:
            if self.peek()[1] in ("·", "."):
                self.next()
                factors.append(self.factor())
            elif self.starts_base():
                factors.append(self.factor())
            else:
                break
        return mk_prod(factors)

    def factor(self) -> Expr:
        e = self.base()
        while self.peek()[1] == "*":
            self.next()
            e = Star(e)
        return e

    def base(self) -> Expr:
        kind, val, pos = self.next()
        if kind == "num":
            return ZERO if val == "0" else ONE
        if kind == "ident":
            return Atom(self.lookup(val, pos))
        if val in ("~", "¬"):
            return Neg(self.base())
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected token {val or 'end of input'!r}", pos)

    def lookup(self, name: str, pos: int) -> Symbol:
        if self.alphabet is None:
            return Symbol(name, ACTION)
        if isinstance(self.alphabet, Alphabet):
            sym = self.alphabet.get(name)
        else:
            sym = self.alphabet.get(name) if hasattr(self.alphabet, "get") else None
            if isinstance(sym, str):
                sym = Symbol(name, sym)
        if sym is None:
            raise UndeclaredSymbol(name, pos)
        return sym

    def finish(self):
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos)


def parse_expr(text: str, alphabet=None) -> Expr:
    """Parse ``text``.  Without an alphabet every identifier is an action atom."""
    p = _Parser(text, alphabet)
    e = p.expr()
    p.finish()
    return e


_PREC_SUM, _PREC_PROD, _PREC_STAR = 0, 1, 2


def print_expr(e: Expr) -> str:
    return _print(e, _PREC_SUM)


def _print(e: Expr, ctx: int) -> str:
    if isinstance(e, Zero):
        return "0"
    if isinstance(e, One):
        return "1"
    if isinstance(e, Atom):
        return e.symbol.name
    if isinstance(e, Sum):
        s = " + ".join(_print(a, _PREC_PROD) for a in e.args)
        return f"({s})" if ctx > _PREC_SUM else s
    if isinstance(e, Prod):
        s = " ".join(_print(a, _PREC_STAR) for a in e.args)
        return f"({s})" if ctx > _PREC_PROD else s
    if isinstance(e, Star):
        inner = e.arg
        if isinstance(inner, (Sum, Prod, Neg)):
            return f"({print_expr(inner)})*"
        return _print(inner, _PREC_STAR) + "*"
    if isinstance(e, Neg):
        inner = e.arg
        if isinstance(inner, (Sum, Prod, Star)):
            return f"~({print_expr(inner)})"
        return "~" + _print(inner, _PREC_STAR)
    token = getattr(e, "print_token", None)
    if token is not None:
        return token()
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# (in)equations


@dataclass(frozen=True)
class Inequation:
    lhs: Expr
    rhs: Expr
    relation: str = "="

    def __post_init__(self):
        if self.relation not in ("=", "<="):
            raise ValueError(f"relation must be '=' or '<=', got {self.relation!r}")

    def canonical(self) -> "Inequation":
        return Inequation(canonical(self.lhs), canonical(self.rhs), self.relation)

    def __str__(self):
        rel = "=" if self.relation == "=" else "<="
        return f"{print_expr(self.lhs)} {rel} {print_expr(self.rhs)}"


@dataclass(frozen=True)
class HornClause:
    hypotheses: tuple = field(default=())
    conclusion: Inequation | None = None

    def __str__(self):
        hyps = " & ".join(str(h) for h in self.hypotheses)
        return f"{hyps} -> {self.conclusion}" if hyps else str(self.conclusion)


def parse_inequation(text: str, alphabet=None) -> Inequation:
    m = re.search(r"<=|≤|>=|≥|=", text)
    if m is None:
        raise ParseError("expected '=', '<=' or '>='", len(text))
    rel = m.group(0)
    left = parse_expr(text[:m.start()], alphabet)
    try:
        right = parse_expr(text[m.end():], alphabet)
    except ParseError as exc:
        raise ParseError(str(exc).rsplit(" at position", 1)[0], exc.pos + m.end()) from None
    if rel in (">=", "≥"):
        return Inequation(right, left, "<=")
    return Inequation(left, right, "=" if rel == "=" else "<=")
