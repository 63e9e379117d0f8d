"""Word-weight semantics of expressions over the extended naturals.

``coeff`` evaluates the coefficient of a single word directly from the
expression.  ``bounded_equiv`` compares two expressions on every word up to a
length bound.  On the proper fragment (no star over a body with a nonzero
empty-word weight) expressions compile to finite weighted automata through the
position construction, and ``exact_equiv`` decides equality over the
rationals.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Sequence

from .syntax import Atom, Expr, Neg, One, Prod, Star, Sum, Zero, atoms_of


@total_ordering
class ExtNat:
    """Element of N ∪ {∞}."""

    __slots__ = ("value",)

    def __init__(self, value):
        if isinstance(value, ExtNat):
            value = value.value
        if value is not None and (not isinstance(value, int) or value < 0):
            raise ValueError(f"not an extended natural: {value!r}")
        self.value = value  # None encodes infinity

    @property
    def is_inf(self) -> bool:
        return self.value is None

    def __add__(self, other):
        other = _ext(other)
        if self.is_inf or other.is_inf:
            return INF
        return ExtNat(self.value + other.value)

    __radd__ = __add__

    def __mul__(self, other):
        other = _ext(other)
        if self.value == 0 or other.value == 0:
            return ExtNat(0)
        if self.is_inf or other.is_inf:
            return INF
        return ExtNat(self.value * other.value)

    __rmul__ = __mul__

    def star(self):
        return ExtNat(1) if self.value == 0 else INF

    def __eq__(self, other):
        if isinstance(other, (int, ExtNat)):
            return self.value == _ext(other).value
        return NotImplemented

    def __lt__(self, other):
        other = _ext(other)
        if self.is_inf:
            return False
        if other.is_inf:
            return True
        return self.value < other.value

    def __hash__(self):
        return hash(self.value)

    def __bool__(self):
        return self.value != 0

    def __repr__(self):
        return "INF" if self.is_inf else str(self.value)

    __str__ = __repr__


INF = ExtNat(None)


def _ext(x) -> ExtNat:
    return x if isinstance(x, ExtNat) else ExtNat(x)


def extnat_eval(op: str, *args) -> ExtNat:
    """Evaluate ``add``, ``mul`` (n-ary) or ``star`` (unary) on extended naturals."""
    vals = [_ext(a) for a in args]
    if op == "add":
        out = ExtNat(0)
        for v in vals:
            out = out + v
        return out
    if op == "mul":
        out = ExtNat(1)
        for v in vals:
            out = out * v
        return out
    if op == "star":
        (v,) = vals
        return v.star()
    raise ValueError(f"unknown operation {op!r}")


def countable_sum(terms: Iterable, infinitely_many_nonzero: bool = False) -> ExtNat:
    """Sum of a family given by its nonzero members.

    ``infinitely_many_nonzero`` flags a family whose listed members are only a
    finite window of infinitely many nonzero terms.
    """
    if infinitely_many_nonzero:
        return INF
    return extnat_eval("add", *terms)


def parse_extnat(text) -> ExtNat:
    if isinstance(text, int):
        return ExtNat(text)
    if str(text).strip().upper() in ("INF", "∞"):
        return INF
    return ExtNat(int(text))


# ---------------------------------------------------------------------------
# coefficients


def _word(w) -> tuple:
    if isinstance(w, str):
        if w in ("", "eps", "ε"):
            return ()
        return tuple(w)
    return tuple(w)


def coeff(e: Expr, w) -> ExtNat:
    """Coefficient of word ``w`` in the series denoted by ``e``.

    A word is a string of one-character symbol names or a sequence of names.
    """
    word = _word(w)
    table = _CoeffTable(word)
    return table.get(e, 0, len(word))


class _CoeffTable:
    """Memoized coefficients of subexpressions on factors ``word[i:j]``."""

    def __init__(self, word: tuple):
        self.word = word
        self.memo: dict = {}

    def get(self, e: Expr, i: int, j: int) -> ExtNat:
        k = (e, i, j)
        hit = self.memo.get(k)
        if hit is None:
            hit = self._compute(e, i, j)
            self.memo[k] = hit
        return hit

    def _compute(self, e: Expr, i: int, j: int) -> ExtNat:
        if isinstance(e, Zero):
            return ExtNat(0)
        if isinstance(e, One):
            return ExtNat(1 if i == j else 0)
        if isinstance(e, Atom):
            return ExtNat(1 if j == i + 1 and self.word[i] == e.symbol.name else 0)
        if isinstance(e, Sum):
            return extnat_eval("add", *(self.get(a, i, j) for a in e.args))
        if isinstance(e, Prod):
            return self._prod(e.args, i, j)
        if isinstance(e, Star):
            eps = self.get(e.arg, i, i)
            proper = self._star_proper(e.arg, i, j)
            if eps.value == 0:
                return proper
            # with a nonzero empty-word weight any decomposition can be padded
            # with arbitrarily many empty factors
            return INF if proper.value != 0 else ExtNat(0)
        if isinstance(e, Neg):
            raise ValueError("effect negation has no series semantics")
        raise TypeError(f"not an expression: {e!r}")

    def _prod(self, args: tuple, i: int, j: int) -> ExtNat:
        head, rest = args[0], args[1:]
        total = ExtNat(0)
        for k in range(i, j + 1):
            left = self.get(head, i, k)
            if left.value == 0:
                continue
            right = self.get(rest[0], k, j) if len(rest) == 1 else self._prod_memo(rest, k, j)
            total = total + left * right
        return total

    def _prod_memo(self, args: tuple, i: int, j: int) -> ExtNat:
        k = (("prod",) + args, i, j)
        hit = self.memo.get(k)
        if hit is None:
            hit = self._prod(args, i, j)
            self.memo[k] = hit
        return hit

    def _star_proper(self, body: Expr, i: int, j: int) -> ExtNat:
        # decompositions of word[i:j] into nonempty factors
        k = (("star-proper", body), i, j)
        hit = self.memo.get(k)
        if hit is not None:
            return hit
        if i == j:
            out = ExtNat(1)
        else:
            out = ExtNat(0)
            for m in range(i + 1, j + 1):
                first = self.get(body, i, m)
                if first.value == 0:
                    continue
                out = out + first * self._star_proper(body, m, j)
        self.memo[k] = out
        return out


# truncated series: sparse dicts word -> weight, weights are ints or None for ∞


def _tadd(x, y):
    return None if x is None or y is None else x + y


def _tmul(x, y):
    if x == 0 or y == 0:
        return 0
    return None if x is None or y is None else x * y


def _tacc(into: dict, w: tuple, c) -> None:
    if c == 0:
        return
    into[w] = _tadd(into.get(w, 0), c)


def _tprod(f: dict, g: dict, L: int) -> dict:
    out: dict = {}
    for u, x in f.items():
        room = L - len(u)
        for v, y in g.items():
            if len(v) <= room:
                _tacc(out, u + v, _tmul(x, y))
    return out


def truncated_series(e: Expr, L: int) -> dict:
    """All nonzero coefficients on words of length <= L, computed bottom-up.

    Keys are tuples of symbol names.  This is the fast route used by
    ``bounded_equiv``; ``coeff`` evaluates a single word independently.
    """
    memo: dict = {}

    def go(x: Expr) -> dict:
        hit = memo.get(x)
        if hit is not None:
            return hit
        if isinstance(x, Zero):
            out = {}
        elif isinstance(x, One):
            out = {(): 1}
        elif isinstance(x, Atom):
            out = {(x.symbol.name,): 1} if L >= 1 else {}
        elif isinstance(x, Sum):
            out = {}
            for a in x.args:
                for w, c in go(a).items():
                    _tacc(out, w, c)
        elif isinstance(x, Prod):
            out = {(): 1}
            for a in x.args:
                out = _tprod(out, go(a), L)
        elif isinstance(x, Star):
            body = dict(go(x.arg))
            eps = body.pop((), 0)
            out = {(): 1}
            # every word of length n is settled after n rounds of s = 1 + body s
            for _ in range(L):
                nxt = _tprod(body, out, L)
                _tacc(nxt, (), 1)
                out = nxt
            if eps != 0:
                out = {w: None for w in out}
        elif isinstance(x, Neg):
            raise ValueError("effect negation has no series semantics")
        else:
            raise TypeError(f"not an expression: {x!r}")
        out = {w: c for w, c in out.items() if c != 0}
        memo[x] = out
        return out

    return go(e)


def eps_coeff(e: Expr) -> ExtNat:
    return coeff(e, ())


def is_proper(e: Expr) -> bool:
    """True when every starred subexpression has empty-word weight 0."""
    return _improper_star(e) is None


def _improper_star(e: Expr):
    if isinstance(e, Star):
        inner = _improper_star(e.arg)
        if inner is not None:
            return inner
        return e if eps_coeff(e.arg).value != 0 else None
    for c in e.children:
        found = _improper_star(c)
        if found is not None:
            return found
    return None


def words_upto(alphabet: Sequence[str], L: int):
    """All words of length <= L in shortlex order."""
    letters = sorted(alphabet)
    for n in range(L + 1):
        for w in itertools.product(letters, repeat=n):
            yield w


def alphabet_names(*exprs: Expr) -> list[str]:
    names = set()
    for e in exprs:
        names |= {s.name for s in atoms_of(e)}
    return sorted(names)


@dataclass(frozen=True)
class Equal:
    bound: int | None = None

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Counterexample:
    word: tuple
    coeff_e: ExtNat
    coeff_f: ExtNat

    def __bool__(self):
        return False

    @property
    def text(self) -> str:
        return word_text(self.word)


@dataclass(frozen=True)
class Distinguished:
    word: tuple

    def __bool__(self):
        return False


@dataclass(frozen=True)
class Unsupported:
    reason: str = ""

    def __bool__(self):
        return False


def word_text(w: Sequence[str]) -> str:
    if not w:
        return "eps"
    if all(len(a) == 1 for a in w):
        return "".join(w)
    return " ".join(w)


def bounded_equiv(e: Expr, f: Expr, L: int, alphabet: Sequence[str] | None = None):
    """Compare coefficients on every word of length <= L.

    Returns ``Equal`` or the shortest, then lexicographically least,
    ``Counterexample``.
    """
    if L < 0:
        raise ValueError("length bound must be nonnegative")
    letters = alphabet if alphabet is not None else alphabet_names(e, f)
    se, sf = truncated_series(e, L), truncated_series(f, L)
    if se == sf:
        return Equal(L)
    for w in words_upto(letters, L):
        ce, cf = se.get(w, 0), sf.get(w, 0)
        if ce != cf:
            return Counterexample(w, ExtNat(ce), ExtNat(cf))
    # words outside the given alphabet are never compared
    return Equal(L)


def series_dump(e: Expr, L: int, alphabet: Sequence[str] | None = None) -> str:
    """Nonzero coefficients as ``word<TAB>coeff`` lines."""
    letters = alphabet if alphabet is not None else alphabet_names(e)
    lines = []
    for w in words_upto(letters, L):
        c = coeff(e, w)
        if c.value != 0:
            lines.append(f"{word_text(w)}\t{c}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# position automata


class ImproperStar(ValueError):
    def __init__(self, sub: Expr):
        from .syntax import print_expr
        super().__init__(f"star over a body with nonzero empty-word weight: {print_expr(sub)}")
        self.subexpression = sub


@dataclass
class WeightedAutomaton:
    """Finite automaton with natural weights.

    ``initial`` and ``final`` are vectors, ``transitions[a]`` is a square
    matrix indexed ``[source][target]``.
    """

    n_states: int
    initial: list
    final: list
    transitions: dict

    def weight(self, w) -> int:
        vec = list(self.initial)
        for a in _word(w):
            m = self.transitions.get(a)
            if m is None:
                return 0
            vec = _vec_mat(vec, m)
        return sum(x * y for x, y in zip(vec, self.final))


def _vec_mat(v, m):
    n = len(m[0]) if m else 0
    out = [0] * n
    for i, x in enumerate(v):
        if x:
            row = m[i]
            for j in range(n):
                if row[j]:
                    out[j] += x * row[j]
    return out


def glushkov_automaton(e: Expr) -> WeightedAutomaton:
    """Position automaton of a proper expression.

    State 0 is initial; state ``k`` (k >= 1) is the k-th atom occurrence.
    """
    positions: list[str] = []
    info = _glushkov(e, positions)
    n = len(positions) + 1
    const, first, last, follow = info
    initial = [1] + [0] * (n - 1)
    final = [const] + [last.get(p, 0) for p in range(1, n)]
    trans: dict[str, list] = {}
    for a in sorted(set(positions)):
        trans[a] = [[0] * n for _ in range(n)]
    for p, w in first.items():
        trans[positions[p - 1]][0][p] += w
    for (p, q), w in follow.items():
        trans[positions[q - 1]][p][q] += w
    return WeightedAutomaton(n, initial, final, trans)


def _glushkov(e: Expr, positions: list):
    """Return (constant term, first, last, follow) with dict-valued weights."""
    if isinstance(e, Zero):
        return 0, {}, {}, {}
    if isinstance(e, One):
        return 1, {}, {}, {}
    if isinstance(e, Atom):
        positions.append(e.symbol.name)
        p = len(positions)
        return 0, {p: 1}, {p: 1}, {}
    if isinstance(e, Sum):
        const, first, last, follow = 0, {}, {}, {}
        for a in e.args:
            c, f, l, fo = _glushkov(a, positions)
            const += c
            _acc(first, f)
            _acc(last, l)
            _acc(follow, fo)
        return const, first, last, follow
    if isinstance(e, Prod):
        const, first, last, follow = _glushkov(e.args[0], positions)
        for a in e.args[1:]:
            c, f, l, fo = _glushkov(a, positions)
            _acc(follow, fo)
            for p, wp in last.items():
                for q, wq in f.items():
                    follow[(p, q)] = follow.get((p, q), 0) + wp * wq
            new_first = dict(first)
            _acc(new_first, {q: const * w for q, w in f.items()})
            new_last = {p: w * c for p, w in last.items() if w * c}
            _acc(new_last, l)
            first, last, const = new_first, new_last, const * c
        return const, first, last, follow
    if isinstance(e, Star):
        c, f, l, fo = _glushkov(e.arg, positions)
        if c != 0:
            raise ImproperStar(e)
        follow = dict(fo)
        for p, wp in l.items():
            for q, wq in f.items():
                follow[(p, q)] = follow.get((p, q), 0) + wp * wq
        return 1, f, l, follow
    if isinstance(e, Neg):
        raise ValueError("effect negation has no series semantics")
    raise TypeError(f"not an expression: {e!r}")


def _acc(into: dict, more: dict):
    for k, v in more.items():
        if v:
            into[k] = into.get(k, 0) + v


def exact_equiv(e: Expr, f: Expr):
    """Decide series equality on the proper fragment.

    Works on the difference of the two position automata: explore reachable
    state vectors breadth first over exact rationals, keeping a basis of
    their span.  The series agree iff every basis vector has zero final
    weight.
    """
    try:
        ae = glushkov_automaton(e)
        af = glushkov_automaton(f)
    except ImproperStar as exc:
        return Unsupported(str(exc))
    letters = sorted(set(ae.transitions) | set(af.transitions))
    n = ae.n_states + af.n_states

    def step(vec, a):
        left = _vec_mat(vec[:ae.n_states], ae.transitions[a]) if a in ae.transitions else [0] * ae.n_states
        right = _vec_mat(vec[ae.n_states:], af.transitions[a]) if a in af.transitions else [0] * af.n_states
        return left + right

    final = [Fraction(x) for x in ae.final] + [Fraction(-x) for x in af.final]
    start = [Fraction(x) for x in ae.initial] + [Fraction(x) for x in af.initial]
    basis: list[tuple[list, int]] = []  # reduced rows with pivot index
    queue = [((), start)]
    while queue:
        word, vec = queue.pop(0)
        reduced = _reduce(vec, basis)
        if reduced is None:
            continue
        if sum(x * y for x, y in zip(vec, final)) != 0:
            return Distinguished(word)
        basis.append(reduced)
        if len(basis) > n:
            break
        for a in letters:
            queue.append((word + (a,), step(vec, a)))
    return Equal(None)


def _reduce(vec, basis):
    v = list(vec)
    for row, piv in basis:
        if v[piv] != 0:
            c = v[piv] / row[piv]
            v = [x - c * y for x, y in zip(v, row)]
    for i, x in enumerate(v):
        if x != 0:
            return v, i
    return None
