"""Checker for equational and inequational derivation chains.

A script declares an alphabet, optional effect symbols and partitions, named
Horn hypotheses and a list of lemmas.  Each lemma is proven by one chain of
terms (or, for an equality, two inequality chains separated by ``---``); every
line after the first names the single rule that turns the previous term into
this one.  Associativity of ``·`` and associativity/commutativity of ``+`` are
built into matching; everything else is an explicit step.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from importlib import resources
from types import MappingProxyType
from typing import Callable, Iterator

from .syntax import (EFFECT, Alphabet, Atom, Expr, Inequation, Neg, ParseError, Prod, Star, Sum,
                     Symbol, Zero, mk_prod, mk_sum, parse_expr, print_expr)

ANY = "any"
TOP = Atom(Symbol("e", EFFECT))


# ---------------------------------------------------------------------------
# metavariables


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str
    sort: str = ANY
    tag = 7
    is_ground = False

    def _struct(self):
        return (self.tag, self.name)

    def print_token(self) -> str:
        return "?" + self.name

    def __repr__(self):
        return f"Var({self.name!r})"


def instantiate(e: Expr, sigma: dict) -> Expr:
    if e.is_ground:
        return e
    if isinstance(e, Var):
        return sigma.get(e.name, e)
    if isinstance(e, Sum):
        return mk_sum(instantiate(a, sigma) for a in e.args)
    if isinstance(e, Prod):
        return mk_prod(instantiate(a, sigma) for a in e.args)
    if isinstance(e, Star):
        return Star(instantiate(e.arg, sigma))
    if isinstance(e, Neg):
        return Neg(instantiate(e.arg, sigma))
    return e


def metavars(e: Expr) -> set:
    if e.is_ground:
        return set()
    if isinstance(e, Var):
        return {e.name}
    out = set()
    for c in e.children:
        out |= metavars(c)
    return out


def generalize(e: Expr, keep=frozenset({"e"})) -> Expr:
    """Turn every atom (except those in ``keep``) into a metavariable of its sort."""
    if isinstance(e, Atom):
        if e.symbol.name in keep:
            return e
        return Var(e.symbol.name, EFFECT if e.symbol.sort == EFFECT else ANY)
    if isinstance(e, Sum):
        return mk_sum(generalize(a, keep) for a in e.args)
    if isinstance(e, Prod):
        return mk_prod(generalize(a, keep) for a in e.args)
    if isinstance(e, Star):
        return Star(generalize(e.arg, keep))
    if isinstance(e, Neg):
        return Neg(generalize(e.arg, keep))
    return e


_EFFECT_VARS = set("abc")


def schema(text: str) -> Expr:
    """Parse a rule pattern: ``p q r s`` range over all terms, ``a b c`` over effects."""
    e = parse_expr(text)

    def conv(x):
        if isinstance(x, Atom):
            n = x.symbol.name
            if n == "e":
                return TOP
            base = n.rstrip("'0123456789")
            return Var(n, EFFECT if base in _EFFECT_VARS else ANY)
        if isinstance(x, Sum):
            return mk_sum(conv(a) for a in x.args)
        if isinstance(x, Prod):
            return mk_prod(conv(a) for a in x.args)
        if isinstance(x, Star):
            return Star(conv(x.arg))
        if isinstance(x, Neg):
            return Neg(conv(x.arg))
        return x

    return conv(e)


def schema_ineq(text: str) -> Inequation:
    m = re.search(r"<=|>=|=", text)
    rel = m.group(0)
    lhs, rhs = schema(text[:m.start()]), schema(text[m.end():])
    if rel == ">=":
        return Inequation(rhs, lhs, "<=")
    return Inequation(lhs, rhs, rel)


# ---------------------------------------------------------------------------
# errors


class ProofError(Exception):
    pass


class NoMatch(ProofError):
    def __init__(self, message: str, position=None):
        super().__init__(message)
        self.position = position


class AmbiguousMatch(ProofError):
    pass


class UnprovenPremise(ProofError):
    def __init__(self, premise: Inequation):
        super().__init__(f"premise not proven: {premise}")
        self.premise = premise


class UnknownRule(ProofError):
    pass


class ScriptError(ProofError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# context: partitions, effect typing, proven facts


@dataclass(frozen=True)
class Fact:
    name: str
    statement: Inequation
    schematic: bool = False


class Context:
    def __init__(self, partitions=(), facts=(), db=None, axioms_only=False):
        self.partitions = tuple(tuple(p) for p in partitions)
        self.members = {m for p in self.partitions for m in p}
        self.facts = list(facts)
        self.db = db
        self.axioms_only = axioms_only
        self.used: set = set()

    def effect_like(self, t: Expr) -> bool:
        if isinstance(t, Atom):
            return t.symbol.sort == EFFECT
        if isinstance(t, Zero):
            return True
        if isinstance(t, Neg):
            return self.effect_like(t.arg)
        if isinstance(t, Prod):
            head = t.args[0]
            return (isinstance(head, Atom) and head.symbol.name in self.members
                    and self.effect_like(mk_prod(t.args[1:])))
        if isinstance(t, Sum):
            return any(self._partition_sum(t.args, p, allow_subset=True) is not None
                       for p in self.partitions)
        return False

    def _partition_sum(self, summands, part, allow_subset=False):
        """Map member -> remainder when ``summands`` are ``m_i x_i`` over one partition."""
        out = {}
        for s in summands:
            if not (isinstance(s, Prod) and isinstance(s.args[0], Atom)):
                return None
            m = s.args[0].symbol.name
            if m not in part or m in out:
                return None
            rest = mk_prod(s.args[1:])
            if not self.effect_like(rest):
                return None
            out[m] = rest
        if not allow_subset and len(out) != len(part):
            return None
        return out

    def proven(self, goal: Inequation) -> bool:
        if goal.lhs == goal.rhs:
            return True
        for f in self.facts:
            if _fact_covers(f.statement, goal, f.schematic, self):
                self.used.add(f.name)
                return True
        if self.db is not None:
            for rule in self.db.rules.values():
                if rule.premises or rule.rewriter is not None:
                    continue
                if self.axioms_only and rule.kind != "axiom":
                    continue
                for st in rule.statements:
                    if _fact_covers(st, goal, True, self):
                        self.used.add(rule.name)
                        return True
        return False


def _fact_covers(fact: Inequation, goal: Inequation, schematic: bool, ctx: Context) -> bool:
    orientations = [(fact.lhs, fact.rhs)]
    if fact.relation == "=":
        orientations.append((fact.rhs, fact.lhs))
    elif goal.relation == "=":
        return False
    for lhs, rhs in orientations:
        if schematic:
            for s in match(lhs, goal.lhs, {}, ctx):
                if next(match(rhs, goal.rhs, s, ctx), None) is not None:
                    return True
        elif lhs == goal.lhs and rhs == goal.rhs:
            return True
    return False


# ---------------------------------------------------------------------------
# matching modulo A (for ·) and AC (for +)


def match(pat: Expr, term: Expr, sigma: dict, ctx: Context) -> Iterator[dict]:
    if pat.is_ground:
        if pat == term:
            yield sigma
        return
    if isinstance(pat, Var):
        bound = sigma.get(pat.name)
        if bound is not None:
            if bound == term:
                yield sigma
            return
        if pat.sort == EFFECT and not ctx.effect_like(term):
            return
        s2 = dict(sigma)
        s2[pat.name] = term
        yield s2
        return
    if isinstance(pat, Star):
        if isinstance(term, Star):
            yield from match(pat.arg, term.arg, sigma, ctx)
        return
    if isinstance(pat, Neg):
        if isinstance(term, Neg):
            yield from match(pat.arg, term.arg, sigma, ctx)
        return
    if isinstance(pat, Prod):
        factors = term.args if isinstance(term, Prod) else (term,)
        yield from _match_seq(pat.args, factors, sigma, ctx)
        return
    if isinstance(pat, Sum):
        summands = term.args if isinstance(term, Sum) else (term,)
        for s, rest in _match_ac(list(pat.args), list(summands), sigma, ctx, False):
            yield s
        return


def _match_seq(pats, factors, sigma, ctx):
    if not pats:
        if not factors:
            yield sigma
        return
    p, rest = pats[0], pats[1:]
    room = len(factors) - len(rest)
    if room < 1:
        return
    if isinstance(p, Var):
        for k in range(1, room + 1):
            for s in match(p, mk_prod(factors[:k]), sigma, ctx):
                yield from _match_seq(rest, factors[k:], s, ctx)
    else:
        for s in match(p, factors[0], sigma, ctx):
            yield from _match_seq(rest, factors[1:], s, ctx)


def _remove_multiset(terms, needed):
    left = list(terms)
    for n in needed:
        for i, t in enumerate(left):
            if t == n:
                del left[i]
                break
        else:
            return None
    return left


def _match_ac(pats, terms, sigma, ctx, rest_ok):
    """Yield ``(sigma, leftover)``; leftover is empty unless ``rest_ok``."""
    if not pats:
        if rest_ok or not terms:
            yield sigma, terms
        return
    idx = next((i for i, p in enumerate(pats) if not isinstance(p, Var)), None)
    if idx is None:
        idx = next((i for i, p in enumerate(pats) if p.name in sigma), 0)
    p, rest = pats[idx], pats[:idx] + pats[idx + 1:]
    if not isinstance(p, Var):
        seen = set()
        for i, t in enumerate(terms):
            if t.key in seen:
                continue
            seen.add(t.key)
            for s in match(p, t, sigma, ctx):
                yield from _match_ac(rest, terms[:i] + terms[i + 1:], s, ctx, rest_ok)
        return
    bound = sigma.get(p.name)
    if bound is not None:
        need = bound.args if isinstance(bound, Sum) else (bound,)
        left = _remove_multiset(terms, need)
        if left is not None:
            yield from _match_ac(rest, left, sigma, ctx, rest_ok)
        return
    n = len(terms)
    if not rest and not rest_ok:
        if terms:
            for s in match(p, mk_sum(terms), sigma, ctx):
                yield s, []
        return
    seen = set()
    for size in range(1, n - len(rest) + 1):
        for combo in itertools.combinations(range(n), size):
            chosen = [terms[i] for i in combo]
            sig = tuple(sorted(c.key for c in chosen))
            if sig in seen:
                continue
            seen.add(sig)
            others = [terms[i] for i in range(n) if i not in combo]
            for s in match(p, mk_sum(chosen), sigma, ctx):
                yield from _match_ac(rest, others, s, ctx, rest_ok)


# ---------------------------------------------------------------------------
# positions


def replace_at(term: Expr, path: tuple, new: Expr) -> Expr:
    if not path:
        return new
    k, tail = path[0], path[1:]
    kids = list(term.children)
    kids[k] = replace_at(kids[k], tail, new)
    if isinstance(term, Sum):
        return mk_sum(kids)
    if isinstance(term, Prod):
        return mk_prod(kids)
    if isinstance(term, Star):
        return Star(kids[0])
    if isinstance(term, Neg):
        return Neg(kids[0])
    raise ValueError("path runs past a leaf")


def positions(term: Expr, path=(), under_neg=False) -> Iterator[tuple]:
    yield path, term, under_neg
    for k, c in enumerate(term.children):
        yield from positions(c, path + (k,), under_neg or isinstance(term, Neg))


def parse_path(text: str) -> tuple:
    text = text.strip()
    if text in ("", "root", "."):
        return ()
    return tuple(int(x) for x in re.split(r"[.,/ ]+", text) if x)


# ---------------------------------------------------------------------------
# rules


REL_EQ, REL_LE, REL_GE = "=", "<=", ">="


@dataclass(frozen=True)
class Rewrite:
    """One rule instance at a node: ``new`` may still contain metavariables."""
    new: Expr
    sigma: dict
    relation: str
    premises: tuple = ()


@dataclass(frozen=True)
class Rule:
    name: str
    kind: str  # axiom | lemma | hypothesis | conditional
    statements: tuple
    premises: tuple = ()
    rewriter: Callable | None = None
    schematic: bool = True

    @property
    def statement(self) -> Inequation:
        return self.statements[0]

    def __str__(self):
        if self.premises:
            return " & ".join(str(p) for p in self.premises) + " -> " + str(self.statement)
        return str(self.statement)

    def rewrites(self, node: Expr, direction: str, ctx: Context, sigma0: dict) -> Iterator[Rewrite]:
        if self.rewriter is not None:
            yield from self.rewriter(node, direction, ctx)
            return
        for st in self.statements:
            src, dst = (st.lhs, st.rhs) if direction == "LR" else (st.rhs, st.lhs)
            rel = REL_EQ if st.relation == "=" else (REL_LE if direction == "LR" else REL_GE)
            for sigma, wrap in _site_matches(src, node, sigma0, ctx):
                yield Rewrite(wrap(instantiate(dst, sigma)), sigma, rel, self.premises)


def _site_matches(pat: Expr, node: Expr, sigma0: dict, ctx: Context):
    """Match ``pat`` against ``node`` or a segment/sub-sum of it.

    Yields ``(sigma, wrap)`` where ``wrap(replacement)`` rebuilds the node.
    """
    for s in match(pat, node, sigma0, ctx):
        yield s, (lambda r: r)
    if isinstance(node, Prod) and isinstance(pat, (Prod, Var)):
        a = node.args
        n = len(a)
        # proper segments of length >= 2; single factors are positions of their own
        for i in range(n):
            for j in range(i + 2, n + 1):
                if j - i == n:
                    continue
                seg = mk_prod(a[i:j])
                for s in match(pat, seg, sigma0, ctx):
                    yield s, (lambda r, i=i, j=j: mk_prod(a[:i] + (r,) + a[j:]))
    if isinstance(node, Sum):
        terms = list(node.args)
        if isinstance(pat, Sum):
            for s, left in _match_ac(list(pat.args), terms, sigma0, ctx, True):
                if left:
                    yield s, (lambda r, left=tuple(left): mk_sum(left + (r,)))
        elif isinstance(pat, Var):
            n = len(terms)
            seen = set()
            for size in range(2, n):
                for combo in itertools.combinations(range(n), size):
                    chosen = [terms[i] for i in combo]
                    sig = tuple(sorted(c.key for c in chosen))
                    if sig in seen:
                        continue
                    seen.add(sig)
                    others = tuple(terms[i] for i in range(n) if i not in combo)
                    for s in match(pat, mk_sum(chosen), sigma0, ctx):
                        yield s, (lambda r, others=others: mk_sum(others + (r,)))


# builtin rewriters ----------------------------------------------------------


def _distributive(node: Expr, direction: str, ctx: Context):
    if direction == "LR":
        if not isinstance(node, Prod):
            return
        a = node.args
        n = len(a)
        for k, f in enumerate(a):
            if not isinstance(f, Sum):
                continue
            for i in range(k):
                mult = a[i:k]
                dist = mk_sum(mk_prod(mult + (s,)) for s in f.args)
                yield Rewrite(mk_prod(a[:i] + (dist,) + a[k + 1:]), {}, REL_EQ)
            for j in range(k + 2, n + 1):
                mult = a[k + 1:j]
                dist = mk_sum(mk_prod((s,) + mult) for s in f.args)
                yield Rewrite(mk_prod(a[:k] + (dist,) + a[j:]), {}, REL_EQ)
        return
    if not isinstance(node, Sum):
        return
    terms = node.args
    n = len(terms)
    seen = set()
    for size in range(2, n + 1):
        for combo in itertools.combinations(range(n), size):
            chosen = [terms[i] for i in combo]
            others = tuple(terms[i] for i in range(n) if i not in combo)
            fl = [c.args if isinstance(c, Prod) else (c,) for c in chosen]
            shortest = min(len(x) for x in fl)
            for length in range(1, shortest):
                pre = fl[0][:length]
                if all(x[:length] == pre for x in fl):
                    inner = mk_sum(mk_prod(x[length:]) for x in fl)
                    new = mk_sum(others + (mk_prod(pre + (inner,)),))
                    if new.key not in seen:
                        seen.add(new.key)
                        yield Rewrite(new, {}, REL_EQ)
                suf = fl[0][len(fl[0]) - length:]
                if all(x[len(x) - length:] == suf for x in fl):
                    inner = mk_sum(mk_prod(x[:len(x) - length]) for x in fl)
                    new = mk_sum(others + (mk_prod((inner,) + suf),))
                    if new.key not in seen:
                        seen.add(new.key)
                        yield Rewrite(new, {}, REL_EQ)


def _partition_transform(node: Expr, direction: str, ctx: Context):
    if direction == "LR":
        if isinstance(node, Neg) and isinstance(node.arg, Sum):
            for part in ctx.partitions:
                parts = ctx._partition_sum(node.arg.args, part)
                if parts is not None:
                    yield Rewrite(mk_sum(mk_prod((Atom(Symbol(m)), Neg(x))) for m, x in parts.items()),
                                  {}, REL_EQ)
        return
    if not isinstance(node, Sum):
        return
    for part in ctx.partitions:
        options = []
        for m in part:
            opts = []
            for i, s in enumerate(node.args):
                if (isinstance(s, Prod) and s.args[0] == Atom(Symbol(m))):
                    rest = mk_prod(s.args[1:])
                    if isinstance(rest, Neg) and ctx.effect_like(rest.arg):
                        opts.append((i, rest.arg))
            options.append(opts)
        for choice in itertools.product(*options):
            idx = [i for i, _ in choice]
            if len(set(idx)) != len(idx):
                continue
            others = tuple(s for i, s in enumerate(node.args) if i not in idx)
            inner = mk_sum(mk_prod((Atom(Symbol(m)), x)) for m, (_, x) in zip(part, choice))
            yield Rewrite(mk_sum(others + (Neg(inner),)), {}, REL_EQ)


def _partition_unit(node: Expr, direction: str, ctx: Context):
    if direction == "RL":
        if node == TOP:
            for part in ctx.partitions:
                yield Rewrite(mk_sum(mk_prod((Atom(Symbol(m)), TOP)) for m in part), {}, REL_EQ)
        return
    if not isinstance(node, Sum):
        return
    for part in ctx.partitions:
        needed = [mk_prod((Atom(Symbol(m)), TOP)) for m in part]
        left = _remove_multiset(node.args, needed)
        if left is not None:
            yield Rewrite(mk_sum(tuple(left) + (TOP,)), {}, REL_EQ)


class RuleDB:
    """Immutable name -> Rule table."""

    def __init__(self, rules):
        self._rules = MappingProxyType(dict(rules))

    @property
    def rules(self):
        return self._rules

    def lookup(self, name: str) -> Rule:
        r = self._rules.get(name)
        if r is None:
            raise UnknownRule(f"unknown rule {name!r}")
        return r

    def __contains__(self, name):
        return name in self._rules

    def names(self) -> list:
        return list(self._rules)

    def extend(self, extra) -> "RuleDB":
        d = dict(self._rules)
        for r in extra:
            d[r.name] = r
        return RuleDB(d)

    def axioms_only(self) -> "RuleDB":
        return RuleDB({k: r for k, r in self._rules.items() if r.kind == "axiom"
                       or (r.kind == "conditional" and k in _CONDITIONAL_AXIOMS)})


_CONDITIONAL_AXIOMS = {"star-ind-left", "star-ind-right"}


def _rule(name, kind, *stmts, premises=(), rewriter=None):
    return Rule(name, kind, tuple(schema_ineq(s) for s in stmts),
                tuple(schema_ineq(p) for p in premises), rewriter)


def builtin_rules() -> RuleDB:
    rules = [
        # semiring and order axioms; A/AC are handled by matching
        _rule("plus-zero", "axiom", "p + 0 = p"),
        _rule("unit", "axiom", "1 p = p", "p 1 = p"),
        _rule("annihilation", "axiom", "0 p = 0", "p 0 = 0"),
        _rule("distributive", "axiom", "p (q + r) = p q + p r", "(p + q) r = p r + q r",
              rewriter=_distributive),
        _rule("star-unfold", "axiom", "1 + p p* <= p*"),
        _rule("star-ind-left", "conditional", "p* q <= r", premises=["q + p r <= r"]),
        _rule("star-ind-right", "conditional", "q p* <= r", premises=["q + r p <= r"]),
        # derived laws
        _rule("fixed-point", "lemma", "1 + p p* = p*", "1 + p* p = p*"),
        _rule("monotone-star", "conditional", "p* <= q*", premises=["p <= q"]),
        _rule("product-star", "lemma", "1 + p (q p)* q = (p q)*"),
        _rule("sliding", "lemma", "(p q)* p = p (q p)*"),
        _rule("denesting", "lemma", "(p + q)* = (p* q)* p*", "(p + q)* = p* (q p*)*"),
        _rule("positivity", "lemma", "0 <= p"),
        _rule("unrolling", "lemma", "(p p)* (1 + p) = p*"),
        _rule("swap-star", "conditional", "p* q = q p*", premises=["p q = q p"]),
        _rule("star-rewrite", "conditional", "p q* = r* p", premises=["p q = r p"]),
        # effects and partitions
        _rule("effect-top", "lemma", "a <= e"),
        _rule("complement", "lemma", "a + ~a = e"),
        _rule("double-negation", "lemma", "~~a = a"),
        _rule("negation-reverse", "conditional", "~b <= ~a", premises=["a <= b"]),
        _rule("partition-transform", "lemma", "~(m0 a + m1 b) = m0 ~a + m1 ~b",
              rewriter=_partition_transform),
        _rule("partition-unit", "lemma", "m0 e + m1 e = e", rewriter=_partition_unit),
    ]
    return RuleDB({r.name: r for r in rules})


# ---------------------------------------------------------------------------
# steps


@dataclass
class Step:
    term: Expr
    relation: str | None = None
    rule: str | None = None
    direction: str = "LR"
    position: tuple | None = None
    binding: dict = field(default_factory=dict)
    line: int = 0
    text: str = ""


def _relation_ok(declared: str, derived: str) -> bool:
    return derived == REL_EQ or declared == derived


def candidates(db: RuleDB, current: Expr, step: Step, ctx: Context) -> Iterator[tuple]:
    """All ``(result, sigma, rewrite)`` produced by the step's rule."""
    rule = db.lookup(step.rule)
    if step.direction not in ("LR", "RL"):
        raise ProofError(f"direction must be LR or RL, got {step.direction!r}")
    sites = positions(current)
    if step.position is not None:
        try:
            node = current
            under = False
            for k in step.position:
                under = under or isinstance(node, Neg)
                node = node.children[k]
        except IndexError:
            raise NoMatch(f"no position {'.'.join(map(str, step.position))}", step.position) from None
        sites = [(tuple(step.position), node, under)]
    for path, node, under_neg in sites:
        for rw in rule.rewrites(node, step.direction, ctx, dict(step.binding)):
            if rw.relation != REL_EQ and under_neg:
                continue
            if step.relation is not None and not _relation_ok(step.relation, rw.relation):
                continue
            yield replace_at(current, path, rw.new), path, rw


def _premises_hold(rw: Rewrite, sigma: dict, ctx: Context):
    missing = []
    for p in rw.premises:
        inst = Inequation(instantiate(p.lhs, sigma), instantiate(p.rhs, sigma), p.relation)
        if not (inst.lhs.is_ground and inst.rhs.is_ground) or not ctx.proven(inst):
            missing.append(inst)
    return missing


def check_step(db: RuleDB, current: Expr, step: Step, proven=None, target: Expr | None = None,
               ctx: Context | None = None) -> Expr:
    """Apply ``step`` to ``current`` and return the next term.

    With ``target`` the instance is chosen to produce it; without, the rule
    instance must be unique.
    """
    if ctx is None:
        ctx = Context(facts=proven or (), db=db)
    if target is None:
        target = step.term if step.term is not None else None
    results = {}
    premise_failures = []
    for result, path, rw in candidates(db, current, step, ctx):
        if target is not None:
            if result.is_ground:
                if result != target:
                    continue
                sigmas = [rw.sigma]
            else:
                sigmas = list(match(result, target, rw.sigma, ctx))
                if not sigmas:
                    continue
            for s in sigmas:
                missing = _premises_hold(rw, s, ctx)
                if not missing:
                    return target
                premise_failures.extend(missing)
        else:
            if not result.is_ground:
                continue
            missing = _premises_hold(rw, rw.sigma, ctx)
            if missing:
                premise_failures.extend(missing)
                continue
            results[result.key] = result
    if target is None and len(results) == 1:
        return next(iter(results.values()))
    if target is None and len(results) > 1:
        shown = ", ".join(print_expr(r) for r in list(results.values())[:3])
        raise AmbiguousMatch(f"rule {step.rule} applies in {len(results)} ways: {shown}")
    if premise_failures:
        raise UnprovenPremise(premise_failures[0])
    where = f" at {'.'.join(map(str, step.position)) or 'root'}" if step.position is not None else ""
    raise NoMatch(f"rule {step.rule} {step.direction}{where} does not rewrite "
                  f"{print_expr(current)}" + (f" into {print_expr(target)}" if target is not None else ""),
                  step.position)


# ---------------------------------------------------------------------------
# scripts


@dataclass
class Lemma:
    name: str
    goal: Inequation
    chains: list
    line: int = 0


@dataclass
class ProofScript:
    alphabet: Alphabet
    hypotheses: dict
    lemmas: list
    partitions: list = field(default_factory=list)
    mode: str = "full"
    source: str = ""
    hyp_lines: dict = field(default_factory=dict)


@dataclass
class LemmaResult:
    name: str
    accepted: bool
    message: str = ""
    line: int = 0


@dataclass
class CheckReport:
    accepted: bool
    lemmas: list
    warnings: list = field(default_factory=list)

    @property
    def first_failure(self):
        return next((r for r in self.lemmas if not r.accepted), None)

    def summary(self) -> str:
        if self.accepted:
            return f"accepted ({len(self.lemmas)} lemmas)"
        f = self.first_failure
        if f is None:
            return "rejected"
        return f"rejected: lemma {f.name}, line {f.line}: {f.message}"

    def to_json(self) -> dict:
        return {"accepted": self.accepted,
                "lemmas": [{"name": r.name, "accepted": r.accepted, "message": r.message, "line": r.line}
                           for r in self.lemmas],
                "warnings": list(self.warnings)}


_STEP_RE = re.compile(r"(<=|>=|≤|≥|=)\s*by\s+(\S+)\s*(.*)$")
_HEADERS = ("alphabet:", "effects:", "partitions:", "partition:", "mode:", "hypotheses:")


def _names(text: str) -> list:
    return [x for x in re.split(r"[\s,]+", text.strip()) if x]


def parse_script(text: str) -> ProofScript:
    alphabet = Alphabet()
    hypotheses, hyp_lines, lemmas, partitions = {}, {}, [], []
    mode = "full"
    section = None
    lemma = None
    pending_hyps = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        head = stripped.split(None, 1)[0] if stripped else ""
        low = stripped.lower()
        if low.startswith("alphabet:"):
            for n in _names(stripped[len("alphabet:"):]):
                alphabet.declare(n)
            section = None
            continue
        if low.startswith("effects:"):
            for n in _names(stripped[len("effects:"):]):
                alphabet.declare(n, EFFECT)
            alphabet.declare("e", EFFECT)
            section = None
            continue
        if low.startswith("partitions:") or low.startswith("partition:"):
            rest = stripped.split(":", 1)[1]
            for group in rest.split(";"):
                if _names(group):
                    partitions.append(_declare_all(alphabet, _names(group)))
            section = "partitions"
            continue
        if low.startswith("mode:"):
            mode = stripped.split(":", 1)[1].strip()
            if mode not in ("full", "axioms"):
                raise ScriptError(f"unknown mode {mode!r}", no)
            section = None
            continue
        if low.startswith("hypotheses:"):
            section = "hypotheses"
            continue
        if head == "lemma":
            m = re.match(r"lemma\s+([^:\s]+)\s*:\s*(.+)$", stripped)
            if m is None:
                raise ScriptError("expected 'lemma <name>: <goal>'", no)
            lemma = Lemma(m.group(1), _parse_ineq(m.group(2), alphabet, no), [[]], no)
            lemmas.append(lemma)
            section = "lemma"
            continue
        if section == "partitions":
            partitions.append(_declare_all(alphabet, _names(stripped)))
            continue
        if section == "hypotheses":
            m = re.match(r"([^:\s]+)\s*:\s*(.+)$", stripped)
            if m is None:
                raise ScriptError("expected '<name>: <inequation>'", no)
            pending_hyps.append((m.group(1), m.group(2), no))
            continue
        if section == "lemma":
            if stripped == "---":
                lemma.chains.append([])
                continue
            lemma.chains[-1].append(_parse_step(stripped, alphabet, no))
            continue
        raise ScriptError(f"unexpected line {stripped!r}", no)
    for name, body, no in pending_hyps:
        if name in hypotheses:
            raise ScriptError(f"duplicate hypothesis {name!r}", no)
        hypotheses[name] = _parse_ineq(body, alphabet, no)
        hyp_lines[name] = no
    return ProofScript(alphabet, hypotheses, lemmas, partitions, mode, text, hyp_lines)


def _declare_all(alphabet, names):
    for n in names:
        alphabet.declare(n)
    return names


def _parse_ineq(text: str, alphabet, no: int) -> Inequation:
    from .syntax import parse_inequation
    try:
        return parse_inequation(text, alphabet)
    except ParseError as exc:
        raise ScriptError(str(exc), no) from None


def _parse_step(text: str, alphabet, no: int) -> Step:
    m = _STEP_RE.search(text)
    term_text = text[:m.start()] if m else text
    try:
        term = parse_expr(term_text, alphabet)
    except ParseError as exc:
        raise ScriptError(str(exc), no) from None
    if m is None:
        return Step(term, line=no, text=text)
    rel = {"≤": "<=", "≥": ">="}.get(m.group(1), m.group(1))
    rule = m.group(2)
    tail = m.group(3).strip()
    direction = "LR"
    position = None
    binding = {}
    dm = re.match(r"(LR|RL)\b\s*", tail)
    if dm:
        direction = dm.group(1)
        tail = tail[dm.end():]
    am = re.match(r"at\s+([0-9.]+|root)\s*", tail)
    if am:
        position = parse_path(am.group(1))
        tail = tail[am.end():]
    wm = re.match(r"with\s+(.+)$", tail)
    if wm:
        for part in wm.group(1).split(","):
            if "=" not in part:
                raise ScriptError(f"bad binding {part!r}", no)
            k, v = part.split("=", 1)
            try:
                binding[k.strip()] = parse_expr(v, alphabet)
            except ParseError as exc:
                raise ScriptError(str(exc), no) from None
        tail = ""
    if tail.strip():
        raise ScriptError(f"cannot read step annotation {tail!r}", no)
    return Step(term, rel, rule, direction, position, binding, no, text)


def _combine(rels) -> str | None:
    kinds = {r for r in rels if r != REL_EQ}
    if not kinds:
        return REL_EQ
    if len(kinds) == 1:
        return kinds.pop()
    return None


def _chain_proves(start: Expr, end: Expr, rel: str, goal: Inequation):
    """Which direction(s) of the goal a checked chain establishes."""
    out = set()
    pairs = []
    if rel in (REL_EQ, REL_LE):
        pairs.append((start, end))
    if rel in (REL_EQ, REL_GE):
        pairs.append((end, start))
    for lo, hi in pairs:
        if lo == goal.lhs and hi == goal.rhs:
            out.add("le")
        if lo == goal.rhs and hi == goal.lhs:
            out.add("ge")
    return out


def check_script(script: ProofScript | str, db: RuleDB | None = None) -> CheckReport:
    if isinstance(script, str):
        script = parse_script(script)
    base = db or builtin_rules()
    if script.mode == "axioms":
        base = base.axioms_only()
    hyp_rules = []
    for name, h in script.hypotheses.items():
        if name in base:
            raise ProofError(f"hypothesis name {name!r} shadows a rule")
        hyp_rules.append(Rule(name, "hypothesis", (h,), schematic=False))
    rdb = base.extend(hyp_rules)
    facts = [Fact(n, h) for n, h in script.hypotheses.items()]
    uses_hyp: dict = {}
    used_hyps = set()
    results = []
    for lem in script.lemmas:
        ctx = Context(script.partitions, facts, rdb, script.mode == "axioms")
        ok, msg, line, cited = _check_lemma(rdb, lem, ctx)
        cited = cited | ctx.used
        results.append(LemmaResult(lem.name, ok, msg, line))
        if not ok:
            continue
        depends = any(c in script.hypotheses or uses_hyp.get(c, False)
                      or c in ("partition-transform", "partition-unit") for c in cited)
        used_hyps |= {c for c in cited if c in script.hypotheses}
        uses_hyp[lem.name] = depends
        st = lem.goal
        schematic = not depends
        stmt = Inequation(generalize(st.lhs), generalize(st.rhs), st.relation) if schematic else st
        rdb = rdb.extend([Rule(lem.name, "lemma", (stmt,), schematic=schematic)])
        facts.append(Fact(lem.name, stmt, schematic))
    warnings = [f"hypothesis {h} is never used" for h in script.hypotheses if h not in used_hyps]
    accepted = bool(results) and all(r.accepted for r in results)
    return CheckReport(accepted, results, warnings)


def _check_lemma(db: RuleDB, lem: Lemma, ctx: Context):
    goal = lem.goal
    covered = set()
    cited = set()
    for chain in lem.chains:
        if not chain:
            return False, "empty chain", lem.line, cited
        current = chain[0].term
        if chain[0].rule is not None:
            return False, "the first line of a chain carries no justification", chain[0].line, cited
        rels = []
        for step in chain[1:]:
            if step.rule is None:
                return False, "missing justification", step.line, cited
            try:
                current = check_step(db, current, step, target=step.term, ctx=ctx)
            except ProofError as exc:
                return False, str(exc), step.line, cited
            cited.add(step.rule)
            rels.append(step.relation)
        rel = _combine(rels)
        if rel is None:
            return False, "chain mixes <= and >= steps", chain[-1].line, cited
        got = _chain_proves(chain[0].term, current, rel, goal)
        if not got:
            return False, (f"chain proves {print_expr(chain[0].term)} {rel} {print_expr(current)}, "
                           f"not the goal {goal}"), chain[-1].line, cited
        covered |= got
    need = {"le", "ge"} if goal.relation == "=" else {"le"}
    if not need <= covered:
        return False, "the chains do not establish the goal", lem.line, cited
    return True, "", lem.line, cited


# ---------------------------------------------------------------------------
# bundled corpus


def corpus_names() -> list:
    root = resources.files("nkaq") / "corpus"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".nka"))


def corpus_text(name: str) -> str:
    if not name.endswith(".nka"):
        name += ".nka"
    return (resources.files("nkaq") / "corpus" / name).read_text()


def mutants(text: str) -> Iterator[tuple]:
    """Scripts with one step or hypothesis line deleted: ``(line_no, text)``."""
    script = parse_script(text)
    victims = set(script.hyp_lines.values())
    for lem in script.lemmas:
        for chain in lem.chains:
            victims |= {s.line for s in chain}
    lines = text.splitlines()
    for no in sorted(victims):
        yield no, "\n".join(l for i, l in enumerate(lines, 1) if i != no)
