"""Quantum interpretation of expressions.

Atoms are sent to superoperators, ``+`` to sums, ``·`` to composition in
program order and ``*`` to the series ``sum_n E^n``.  Stars are evaluated by
partial sums with the same stopping rule as loops; whether the sum settled is
reported next to the result instead of raising.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import quantum as qc
from .programs import (LOOP_TOL, MAX_ITER, EncoderSetting, NonConvergent, QProgram,
                       VariableLayout, denote, encode, geometric_sum)
from .quantum import Superoperator
from .series import coeff
from .syntax import EFFECT, Atom, Expr, Neg, One, Prod, Star, Sum, Symbol, Zero


class InfiniteCoefficient(ValueError):
    pass


@dataclass
class ConvergencePolicy:
    tol: float = LOOP_TOL
    max_terms: int = MAX_ITER

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be positive")


@dataclass
class InterpretationSetting:
    dim: int
    eval: dict  # Symbol -> Superoperator

    def __post_init__(self):
        clean = {}
        for s, E in self.eval.items():
            sym = s if isinstance(s, Symbol) else Symbol(str(s))
            if (E.in_dim, E.out_dim) != (self.dim, self.dim):
                raise qc.DimensionMismatch(f"{sym.name} acts on dim {E.in_dim}, setting has {self.dim}")
            clean[sym] = E
        self.eval = clean
        self._by_name = {s.name: E for s, E in clean.items()}

    def lookup(self, sym: Symbol) -> Superoperator:
        E = self.eval.get(sym)
        if E is None:
            E = self._by_name.get(sym.name)
        if E is None:
            raise KeyError(f"no superoperator for symbol {sym.name!r}")
        return E

    def validate(self, tol: float = qc.DEFAULT_TOL) -> bool:
        for sym, E in self.eval.items():
            if sym.sort == EFFECT:
                continue
            rep = qc.validate_superop(E, tol)
            if not (rep["cp"] and rep["traceNonIncreasing"]):
                return False
        return True

    @classmethod
    def from_json(cls, obj) -> "InterpretationSetting":
        dim = int(obj["dim"])
        ev = {}
        for name, spec in obj["eval"].items():
            ev[Symbol(name)] = qc.superop_from_json(spec)
        for name, spec in obj.get("effects", {}).items():
            ev[Symbol(name, EFFECT)] = qc.constant_map(qc.matrix_from_json(spec))
        return cls(dim, ev)


@dataclass
class Interpretation:
    superop: Superoperator
    converged: bool
    terms: int = 0

    @property
    def certificate(self) -> str:
        return "converged" if self.converged else "diverged"


class _Evaluator:
    def __init__(self, setting: InterpretationSetting, policy: ConvergencePolicy, dual: bool):
        self.setting = setting
        self.policy = policy
        self.dual = dual
        self.converged = True
        self.memo: dict = {}
        self.d2 = setting.dim ** 2

    def run(self, e: Expr) -> np.ndarray:
        hit = self.memo.get(e)
        if hit is None:
            hit = self._run(e)
            self.memo[e] = hit
        return hit

    def _run(self, e: Expr) -> np.ndarray:
        if isinstance(e, Zero):
            return np.zeros((self.d2, self.d2), dtype=complex)
        if isinstance(e, One):
            return np.eye(self.d2, dtype=complex)
        if isinstance(e, Atom):
            E = self.setting.lookup(e.symbol)
            if self.dual and e.symbol.sort != EFFECT:
                E = qc.dual_superop(E)
            return E.transfer()
        if isinstance(e, Sum):
            return sum(self.run(a) for a in e.args)
        if isinstance(e, Prod):
            # primal: left factor acts first, so later factors sit further left
            # in the matrix product; dual: the reverse
            out = None
            for a in (e.args if self.dual else reversed(e.args)):
                if isinstance(a, Star) and out is not None:
                    t = self.star(a, left=out)
                else:
                    t = self.run(a)
                # a diverged star may carry huge entries; the certificate records it
                with np.errstate(over="ignore", invalid="ignore"):
                    out = t if out is None else out @ t
            return out
        if isinstance(e, Star):
            return self.star(e)
        if isinstance(e, Neg):
            inner = Superoperator(transfer=self.run(e.arg))
            d = self.setting.dim
            x = qc.apply(inner, qc.proj(0, d))
            return qc.constant_map(np.eye(d) - qc.hermitian_part(x)).transfer()
        raise TypeError(f"not an expression: {e!r}")

    def star(self, e: Star, left: np.ndarray | None = None) -> np.ndarray:
        """Star, judged only by what survives the factors applied after it."""
        a = self.run(e.arg)
        try:
            return geometric_sum(a, self.policy.tol, self.policy.max_terms, left=left)
        except NonConvergent:
            self.converged = False
            return _partial_sum(a, self.policy.max_terms)


def _partial_sum(a: np.ndarray, n_terms: int) -> np.ndarray:
    total = np.eye(a.shape[0], dtype=complex)
    power = np.eye(a.shape[0], dtype=complex)
    for _ in range(min(n_terms, 64)):
        with np.errstate(over="ignore", invalid="ignore"):
            power = power @ a
            total = total + power
        if not np.all(np.isfinite(total)):
            break
    return total


def interpret(e: Expr, setting: InterpretationSetting,
              policy: ConvergencePolicy | None = None) -> Interpretation:
    ev = _Evaluator(setting, policy or ConvergencePolicy(), dual=False)
    t = ev.run(e)
    return Interpretation(Superoperator(transfer=t), ev.converged)


def dual_interpret(e: Expr, setting: InterpretationSetting,
                   policy: ConvergencePolicy | None = None) -> Interpretation:
    """Dual interpretation: atoms go to dual maps and products compose right to left.

    Effect-sorted atoms already denote maps on predicates (constant maps
    ``rho -> tr(rho) A``) and are used as they are.
    """
    ev = _Evaluator(setting, policy or ConvergencePolicy(), dual=True)
    t = ev.run(e)
    return Interpretation(Superoperator(transfer=t), ev.converged)


# ---------------------------------------------------------------------------
# the string-space construction


def strings_upto(alphabet, n: int) -> list[tuple]:
    out = []
    for k in range(n + 1):
        out.extend(itertools.product(alphabet, repeat=k))
    return out


@dataclass
class CompletenessSetting:
    setting: InterpretationSetting
    strings: list
    index: dict
    counts: dict = field(default_factory=dict)  # letter -> #_a


def completeness_setting(alphabet, n: int) -> CompletenessSetting:
    """Strings of length <= n as a basis; letter ``a`` appends ``a``.

    ``eval(a)`` has one Kraus operator ``|sa><s| / sqrt(#_a)`` per string
    ``s`` with ``sa`` still in range, where ``#_a`` counts those strings.
    """
    if n < 1:
        raise ValueError("string length bound must be at least 1")
    letters = sorted(s.name if isinstance(s, Symbol) else str(s) for s in alphabet)
    S = strings_upto(letters, n)
    index = {s: i for i, s in enumerate(S)}
    d = len(S)
    ev, counts = {}, {}
    for a in letters:
        sources = [s for s in S if s + (a,) in index]
        counts[a] = len(sources)
        ks = []
        for s in sources:
            k = np.zeros((d, d), dtype=complex)
            k[index[s + (a,)], index[s]] = 1 / np.sqrt(len(sources))
            ks.append(k)
        ev[Symbol(a)] = Superoperator(ks)
    return CompletenessSetting(InterpretationSetting(d, ev), S, index, counts)


def completeness_sides(e: Expr, s, r: float, cs: CompletenessSetting,
                       policy: ConvergencePolicy | None = None):
    """Both sides of the string-space identity, as matrices."""
    s = tuple(s)
    d = cs.setting.dim
    n = max(len(t) for t in cs.strings)
    if len(s) > n:
        raise ValueError("start string longer than the bound")
    rho = np.zeros((d, d), dtype=complex)
    rho[cs.index[s], cs.index[s]] = r
    rhs = np.zeros((d, d), dtype=complex)
    for t in strings_upto(sorted(cs.counts), n - len(s)):
        c = coeff(e, t)
        if c.is_inf:
            raise InfiniteCoefficient(f"coefficient of {''.join(t) or 'eps'} is infinite")
        if c.value:
            weight = float(np.prod([cs.counts[a] for a in t])) if t else 1.0
            j = cs.index[s + t]
            rhs[j, j] += c.value * r / weight
    res = interpret(e, cs.setting, policy)
    lhs = qc.apply(res.superop, rho)
    return lhs, rhs, res.converged


def check_completeness_claim(e: Expr, s, r: float, n: int, tol: float = 1e-9,
                             alphabet=None) -> bool:
    from .series import alphabet_names
    letters = alphabet if alphabet is not None else (alphabet_names(e) or ["a"])
    cs = completeness_setting(letters, n)
    lhs, rhs, converged = completeness_sides(e, s, r, cs)
    return converged and float(np.max(np.abs(lhs - rhs))) < tol


# ---------------------------------------------------------------------------
# encoding round trip


def enc_recovery_distance(p: QProgram, layout: VariableLayout, enc: EncoderSetting | None = None,
                          policy: ConvergencePolicy | None = None) -> tuple[float, bool]:
    policy = policy or ConvergencePolicy()
    enc = enc or EncoderSetting.auto(p)
    enc.record(p)
    expr = encode(p, enc)
    res = interpret(expr, enc.interpretation(layout), policy)
    ref = denote(p, layout, policy.tol, policy.max_terms)
    return qc.choi_distance(res.superop, ref), res.converged


def check_enc_recovery(p: QProgram, layout: VariableLayout, enc: EncoderSetting | None = None,
                       tol: float = 1e-8, policy: ConvergencePolicy | None = None) -> bool:
    dist, converged = enc_recovery_distance(p, layout, enc, policy)
    return converged and dist < tol
