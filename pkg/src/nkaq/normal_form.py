"""Single-loop normal form of quantum while-programs.

Every program ``P`` is rewritten to ``P0; while M do P1 done`` with ``P0`` and
``P1`` while-free.  The rewrite adds fresh classical guard registers; the
result matches ``P`` once all guards are reset to ``|0>`` at the end.

Guards hold the value of a small program counter.  ``Gt{k}[g]`` is the
two-outcome test "value of g exceeds k" and ``g := |i>`` is a reset followed
by the basis permutation ``Flip{i}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quantum as qc
from .programs import (LOOP_TOL, MAX_ITER, Case, ProgramError, QProgram, Reset, Seq, Skip,
                       Unitary, VariableLayout, While, assign, count_while, denote, flatten_seq,
                       seq, threshold_measurement)
from .quantum import Measurement

MAX_TOTAL_DIM = 64


@dataclass
class NormalFormResult:
    prefix: QProgram
    loop_name: str
    loop_regs: tuple
    loop_measurement: Measurement
    body: QProgram
    guards: tuple  # of (name, dim), appended to the input layout
    layout: VariableLayout  # input layout with the guards appended

    @property
    def reset(self) -> QProgram:
        return seq(*(Reset(g) for g, _ in self.guards))

    def loop(self) -> While:
        return While(self.loop_name, self.loop_regs, self.loop_measurement, self.body)

    def program(self) -> QProgram:
        """``P0; while M do P1 done; reset guards``."""
        return seq(self.prefix, self.loop(), self.reset)

    def describe(self) -> str:
        from .programs import print_program
        lines = [f"prefix: {print_program(self.prefix)}",
                 f"loop:   {print_program(self.loop())}",
                 f"reset:  {print_program(self.reset)}",
                 "guards: " + (", ".join(f"{g}:{d}" for g, d in self.guards) or "none")]
        return "\n".join(lines)


@dataclass
class _NF:
    prefix: QProgram
    name: str
    regs: tuple
    meas: Measurement
    body: QProgram


class _Builder:
    def __init__(self, layout: VariableLayout):
        self.layout = layout
        self.guards: list = []
        self.taken = set(layout.names)

    def fresh(self, dim: int) -> str:
        n = len(self.guards)
        name = f"g{n}"
        while name in self.taken:
            n += 1
            name = f"g{n}"
        self.taken.add(name)
        self.guards.append((name, dim))
        self.layout = self.layout.extend([(name, dim)])
        return name

    def set(self, g: str, value: int) -> QProgram:
        return assign(g, value, self.layout)

    def test(self, g: str, k: int):
        d = self.layout.dim_of([g])
        return f"Gt{k}", (g,), threshold_measurement(d, k)

    def nf(self, p: QProgram) -> _NF:
        if count_while(p) == 0:
            return self.base(p)
        if isinstance(p, While):
            if count_while(p.body) == 0:
                return _NF(Skip(), p.name, p.regs, p.measurement, p.body)
            return self.loop(p)
        if isinstance(p, Case):
            return self.case(p)
        if isinstance(p, Seq):
            parts = _segments(flatten_seq(p))
            out = self.segment(parts[0])
            for part in parts[1:]:
                out = self.sequence(out, self.segment(part))
            return out
        raise TypeError(f"not a program: {p!r}")

    def segment(self, stmts: list) -> _NF:
        last = stmts[-1]
        head = stmts[:-1]
        if isinstance(last, While) and count_while(last.body) == 0 and all(count_while(s) == 0 for s in head):
            return _NF(seq(*head), last.name, last.regs, last.measurement, last.body)
        if len(stmts) == 1:
            return self.nf(last)
        if all(count_while(s) == 0 for s in stmts):
            return self.base(seq(*stmts))
        return self.sequence(self.nf(seq(*head)), self.nf(last))

    def base(self, p: QProgram) -> _NF:
        # one-valued guard: the loop test never fires
        g = self.fresh(1)
        name, regs, m = self.test(g, 0)
        return _NF(seq(p, self.set(g, 0)), name, regs, m, Skip())

    def sequence(self, a: _NF, b: _NF) -> _NF:
        g = self.fresh(3)
        gt0, gr, m0 = self.test(g, 0)
        gt1, _, m1 = self.test(g, 1)
        second = Case(b.name, b.regs, b.meas, {1: b.body, 0: self.set(g, 0)})
        first = Case(a.name, a.regs, a.meas, {1: a.body, 0: seq(b.prefix, self.set(g, 2))})
        body = Case(gt1, gr, m1, {1: second, 0: first})
        return _NF(seq(a.prefix, self.set(g, 1)), gt0, gr, m0, body)

    def case(self, p: Case) -> _NF:
        outs = sorted(p.branches)
        subs = [self.nf(p.branches[k]) for k in outs]
        g = self.fresh(len(outs) + 1)
        gt0, gr, m0 = self.test(g, 0)
        d = len(outs) + 1
        prefix = Case(p.name, p.regs, p.measurement,
                      {k: seq(s.prefix, self.set(g, i + 1)) for i, (k, s) in enumerate(zip(outs, subs))})
        arms = {0: Skip()}
        for i, s in enumerate(subs):
            arms[i + 1] = Case(s.name, s.regs, s.meas, {1: s.body, 0: self.set(g, 0)})
        body = Case("Meas", gr, qc.computational_measurement(d), arms)
        return _NF(prefix, gt0, gr, m0, body)

    def loop(self, p: While) -> _NF:
        inner = self.nf(p.body)
        g = self.fresh(3)
        gt0, gr, m0 = self.test(g, 0)
        gt1, _, m1 = self.test(g, 1)
        second = Case(inner.name, inner.regs, inner.meas, {1: inner.body, 0: self.set(g, 1)})
        first = Case(p.name, p.regs, p.measurement,
                     {1: seq(inner.prefix, self.set(g, 2)), 0: self.set(g, 0)})
        body = Case(gt1, gr, m1, {1: second, 0: first})
        return _NF(self.set(g, 1), gt0, gr, m0, body)


def _segments(stmts: list) -> list:
    """Split a statement list after every loop."""
    out, cur = [], []
    for s in stmts:
        cur.append(s)
        if count_while(s):
            out.append(cur)
            cur = []
    if cur:
        out.append(cur)
    return out


def normalize_program(p: QProgram, layout: VariableLayout) -> NormalFormResult:
    b = _Builder(layout)
    nf = b.nf(p)
    return NormalFormResult(nf.prefix, nf.name, tuple(nf.regs), nf.meas, nf.body,
                            tuple(b.guards), b.layout)


def is_single_loop(q: QProgram) -> bool:
    """``P0; while M do P1 done; Q`` with P0, P1, Q while-free."""
    stmts = flatten_seq(q)
    return count_while(q) == 1 and sum(isinstance(s, While) for s in stmts) == 1


def normal_form_distance(p: QProgram, result: NormalFormResult, tol: float = LOOP_TOL,
                         max_iter: int = MAX_ITER) -> float:
    L = result.layout
    if L.dim > MAX_TOTAL_DIM:
        raise ProgramError(f"combined layout has dim {L.dim}, above {MAX_TOTAL_DIM}")
    lhs = denote(seq(p, result.reset), L, tol, max_iter)
    rhs = denote(result.program(), L, tol, max_iter)
    return qc.choi_distance(lhs, rhs)


def verify_normal_form(p: QProgram, result: NormalFormResult, tol: float = 1e-8) -> bool:
    return (count_while(result.prefix) == 0 and count_while(result.body) == 0
            and normal_form_distance(p, result) < tol)


def guard_hygiene(p: QProgram, result: NormalFormResult, tol: float = 1e-10) -> bool:
    """Every guard operation commutes with every operation on the original registers."""
    L = result.layout
    guard_names = {g for g, _ in result.guards}
    guard_ops, other_ops = [], []

    def collect(s):
        if isinstance(s, Reset):
            d = L.dim_of([s.reg])
            ks = [np.outer(qc.ket(0, d), qc.ket(i, d)) for i in range(d)]
            (guard_ops if s.reg in guard_names else other_ops).append(((s.reg,), ks))
        elif isinstance(s, Unitary):
            (guard_ops if set(s.regs) <= guard_names else other_ops).append((tuple(s.regs), [s.matrix]))
        elif isinstance(s, (Case, While)):
            ks = [s.measurement[i] for i in s.measurement.outcomes]
            (guard_ops if set(s.regs) <= guard_names else other_ops).append((tuple(s.regs), ks))
        for c in s.children():
            collect(c)

    collect(result.program())
    collect(p)
    for gregs, gks in guard_ops:
        for oregs, oks in other_ops:
            if set(gregs) & set(oregs):
                return False
            sub = L.sub(set(gregs) | set(oregs))
            for a in gks:
                A = sub.embed(a, gregs)
                for b in oks:
                    B = sub.embed(b, oregs)
                    if np.max(np.abs(A @ B - B @ A)) > tol:
                        return False
    return True
