"""Quantum while-programs: syntax, denotational semantics and encoding.

Programs act on a ``VariableLayout``, an ordered list of named registers.
Operators on a subset of registers are lifted to the whole space with
identities on the other factors.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import quantum as qc
from .quantum import Measurement, Superoperator
from .syntax import ONE, ZERO, Alphabet, Atom, Expr, Star, Symbol, mk_prod, mk_sum

LOOP_TOL = 1e-12
MAX_ITER = 1000


class NonConvergent(RuntimeError):
    def __init__(self, max_iter: int, increment: float):
        super().__init__(f"loop did not converge within {max_iter} iterations "
                         f"(last increment {increment:.3g})")
        self.max_iter = max_iter
        self.increment = increment


class ProgramError(ValueError):
    pass


# ---------------------------------------------------------------------------
# layouts


@dataclass(frozen=True)
class VariableLayout:
    registers: tuple = ()  # of (name, dim)

    def __post_init__(self):
        regs = tuple((str(n), int(d)) for n, d in self.registers)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise ProgramError("register names must be unique")
        for n, d in regs:
            if d < 1:
                raise ProgramError(f"register {n} needs a positive dimension")
        object.__setattr__(self, "registers", regs)

    @classmethod
    def qubits(cls, *names: str) -> "VariableLayout":
        return cls(tuple((n, 2) for n in names))

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.registers]

    @property
    def dims(self) -> list[int]:
        return [d for _, d in self.registers]

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=int)) if self.registers else 1

    def index(self, name: str) -> int:
        for i, (n, _) in enumerate(self.registers):
            if n == name:
                return i
        raise ProgramError(f"unknown register {name!r}")

    def dim_of(self, regs: Sequence[str]) -> int:
        return int(np.prod([self.registers[self.index(r)][1] for r in regs], dtype=int))

    def sub(self, names) -> "VariableLayout":
        wanted = set(names)
        for n in wanted:
            self.index(n)
        return VariableLayout(tuple(r for r in self.registers if r[0] in wanted))

    def extend(self, more) -> "VariableLayout":
        return VariableLayout(self.registers + tuple(more))

    def embed(self, op, regs: Sequence[str]) -> np.ndarray:
        """Lift an operator on ``regs`` (in the given order) to the layout."""
        op = qc.as_matrix(op)
        regs = list(regs)
        if len(set(regs)) != len(regs):
            raise ProgramError("repeated register in operand list")
        if op.shape != (self.dim_of(regs), self.dim_of(regs)):
            raise ProgramError(f"operator of shape {op.shape} does not fit registers {regs}")
        dims = self.dims
        k = len(dims)
        pos = [self.index(r) for r in regs]
        if pos == list(range(k)):
            return op
        rest = [i for i in range(k) if i not in pos]
        rest_dim = int(np.prod([dims[i] for i in rest], dtype=int))
        full = np.kron(op, np.eye(rest_dim))
        order = pos + rest
        shape = [dims[i] for i in order]
        inv = list(np.argsort(order))
        t = full.reshape(shape + shape).transpose(inv + [k + i for i in inv])
        return t.reshape(self.dim, self.dim)

    def lift(self, E: Superoperator, sub: "VariableLayout") -> Superoperator:
        if sub.registers == self.registers:
            return E
        if not sub.registers:
            return Superoperator([k[0, 0] * np.eye(self.dim) for k in E.kraus])
        return Superoperator([self.embed(k, sub.names) for k in E.kraus])

    def to_json(self) -> list:
        return [[n, d] for n, d in self.registers]


# ---------------------------------------------------------------------------
# syntax tree


class QProgram:
    def registers(self) -> set:
        out = set()
        for c in self.children():
            out |= c.registers()
        return out

    def children(self) -> tuple:
        return ()

    def __str__(self):
        return print_program(self)


@dataclass(eq=False)
class Skip(QProgram):
    pass


@dataclass(eq=False)
class Abort(QProgram):
    pass


@dataclass(eq=False)
class Reset(QProgram):
    reg: str

    def registers(self):
        return {self.reg}


@dataclass(eq=False)
class Unitary(QProgram):
    regs: tuple
    name: str
    matrix: np.ndarray

    def registers(self):
        return set(self.regs)


@dataclass(eq=False)
class Seq(QProgram):
    first: QProgram
    second: QProgram

    def children(self):
        return (self.first, self.second)


@dataclass(eq=False)
class Case(QProgram):
    name: str
    regs: tuple
    measurement: Measurement
    branches: dict  # outcome -> QProgram

    def registers(self):
        out = set(self.regs)
        for b in self.branches.values():
            out |= b.registers()
        return out

    def children(self):
        return tuple(self.branches[i] for i in sorted(self.branches))


@dataclass(eq=False)
class While(QProgram):
    name: str
    regs: tuple
    measurement: Measurement
    body: QProgram

    def registers(self):
        return set(self.regs) | self.body.registers()

    def children(self):
        return (self.body,)


def seq(*progs: QProgram) -> QProgram:
    progs = [p for p in progs if p is not None]
    if not progs:
        return Skip()
    out = progs[-1]
    for p in reversed(progs[:-1]):
        out = Seq(p, out)
    return out


def flatten_seq(p: QProgram) -> list:
    if isinstance(p, Seq):
        return flatten_seq(p.first) + flatten_seq(p.second)
    return [p]


def count_while(p: QProgram) -> int:
    return int(isinstance(p, While)) + sum(count_while(c) for c in p.children())


def depth(p: QProgram) -> int:
    """Nesting depth of control structures; elementary statements have depth 0."""
    if isinstance(p, Seq):
        return max(depth(p.first), depth(p.second))
    if isinstance(p, (Case, While)):
        return 1 + max((depth(c) for c in p.children()), default=0)
    return 0


def check_program(p: QProgram, layout: VariableLayout) -> None:
    """Raise ProgramError unless every operator fits its registers."""
    if isinstance(p, Reset):
        layout.index(p.reg)
    elif isinstance(p, Unitary):
        d = layout.dim_of(p.regs)
        u = qc.as_matrix(p.matrix)
        if u.shape != (d, d):
            raise ProgramError(f"unitary {p.name} has shape {u.shape}, registers need {d}")
        if np.max(np.abs(u.conj().T @ u - np.eye(d))) > 1e-8:
            raise ProgramError(f"{p.name} is not unitary")
    elif isinstance(p, (Case, While)):
        d = layout.dim_of(p.regs)
        if p.measurement.dim != d:
            raise ProgramError(f"measurement {p.name} has dim {p.measurement.dim}, registers need {d}")
        if not p.measurement.is_complete(1e-8):
            raise ProgramError(f"measurement {p.name} is not complete")
        if isinstance(p, While) and set(p.measurement.outcomes) != {0, 1}:
            raise ProgramError("loop measurements have outcomes 0 and 1")
        if isinstance(p, Case) and set(p.branches) != set(p.measurement.outcomes):
            raise ProgramError(f"case on {p.name} must give one branch per outcome")
    for c in p.children():
        check_program(c, layout)


# ---------------------------------------------------------------------------
# semantics


def denote(p: QProgram, layout: VariableLayout, tol: float = LOOP_TOL,
           max_iter: int = MAX_ITER) -> Superoperator:
    """Superoperator of ``p`` on the whole layout."""
    check_program(p, layout)
    return _den(p, layout, tol, max_iter)


def _den(p, layout, tol, max_iter):
    sub = layout.sub(p.registers())
    return layout.lift(_den_local(p, sub, tol, max_iter), sub)


def _den_local(p, L: VariableLayout, tol, max_iter) -> Superoperator:
    d = L.dim
    if isinstance(p, Skip):
        return qc.identity(d)
    if isinstance(p, Abort):
        return qc.zero_map(d)
    if isinstance(p, Reset):
        return L.lift(qc.reset_map(L.dim_of([p.reg])), L.sub([p.reg]))
    if isinstance(p, Unitary):
        return Superoperator([L.embed(p.matrix, p.regs)])
    if isinstance(p, Seq):
        return qc.compose(_den(p.first, L, tol, max_iter), _den(p.second, L, tol, max_iter))
    if isinstance(p, Case):
        parts = [qc.compose(qc.branch(L.embed(p.measurement[i], p.regs)), _den(b, L, tol, max_iter))
                 for i, b in sorted(p.branches.items())]
        return qc.superop_sum(*parts)
    if isinstance(p, While):
        m1 = L.embed(p.measurement[1], p.regs)
        m0 = L.embed(p.measurement[0], p.regs)
        return loop_superop(m1, m0, _den(p.body, L, tol, max_iter), tol, max_iter)
    raise TypeError(f"not a program: {p!r}")


def geometric_sum(a: np.ndarray, tol: float = LOOP_TOL, max_iter: int = MAX_ITER,
                  left: np.ndarray | None = None) -> np.ndarray:
    """Partial sums of ``sum_n a^n`` by doubling.

    Each round adds the block ``a^N (I + ... + a^(N-1))``; stop once the block
    is below ``tol`` entrywise.  With ``left`` given only ``left @ block`` has
    to be small: the caller will multiply by ``left`` anyway, and parts of the
    sum that ``left`` annihilates may grow without changing the product.
    """
    n = a.shape[0]
    total = np.eye(n, dtype=complex)
    power = a.copy()
    terms = 1
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            inc = power @ total
            total = total + inc
            terms *= 2
            seen = inc if left is None else left @ inc
            size = float(np.max(np.abs(seen), initial=0.0))
            if size < tol:
                return total
            if terms >= max_iter or not np.isfinite(size):
                raise NonConvergent(max_iter, size)
            power = power @ power


def _projector_basis(m: np.ndarray, tol: float = 1e-10):
    """Orthonormal basis of the range when ``m`` is an orthogonal projector."""
    if np.max(np.abs(m @ m - m)) > tol or np.max(np.abs(m - m.conj().T)) > tol:
        return None
    diag = np.diag(m)
    if np.max(np.abs(m - np.diag(diag))) <= tol:
        return np.flatnonzero(np.abs(diag) > 0.5)
    w, v = np.linalg.eigh(qc.hermitian_part(m))
    return v[:, w > 0.5]


def loop_superop(m1: np.ndarray, m0: np.ndarray, body: Superoperator,
                 tol: float = LOOP_TOL, max_iter: int = MAX_ITER) -> Superoperator:
    """sum_n (M1 ; body)^n ; M0 as a superoperator.

    When ``m1`` is an orthogonal projector the series is computed on the
    operators supported on its range only, which is much smaller for guard
    measurements.
    """
    d = m1.shape[0]
    t_m0 = np.kron(m0, m0.conj())
    basis = _projector_basis(m1)
    if basis is None:
        t_m1 = np.kron(m1, m1.conj())
        s = geometric_sum(body.transfer() @ t_m1, tol, max_iter, left=t_m0)
        return Superoperator(transfer=t_m0 @ s)
    if isinstance(basis, np.ndarray) and basis.ndim == 1:
        idx = (basis[:, None] * d + basis[None, :]).reshape(-1)
        if idx.size == 0:
            return Superoperator(transfer=t_m0)
        t_body = body.transfer()
        col = t_body[:, idx]                     # body after projecting on the range
        inner = col[idx, :]
        exit_ = t_m0 @ col
        tail = exit_ @ geometric_sum(inner, tol, max_iter, left=exit_)
        out = t_m0.copy()
        out[:, idx] += tail
        return Superoperator(transfer=out)
    q = basis
    w = np.kron(q, q.conj())
    t_body = body.transfer()
    col = t_body @ w
    exit_ = t_m0 @ col
    s = geometric_sum(w.conj().T @ col, tol, max_iter, left=exit_)
    return Superoperator(transfer=t_m0 + exit_ @ s @ w.conj().T)


# ---------------------------------------------------------------------------
# encoding


def elementary_keys(p: QProgram) -> list:
    """Elementary superoperators of ``p`` in first-occurrence order."""
    out: list = []

    def add(k):
        if k not in out:
            out.append(k)

    def walk(q):
        if isinstance(q, Reset):
            add(("reset", q.reg))
        elif isinstance(q, Unitary):
            add(("unitary", q.name, tuple(q.regs)))
        elif isinstance(q, Case):
            for i in sorted(q.branches):
                add(("meas", q.name, tuple(q.regs), i))
        elif isinstance(q, While):
            add(("meas", q.name, tuple(q.regs), 1))
            add(("meas", q.name, tuple(q.regs), 0))
        for c in q.children():
            walk(c)

    walk(p)
    return out


def _sanitize(text: str) -> str:
    s = re.sub(r"[^A-Za-z0-9_']", "_", text)
    if not s or not s[0].isalpha():
        s = "s" + s
    return s


class EncoderSetting:
    """Injective assignment of symbols to elementary superoperators.

    Keys are ``("reset", reg)``, ``("unitary", name, regs)`` and
    ``("meas", name, regs, outcome)``; ``ops`` keeps the matching operators so
    the inverse map can be turned into an interpretation.
    """

    def __init__(self, symbols: Mapping | None = None):
        self.symbols: dict = {}
        self.ops: dict = {}
        for k, s in (symbols or {}).items():
            self.bind(k, s)

    def bind(self, key, symbol) -> Symbol:
        sym = symbol if isinstance(symbol, Symbol) else Symbol(str(symbol))
        for k, s in self.symbols.items():
            if s.name == sym.name and k != key:
                raise ProgramError(f"symbol {sym.name} already encodes {k}")
        self.symbols[key] = sym
        return sym

    def __getitem__(self, key) -> Symbol:
        try:
            return self.symbols[key]
        except KeyError:
            raise ProgramError(f"missing encoder entry for {key}") from None

    def __contains__(self, key):
        return key in self.symbols

    @classmethod
    def auto(cls, *progs: QProgram, names: Mapping | None = None) -> "EncoderSetting":
        """Fresh readable symbols for every elementary operator of ``progs``."""
        enc = cls()
        taken = set()
        for p in progs:
            enc.record(p)
            for k in elementary_keys(p):
                if k in enc.symbols:
                    continue
                if names and k in names:
                    name = names[k]
                elif k[0] == "reset":
                    name = _sanitize(f"r_{k[1]}")
                elif k[0] == "unitary":
                    name = _sanitize(f"{k[1].lower()}_{'_'.join(k[2])}")
                else:
                    name = _sanitize(f"{k[1].lower()}{k[3]}_{'_'.join(k[2])}")
                base, n = name, 1
                while name in taken:
                    n += 1
                    name = f"{base}{n}"
                taken.add(name)
                enc.bind(k, name)
        return enc

    @classmethod
    def short(cls, *progs: QProgram) -> "EncoderSetting":
        """Like ``auto`` but uses bare names (``m1``, ``x``) when unambiguous."""
        keys = []
        for p in progs:
            for k in elementary_keys(p):
                if k not in keys:
                    keys.append(k)
        plain = {}
        for k in keys:
            if k[0] == "reset":
                plain[k] = f"r_{k[1]}"
            elif k[0] == "unitary":
                plain[k] = k[1].lower()
            else:
                plain[k] = f"{k[1].lower()}{k[3]}"
        counts: dict = {}
        for v in plain.values():
            counts[v] = counts.get(v, 0) + 1
        chosen = {k: _sanitize(v) for k, v in plain.items() if counts[v] == 1}
        return cls.auto(*progs, names=chosen)

    def record(self, p: QProgram) -> None:
        """Remember the operators behind the keys of ``p``."""
        if isinstance(p, Reset):
            self.ops[("reset", p.reg)] = ("reset", p.reg, None)
        elif isinstance(p, Unitary):
            self.ops[("unitary", p.name, tuple(p.regs))] = ("unitary", tuple(p.regs), p.matrix)
        elif isinstance(p, (Case, While)):
            for i in p.measurement.outcomes:
                self.ops[("meas", p.name, tuple(p.regs), i)] = ("meas", tuple(p.regs), p.measurement[i])
        for c in p.children():
            self.record(c)

    def superoperator(self, key, layout: VariableLayout) -> Superoperator:
        kind, regs, mat = self.ops[key]
        if kind == "reset":
            sub = layout.sub([regs])
            return layout.lift(qc.reset_map(sub.dim), sub)
        return Superoperator([layout.embed(mat, regs)])

    def alphabet(self) -> Alphabet:
        return Alphabet(self.symbols.values())

    def interpretation(self, layout: VariableLayout):
        from .interpretation import InterpretationSetting
        return InterpretationSetting(layout.dim, {s: self.superoperator(k, layout)
                                                  for k, s in self.symbols.items()})


def encode(p: QProgram, enc: EncoderSetting) -> Expr:
    if isinstance(p, Skip):
        return ONE
    if isinstance(p, Abort):
        return ZERO
    if isinstance(p, Reset):
        return Atom(enc[("reset", p.reg)])
    if isinstance(p, Unitary):
        return Atom(enc[("unitary", p.name, tuple(p.regs))])
    if isinstance(p, Seq):
        return mk_prod([encode(p.first, enc), encode(p.second, enc)])
    if isinstance(p, Case):
        return mk_sum(mk_prod([Atom(enc[("meas", p.name, tuple(p.regs), i)]), encode(b, enc)])
                      for i, b in sorted(p.branches.items()))
    if isinstance(p, While):
        m1 = Atom(enc[("meas", p.name, tuple(p.regs), 1)])
        m0 = Atom(enc[("meas", p.name, tuple(p.regs), 0)])
        return mk_prod([Star(mk_prod([m1, encode(p.body, enc)])), m0])
    raise TypeError(f"not a program: {p!r}")


# ---------------------------------------------------------------------------
# builtin operators

_SQ2 = 1 / np.sqrt(2)
BUILTIN_UNITARIES = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
    "H": _SQ2 * np.array([[1, 1], [1, -1]]),
    "S": np.diag([1, 1j]),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]),
}


def flip(k: int, d: int) -> np.ndarray:
    """Permutation swapping basis states 0 and k."""
    perm = list(range(d))
    perm[0], perm[k] = perm[k], perm[0]
    return np.eye(d)[perm]


def threshold_measurement(d: int, k: int) -> Measurement:
    """Outcome 1 iff the basis value exceeds ``k``."""
    hi = np.diag([1.0 if i > k else 0.0 for i in range(d)])
    return Measurement({0: np.eye(d) - hi, 1: hi}, projective=True)


def value_measurement(d: int, k: int) -> Measurement:
    """Outcome 1 iff the basis value equals ``k``."""
    hit = qc.proj(k, d)
    return Measurement({0: np.eye(d) - hit, 1: hit}, projective=True)


def builtin_unitary(name: str, d: int):
    if name in BUILTIN_UNITARIES:
        return BUILTIN_UNITARIES[name]
    m = re.fullmatch(r"Flip(\d+)", name)
    if m and 0 < int(m.group(1)) < d:
        return flip(int(m.group(1)), d)
    return None


def builtin_measurement(name: str, d: int):
    if name == "Meas":
        return qc.computational_measurement(d)
    m = re.fullmatch(r"Gt(\d+)", name)
    if m:
        return threshold_measurement(d, int(m.group(1)))
    m = re.fullmatch(r"Is(\d+)", name)
    if m and int(m.group(1)) < d:
        return value_measurement(d, int(m.group(1)))
    return None


def assign(reg: str, value: int, layout: VariableLayout) -> QProgram:
    """``reg := |value>`` as a reset followed by a basis permutation."""
    if value == 0:
        return Reset(reg)
    d = layout.dim_of([reg])
    return Seq(Reset(reg), Unitary((reg,), f"Flip{value}", flip(value, d)))


# ---------------------------------------------------------------------------
# concrete syntax

_KEYWORDS = {"skip", "abort", "case", "end", "while", "do", "done", "if", "then", "else"}
_PTOKEN = re.compile(r"\s*(?:(?P<ket>\|\s*\d+\s*>)|(?P<assign>:=)|(?P<arrow>->)"
                     r"|(?P<ident>[A-Za-z][A-Za-z0-9_']*)|(?P<int>\d+)|(?P<op>[\[\],{};=()]))")


@dataclass
class ProgramEnv:
    layout: VariableLayout
    unitaries: dict = field(default_factory=dict)
    measurements: dict = field(default_factory=dict)

    def unitary(self, name: str, regs, pos: int) -> np.ndarray:
        d = self.layout.dim_of(regs)
        if name in self.unitaries:
            return qc.as_matrix(self.unitaries[name])
        u = builtin_unitary(name, d)
        if u is None:
            raise ProgramSyntaxError(f"unknown unitary {name!r}", pos)
        return qc.as_matrix(u)

    def measurement(self, name: str, regs, pos: int) -> Measurement:
        if name in self.measurements:
            m = self.measurements[name]
            return m if isinstance(m, Measurement) else Measurement(m)
        m = builtin_measurement(name, self.layout.dim_of(regs))
        if m is None:
            raise ProgramSyntaxError(f"unknown measurement {name!r}", pos)
        return m

    @classmethod
    def from_json(cls, obj) -> "ProgramEnv":
        layout = VariableLayout(tuple(tuple(r) for r in obj.get("layout", [])))
        units = {k: qc.matrix_from_json(v) for k, v in obj.get("unitaries", {}).items()}
        meas = {k: qc.measurement_from_json(v) for k, v in obj.get("measurements", {}).items()}
        return cls(layout, units, meas)


class ProgramSyntaxError(ProgramError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


def _ptokenize(text: str):
    toks, pos = [], 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _PTOKEN.match(text, pos)
        if m is None:
            raise ProgramSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        toks.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _ProgramParser:
    def __init__(self, text: str, env: ProgramEnv):
        self.toks = _ptokenize(text)
        self.i = 0
        self.env = env

    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.next()
        if val != value:
            raise ProgramSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", pos)
        return pos

    def at_branch_start(self) -> bool:
        return self.peek()[0] == "int" and self.peek(1)[0] == "arrow"

    def program(self, in_case: bool = False) -> QProgram:
        stmts = [self.statement()]
        while self.peek()[1] == ";":
            if in_case and (self.peek(1)[1] == "}" or
                            (self.peek(1)[0] == "int" and self.peek(2)[0] == "arrow")):
                break
            self.next()
            stmts.append(self.statement())
        return seq(*stmts)

    def regs(self) -> tuple:
        out = []
        while True:
            kind, val, pos = self.next()
            if kind != "ident" or val in _KEYWORDS:
                raise ProgramSyntaxError(f"expected a register name, found {val!r}", pos)
            if val not in self.env.layout.names:
                raise ProgramSyntaxError(f"unknown register {val!r}", pos)
            out.append(val)
            if self.peek()[1] != ",":
                return tuple(out)
            self.next()

    def measured(self):
        kind, name, pos = self.next()
        if kind != "ident":
            raise ProgramSyntaxError(f"expected a measurement name, found {name!r}", pos)
        self.expect("[")
        regs = self.regs()
        self.expect("]")
        meas = self.env.measurement(name, regs, pos)
        if meas.dim != self.env.layout.dim_of(regs):
            raise ProgramSyntaxError(f"measurement {name} does not fit registers {list(regs)}", pos)
        return name, regs, meas

    def statement(self) -> QProgram:
        kind, val, pos = self.peek()
        if val == "(":
            self.next()
            p = self.program()
            self.expect(")")
            return p
        if kind != "ident":
            raise ProgramSyntaxError(f"expected a statement, found {val or 'end of input'!r}", pos)
        if val == "skip":
            self.next()
            return Skip()
        if val == "abort":
            self.next()
            return Abort()
        if val == "while":
            self.next()
            name, regs, meas = self.measured()
            self.expect("=")
            self.expect("1")
            self.expect("do")
            body = self.program()
            self.expect("done")
            if set(meas.outcomes) != {0, 1}:
                raise ProgramSyntaxError(f"loop measurement {name} needs outcomes 0 and 1", pos)
            return While(name, regs, meas, body)
        if val == "if":
            self.next()
            name, regs, meas = self.measured()
            self.expect("=")
            self.expect("1")
            self.expect("then")
            then = self.statement()
            other: QProgram = Skip()
            if self.peek()[1] == "else":
                self.next()
                other = self.statement()
            if set(meas.outcomes) != {0, 1}:
                raise ProgramSyntaxError(f"if measurement {name} needs outcomes 0 and 1", pos)
            return Case(name, regs, meas, {1: then, 0: other})
        if val == "case":
            self.next()
            name, regs, meas = self.measured()
            self.expect("{")
            branches = {}
            while self.peek()[1] != "}":
                k, v, p = self.next()
                if k != "int":
                    raise ProgramSyntaxError(f"expected an outcome index, found {v!r}", p)
                self.expect("->")
                if int(v) in branches:
                    raise ProgramSyntaxError(f"duplicate branch {v}", p)
                branches[int(v)] = self.program(in_case=True)
                if self.peek()[1] == ";":
                    self.next()
                elif self.peek()[1] != "}":
                    raise ProgramSyntaxError("expected ';' or '}'", self.peek()[2])
            self.expect("}")
            self.expect("end")
            if set(branches) != set(meas.outcomes):
                raise ProgramSyntaxError(f"case on {name} needs branches {meas.outcomes}", pos)
            return Case(name, regs, meas, branches)
        if val in _KEYWORDS:
            raise ProgramSyntaxError(f"unexpected keyword {val!r}", pos)
        regs = self.regs()
        if self.peek()[0] != "assign":
            kind, val, p = self.peek()
            raise ProgramSyntaxError(f"expected ':=', found {val or 'end of input'!r}", p)
        self.next()
        kind, val, p = self.peek()
        if kind == "ket":
            self.next()
            if len(regs) != 1:
                raise ProgramSyntaxError("a reset names exactly one register", p)
            value = int(val.strip("|> "))
            d = self.env.layout.dim_of(regs)
            if value >= d:
                raise ProgramSyntaxError(f"value {value} out of range for register {regs[0]}", p)
            return assign(regs[0], value, self.env.layout)
        if kind == "ident":
            self.next()
            self.expect("[")
            target = self.regs()
            self.expect("]")
            if tuple(target) != tuple(regs):
                raise ProgramSyntaxError("unitary must act on the assigned registers", p)
            u = self.env.unitary(val, regs, p)
            if u.shape != (self.env.layout.dim_of(regs),) * 2:
                raise ProgramSyntaxError(f"unitary {val} does not fit registers {list(regs)}", p)
            return Unitary(tuple(regs), val, u)
        raise ProgramSyntaxError(f"expected '|0>' or a unitary, found {val!r}", p)


def parse_program(text: str, layout, unitaries: Mapping | None = None,
                  measurements: Mapping | None = None) -> QProgram:
    env = layout if isinstance(layout, ProgramEnv) else ProgramEnv(layout, dict(unitaries or {}),
                                                                   dict(measurements or {}))
    parser = _ProgramParser(text, env)
    p = parser.program()
    kind, val, pos = parser.peek()
    if kind != "end":
        raise ProgramSyntaxError(f"unexpected token {val!r}", pos)
    return p


def print_program(p: QProgram) -> str:
    if isinstance(p, Skip):
        return "skip"
    if isinstance(p, Abort):
        return "abort"
    if isinstance(p, Reset):
        return f"{p.reg} := |0>"
    if isinstance(p, Unitary):
        regs = ", ".join(p.regs)
        return f"{regs} := {p.name}[{regs}]"
    if isinstance(p, Seq):
        return "; ".join(print_program(q) for q in flatten_seq(p))
    if isinstance(p, Case):
        regs = ", ".join(p.regs)
        if set(p.branches) == {0, 1}:
            then = _single(p.branches[1])
            if isinstance(p.branches[0], Skip):
                return f"if {p.name}[{regs}]=1 then {then}"
            return f"if {p.name}[{regs}]=1 then {then} else {_single(p.branches[0])}"
        arms = "; ".join(f"{i} -> {print_program(b)}" for i, b in sorted(p.branches.items()))
        return f"case {p.name}[{regs}] {{ {arms} }} end"
    if isinstance(p, While):
        regs = ", ".join(p.regs)
        return f"while {p.name}[{regs}]=1 do {print_program(p.body)} done"
    raise TypeError(f"not a program: {p!r}")


def _single(p: QProgram) -> str:
    text = print_program(p)
    return f"({text})" if isinstance(p, (Seq, Case)) else text


# ---------------------------------------------------------------------------
# random programs


def random_program(rng: np.random.Generator, layout: VariableLayout, depth: int = 2,
                   loops: bool = True, abort_rate: float = 0.03) -> QProgram:
    """Random well-typed program with projective measurements.

    Operator names are numbered so that distinct matrices never share a name.
    Loop bodies start with a random unitary on the measured register, which
    makes the loop terminate with probability one for almost every draw.
    """
    names = layout.names
    count = {"U": 0, "M": 0}

    def fresh(kind: str) -> str:
        count[kind] += 1
        return f"{kind}{count[kind]}"

    def some_regs(k: int) -> tuple:
        k = min(k, len(names))
        return tuple(rng.choice(names, size=k, replace=False).tolist())

    def unitary(regs=None) -> QProgram:
        regs = regs or some_regs(1 if len(names) == 1 or rng.random() < 0.7 else 2)
        return Unitary(regs, fresh("U"), qc.random_unitary(layout.dim_of(regs), rng))

    def elementary() -> QProgram:
        r = rng.random()
        if r < abort_rate:
            return Abort()
        if r < 0.12:
            return Skip()
        if r < 0.25:
            return Reset(some_regs(1)[0])
        return unitary()

    def gen(k: int) -> QProgram:
        if k == 0 or rng.random() < 0.25:
            return elementary()
        kinds = ["seq", "if", "case"] + (["while", "while"] if loops else [])
        kind = kinds[rng.integers(len(kinds))]
        if kind == "seq":
            return Seq(gen(k - 1), gen(k - 1))
        if kind == "while":
            regs = some_regs(1)
            m = qc.random_projective_measurement(layout.dim_of(regs), rng, 2)
            return While(fresh("M"), regs, m, seq(unitary(regs), gen(k - 1)))
        regs = some_regs(2 if kind == "case" else 1)
        d = layout.dim_of(regs)
        n = 3 if kind == "case" and d >= 3 else 2
        m = qc.random_projective_measurement(d, rng, n)
        return Case(fresh("M"), regs, m, {i: gen(k - 1) for i in m.outcomes})

    return gen(depth)
