"""Effects, partitions and partial-correctness triples.

A triple ``{A} P {B}`` holds when ``tr(A rho) <= tr(B P(rho)) + tr(rho) - tr(P(rho))``
for every input, or equivalently ``P^dag(I - B) ⊑ I - A``.  ``hoare_check``
decides the second form and samples the first as a cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import quantum as qc
from .interpretation import ConvergencePolicy, InterpretationSetting, dual_interpret
from .programs import (Abort, Case, EncoderSetting, NonConvergent, ProgramEnv, QProgram, Seq, Skip, Unitary,
                       VariableLayout, While, denote, encode, parse_program, random_program)
from .quantum import DEFAULT_TOL, Measurement
from .syntax import EFFECT, Atom, Expr, Inequation, Neg, Symbol, mk_prod

TOP = Atom(Symbol("e", EFFECT))
RULES = ("skip", "abort", "or", "seq", "if", "loop")


class _Undefined:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "Undefined"

    def __bool__(self):
        return False


Undefined = _Undefined()


def _effect(a, tol: float = DEFAULT_TOL) -> np.ndarray:
    a = qc.hermitian_part(qc.as_matrix(a))
    if not qc.is_effect(a, tol):
        raise ValueError("not an effect: eigenvalues must lie in [0, 1]")
    return a


def negate_effect(a) -> np.ndarray:
    a = _effect(a)
    return np.eye(a.shape[0]) - a


def oplus_effects(a, b, tol: float = DEFAULT_TOL):
    """``a + b`` when it is still below the identity, else ``Undefined``."""
    a, b = _effect(a, tol), _effect(b, tol)
    if a.shape != b.shape:
        raise qc.DimensionMismatch("effects differ in dimension")
    s = a + b
    if not qc.loewner_leq(s, np.eye(s.shape[0]), tol):
        return Undefined
    return s


def dual_apply(m: np.ndarray, a: np.ndarray) -> np.ndarray:
    """``M^dag A M``, the dual action of one measurement branch."""
    m = qc.as_matrix(m)
    return qc.hermitian_part(m.conj().T @ a @ m)


# ---------------------------------------------------------------------------
# partitions


@dataclass
class PartitionDecl:
    name: str
    measurement: Measurement
    symbols: tuple

    def __post_init__(self):
        if len(self.symbols) != len(self.measurement.outcomes):
            raise ValueError("one symbol per outcome")
        self.symbols = tuple(s if isinstance(s, Symbol) else Symbol(str(s)) for s in self.symbols)


@dataclass
class PartitionReport:
    valid: bool
    defect: float
    branches: dict  # outcome -> every sampled effect stayed an effect

    def to_json(self) -> dict:
        return {"valid": self.valid, "defect": self.defect,
                "branches": {str(k): v for k, v in self.branches.items()}}


def check_partition(m: Measurement, tol: float = DEFAULT_TOL, samples: int = 20,
                    rng: np.random.Generator | None = None) -> PartitionReport:
    rng = rng or np.random.default_rng(0)
    d = m.dim
    effects = [np.zeros((d, d)), np.eye(d)] + [qc.random_effect(d, rng) for _ in range(samples)]
    branches = {i: all(qc.is_effect(dual_apply(m[i], a), tol) for a in effects) for i in m.outcomes}
    defect = m.completeness_defect()
    return PartitionReport(defect <= tol and all(branches.values()), defect, branches)


# ---------------------------------------------------------------------------
# triples


@dataclass
class HoareTriple:
    pre: np.ndarray
    program: QProgram
    post: np.ndarray
    layout: VariableLayout

    def __post_init__(self):
        d = self.layout.dim
        self.pre = _effect(self.pre)
        self.post = _effect(self.post)
        if self.pre.shape != (d, d) or self.post.shape != (d, d):
            raise qc.DimensionMismatch(f"effects must be {d}x{d} for this layout")


@dataclass
class HoareVerdict:
    valid: bool
    margin: float  # least eigenvalue of (I - A) - P^dag(I - B)
    marginal: bool
    sampled_valid: bool
    samples: int
    tol: float

    @property
    def agree(self) -> bool:
        return self.valid == self.sampled_valid or self.marginal

    @property
    def status(self) -> str:
        if self.marginal:
            return "marginal"
        return "valid" if self.valid else "invalid"

    def to_json(self) -> dict:
        return {"valid": self.valid, "status": self.status, "margin": self.margin,
                "sampled_valid": self.sampled_valid, "samples": self.samples,
                "agree": self.agree, "tol": self.tol}


def hoare_check(t: HoareTriple, tol: float = DEFAULT_TOL, samples: int = 50,
                rng: np.random.Generator | None = None,
                policy: ConvergencePolicy | None = None) -> HoareVerdict:
    policy = policy or ConvergencePolicy()
    E = denote(t.program, t.layout, policy.tol, policy.max_terms)
    d = t.layout.dim
    eye = np.eye(d)
    lhs = qc.apply(qc.dual_superop(E), eye - t.post)
    margin = qc.loewner_margin(lhs, eye - t.pre)
    rng = rng or np.random.default_rng(0)
    sampled = True
    for k in range(samples):
        rho = qc.random_density(d, rng, rank=1 if k % 2 else None)
        out = qc.apply(E, rho)
        left = np.trace(t.pre @ rho).real
        right = np.trace(t.post @ out).real + np.trace(rho).real - np.trace(out).real
        if left > right + tol:
            sampled = False
            break
    return HoareVerdict(margin >= -tol, float(margin), abs(margin) <= tol, sampled, samples, tol)


def hoare_valid(t: HoareTriple, tol: float = DEFAULT_TOL) -> bool:
    return hoare_check(t, tol).valid


# ---------------------------------------------------------------------------
# encoding


def _effect_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Symbol):
        return Atom(x if x.sort == EFFECT else Symbol(x.name, EFFECT))
    return Atom(Symbol(str(x), EFFECT))


def encode_triple(t: HoareTriple | QProgram, enc: EncoderSetting | None = None,
                  pre="a", post="b") -> Inequation:
    """``Enc(P) ~b <= ~a``; ``pre``/``post`` name effect atoms or are effect expressions."""
    p = t.program if isinstance(t, HoareTriple) else t
    enc = enc or EncoderSetting.short(p)
    return Inequation(mk_prod([encode(p, enc), Neg(_effect_expr(post))]),
                      Neg(_effect_expr(pre)), "<=")


def triple_setting(t: HoareTriple, enc: EncoderSetting, pre="a", post="b") -> InterpretationSetting:
    """Interpretation with the effect atoms bound to constant maps ``C_A``."""
    enc.record(t.program)
    base = enc.interpretation(t.layout)
    ev = dict(base.eval)
    for name, mat in ((pre, t.pre), (post, t.post)):
        if isinstance(name, str):
            ev[Symbol(name, EFFECT)] = qc.constant_map(mat)
    ev[TOP.symbol] = qc.constant_map(np.eye(t.layout.dim))
    return InterpretationSetting(t.layout.dim, ev)


def encoded_holds(ineq: Inequation, setting: InterpretationSetting, tol: float = DEFAULT_TOL) -> bool:
    """Compare both sides in the dual interpretation; effect terms are constant maps."""
    probe = qc.proj(0, setting.dim)
    lo = qc.apply(dual_interpret(ineq.lhs, setting).superop, probe)
    hi = qc.apply(dual_interpret(ineq.rhs, setting).superop, probe)
    return qc.loewner_leq(lo, hi, tol)


# ---------------------------------------------------------------------------
# rule instances


@dataclass
class RuleCheck:
    rule: str
    premises: bool
    conclusion: bool
    margins: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.conclusion or not self.premises


def _case(meas: Measurement, regs, branches: Mapping, name: str = "M") -> Case:
    return Case(name, tuple(regs), meas, dict(branches))


def pqhl_rule_check(rule: str, inst: Mapping, tol: float = DEFAULT_TOL) -> RuleCheck:
    """Check one instance of a proof rule: valid premises must give a valid conclusion."""
    L = inst["layout"]
    d = L.dim
    eye, zero = np.eye(d), np.zeros((d, d))

    def valid(a, p, b):
        v = hoare_check(HoareTriple(a, p, b, L), tol, samples=0)
        return v.valid, v.margin

    prem: list = []
    if rule == "skip":
        concl = valid(inst["A"], Skip(), inst["A"])
    elif rule == "abort":
        concl = valid(eye, Abort(), zero)
    elif rule == "or":
        A, A1, B, B1, P = (inst[k] for k in ("A", "A1", "B", "B1", "program"))
        prem = [(qc.loewner_leq(A, A1, tol), 0.0), valid(A1, P, B1), (qc.loewner_leq(B1, B, tol), 0.0)]
        concl = valid(A, P, B)
    elif rule == "seq":
        A, B, C, P1, P2 = (inst[k] for k in ("A", "B", "C", "p1", "p2"))
        prem = [valid(A, P1, B), valid(B, P2, C)]
        concl = valid(A, Seq(P1, P2), C)
    elif rule == "if":
        M, regs, As, B, Ps = (inst[k] for k in ("measurement", "regs", "As", "B", "branches"))
        prem = [valid(As[i], Ps[i], B) for i in M.outcomes]
        pre = sum(dual_apply(L.embed(M[i], regs), As[i]) for i in M.outcomes)
        concl = valid(pre, _case(M, regs, Ps), B)
    elif rule == "loop":
        M, regs, A, B, P = (inst[k] for k in ("measurement", "regs", "A", "B", "body"))
        C = dual_apply(L.embed(M[0], regs), A) + dual_apply(L.embed(M[1], regs), B)
        prem = [valid(B, P, C)]
        concl = valid(C, While("M", tuple(regs), M, P), A)
    else:
        raise ValueError(f"unknown rule {rule!r}; expected one of {', '.join(RULES)}")
    return RuleCheck(rule, all(v for v, _ in prem), concl[0], [m for _, m in prem] + [concl[1]])


def _wp(E, b: np.ndarray) -> np.ndarray:
    """Weakest liberal precondition ``I - E^dag(I - B)``."""
    eye = np.eye(b.shape[0])
    return qc.hermitian_part(eye - qc.apply(qc.dual_superop(E), eye - b))


def random_instance(rule: str, rng: np.random.Generator, layout: VariableLayout | None = None) -> dict:
    """A random instance whose premises hold (up to rounding)."""
    L = layout or VariableLayout.qubits("q")
    d = L.dim
    reg = [L.names[0]]
    eff = lambda: qc.random_effect(d, rng)  # noqa: E731
    prog = lambda: random_program(rng, L, depth=1, loops=False)  # noqa: E731
    shrink = lambda a: rng.uniform(0.3, 1.0) * a  # noqa: E731
    inst: dict = {"layout": L}
    if rule == "skip":
        inst["A"] = eff()
    elif rule == "abort":
        pass
    elif rule == "or":
        P = prog()
        B1 = eff()
        A1 = shrink(_wp(denote(P, L), B1))
        inst.update(program=P, B1=B1, A1=A1, A=shrink(A1),
                    B=B1 + rng.uniform(0, 1) * (np.eye(d) - B1))
    elif rule == "seq":
        P1, P2 = prog(), prog()
        C = eff()
        B = shrink(_wp(denote(P2, L), C))
        inst.update(p1=P1, p2=P2, C=C, B=B, A=shrink(_wp(denote(P1, L), B)))
    elif rule == "if":
        M = qc.random_projective_measurement(L.dim_of(reg), rng)
        Ps = {i: prog() for i in M.outcomes}
        B = eff()
        inst.update(measurement=M, regs=reg, branches=Ps, B=B,
                    As={i: shrink(_wp(denote(Ps[i], L), B)) for i in M.outcomes})
    elif rule == "loop":
        # resample until the loop settles within the default iteration budget
        while True:
            M = qc.random_projective_measurement(L.dim_of(reg), rng)
            P = Seq(Unitary(tuple(reg), "V", qc.random_unitary(L.dim_of(reg), rng)), prog())
            try:
                denote(While("M", tuple(reg), M, P), L)
                break
            except NonConvergent:
                continue
        A = eff()
        E = denote(P, L)
        m0, m1 = L.embed(M[0], reg), L.embed(M[1], reg)
        B = np.zeros((d, d))
        for scale in (1.0, 0.5, 0.25, 0.1, 0.0):
            cand = scale * eff()
            C = dual_apply(m0, A) + dual_apply(m1, cand)
            if qc.loewner_leq(cand, _wp(E, C), 1e-12):
                B = cand
                break
        inst.update(measurement=M, regs=reg, body=P, A=A, B=B)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return inst


# ---------------------------------------------------------------------------
# files


def effect_from_json(obj, d: int) -> np.ndarray:
    if isinstance(obj, str):
        key = obj.strip().upper()
        if key == "I":
            return np.eye(d)
        if key in ("O", "0"):
            return np.zeros((d, d))
        raise ValueError(f"unknown effect {obj!r}")
    if isinstance(obj, (int, float)):
        return float(obj) * np.eye(d)
    return qc.matrix_from_json(obj)


def triple_from_json(obj) -> tuple[HoareTriple, list]:
    env = ProgramEnv.from_json(obj)
    if not env.layout.registers:
        env = ProgramEnv(VariableLayout.qubits("q"), env.unitaries, env.measurements)
    L = env.layout
    p = parse_program(obj["program"], env)
    t = HoareTriple(effect_from_json(obj["pre"], L.dim), p, effect_from_json(obj["post"], L.dim), L)
    parts = [PartitionDecl(q["name"], qc.measurement_from_json(q),
                           q.get("symbols") or [f"{q['name'].lower()}{i}" for i in q["ops"]])
             for q in obj.get("partitions", [])]
    return t, parts
