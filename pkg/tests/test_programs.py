import numpy as np
import pytest

from nkaq import quantum as qc
from nkaq.programs import (Abort, Case, EncoderSetting, NonConvergent, ProgramEnv, ProgramError,
                           ProgramSyntaxError, Reset, Seq, Skip, Unitary, VariableLayout, While, assign,
                           denote, encode, geometric_sum, parse_program, print_program, random_program)
from nkaq.quantum import Measurement
from nkaq.syntax import ONE, ZERO, parse_expr

from oracles import simulate, simulated_transfer

Q = VariableLayout.qubits("q")
X = np.array([[0, 1], [1, 0]], dtype=complex)
P0, P1 = qc.proj(0, 2), qc.proj(1, 2)
FLIP_ON_ZERO = Measurement({1: P0, 0: P1})  # continue while q is |0>


def env(**ms):
    return ProgramEnv(Q, {"X": X}, ms)


def test_parse_examples():
    assert isinstance(parse_program("skip", Q), Skip)
    w = parse_program("while M[q]=1 do q := X[q] done", env(M=FLIP_ON_ZERO))
    assert isinstance(w, While) and isinstance(w.body, Unitary)
    c = parse_program("if M[q]=1 then q := X[q]", env(M=FLIP_ON_ZERO))
    assert isinstance(c, Case) and isinstance(c.branches[0], Skip)


def test_parse_full_grammar():
    L = VariableLayout((("q", 2), ("r", 3)))
    text = "q := |0>; case Is1[r] { 0 -> skip; 1 -> q := H[q]; r := |0> } end; abort"
    p = parse_program(text, L)
    assert print_program(parse_program(print_program(p), L)) == print_program(p)
    # two-outcome cases print in the if form
    assert print_program(p) == "q := |0>; if Is1[r]=1 then (q := H[q]; r := |0>); abort"


@pytest.mark.parametrize("text", ["q := |0", "while M[q]=1 do skip", "r := |0>", "q := |2>",
                                  "q := Foo[q]", "if Nope[q]=1 then skip"])
def test_parse_errors(text):
    with pytest.raises(ProgramError):
        parse_program(text, env(M=FLIP_ON_ZERO))


def test_unknown_register_is_syntax_error():
    with pytest.raises(ProgramSyntaxError):
        parse_program("r := |0>", Q)


def test_denote_examples(rng):
    rho = qc.random_density(2, rng)
    assert np.allclose(qc.apply(denote(Skip(), Q), rho), rho)
    assert np.allclose(qc.apply(denote(Abort(), Q), rho), 0)
    w = While("M", ("q",), FLIP_ON_ZERO, Unitary(("q",), "X", X))
    assert np.allclose(qc.apply(denote(w, Q), P0), P1)


def test_reset_semantics(rng):
    rho = qc.random_density(2, rng)
    assert np.allclose(qc.apply(denote(Reset("q"), Q), rho), P0)


def test_seq_is_program_order():
    p = Seq(Reset("q"), Unitary(("q",), "X", X))
    assert np.allclose(qc.apply(denote(p, Q), np.eye(2) / 2), P1)


def test_non_terminating_loop_is_zero():
    # the loop never exits from |0> and exits at once from |1>
    w = While("M", ("q",), FLIP_ON_ZERO, Skip())
    E = denote(w, Q)
    assert np.allclose(qc.apply(E, P0), 0)
    assert np.allclose(qc.apply(E, P1), P1)


def test_geometric_sum_divergence():
    with pytest.raises(NonConvergent):
        geometric_sum(2 * np.eye(4), max_iter=50)


def test_assign_helper():
    L = VariableLayout((("g", 3),))
    for v in range(3):
        out = qc.apply(denote(assign("g", v, L), L), qc.proj(2, 3))
        assert np.allclose(out, qc.proj(v, 3))


def test_random_programs_match_simulation(rng):
    for n in range(25):
        L = VariableLayout.qubits("q", "r") if n % 2 else VariableLayout((("q", 2), ("t", 3)))
        p = random_program(rng, L, depth=2)
        try:
            E = denote(p, L)
        except NonConvergent:
            continue
        assert np.max(np.abs(E.transfer() - simulated_transfer(p, L))) < 1e-8, print_program(p)


def test_seq_skip_and_trace_properties(rng):
    for _ in range(20):
        L = VariableLayout.qubits("q", "r")
        p = random_program(rng, L, depth=2, loops=False, abort_rate=0)
        E = denote(p, L)
        assert qc.choi_distance(denote(Seq(p, Skip()), L), E) < 1e-12
        # while-free, abort-free programs built from full measurements preserve trace
        assert qc.validate_superop(E)["tracePreserving"]


def test_loop_partial_sums_increase(rng):
    L = VariableLayout.qubits("q")
    m = qc.random_projective_measurement(2, rng)
    body = Unitary(("q",), "U", qc.random_unitary(2, rng))
    rho = qc.random_density(2, rng)
    M0, M1 = m[0], m[1]
    total, cur = np.zeros((2, 2)), rho
    for _ in range(30):
        nxt = total + M0 @ cur @ M0.conj().T
        assert qc.loewner_leq(total, nxt, 1e-12)
        total = nxt
        cur = qc.apply(denote(body, L), M1 @ cur @ M1.conj().T)
    w = While("M", ("q",), m, body)
    assert np.allclose(qc.apply(denote(w, L), rho), simulate(w, rho, L), atol=1e-10)


def test_encode_examples():
    w = parse_program("while M[q]=1 do q := X[q] done", env(M=FLIP_ON_ZERO))
    enc = EncoderSetting({("meas", "M", ("q",), 1): "m1", ("meas", "M", ("q",), 0): "m0",
                          ("unitary", "X", ("q",)): "p"})
    assert encode(Skip(), enc) == ONE
    assert encode(Abort(), enc) == ZERO
    assert encode(w, enc) == parse_expr("(m1 p)* m0")
    c = Case("M", ("q",), FLIP_ON_ZERO, {0: Unitary(("q",), "X", X), 1: Skip()})
    enc.bind(("unitary", "X", ("q",)), "p0")
    # the translation is structural: skip contributes a literal 1
    assert encode(c, enc) == parse_expr("m0 p0 + m1 1")


def test_encoder_injective_and_complete():
    enc = EncoderSetting({("reset", "q"): "r"})
    with pytest.raises(ProgramError):
        enc.bind(("unitary", "X", ("q",)), "r")
    with pytest.raises(ProgramError):
        encode(Unitary(("q",), "X", X), enc)


def test_layout_embedding():
    L = VariableLayout((("a", 2), ("b", 3)))
    op = qc.random_unitary(3, np.random.default_rng(1))
    assert np.allclose(L.embed(op, ["b"]), np.kron(np.eye(2), op))
    with pytest.raises(ProgramError):
        VariableLayout((("a", 2), ("a", 2)))
