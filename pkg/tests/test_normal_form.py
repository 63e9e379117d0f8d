import numpy as np
import pytest

from nkaq import quantum as qc
from nkaq.normal_form import guard_hygiene, is_single_loop, normal_form_distance, normalize_program, \
    verify_normal_form
from nkaq.programs import (Case, NonConvergent, ProgramEnv, ProgramError, Skip, VariableLayout, While,
                           count_while, parse_program, random_program)
from nkaq.quantum import Measurement

Q = VariableLayout.qubits("q")
X = np.array([[0, 1], [1, 0]], dtype=complex)
M = Measurement({1: qc.proj(0, 2), 0: qc.proj(1, 2)})


def prog(text, layout=Q):
    return parse_program(text, ProgramEnv(layout, {"X": X}, {"M": M}))


def test_skip_shape():
    nf = normalize_program(Skip(), Q)
    assert count_while(nf.prefix) == 0 and isinstance(nf.body, Skip)
    assert nf.guards == (("g0", 1),)
    assert is_single_loop(nf.program())
    assert verify_normal_form(Skip(), nf)


def test_single_loop_is_kept():
    w = prog("while M[q]=1 do q := X[q] done")
    nf = normalize_program(w, Q)
    assert nf.guards == () and nf.body == w.body
    assert verify_normal_form(w, nf)


def test_two_loops():
    p = prog("while M[q]=1 do q := X[q] done; q := H[q]; while M[q]=1 do q := X[q] done")
    nf = normalize_program(p, Q)
    assert [d for _, d in nf.guards] == [3]
    assert is_single_loop(nf.program())
    assert verify_normal_form(p, nf)
    assert guard_hygiene(p, nf)


def test_case_guard_has_one_more_value():
    L = VariableLayout((("q", 2), ("r", 3)))
    p = parse_program("case Meas[r] { 0 -> skip; 1 -> while M[q]=1 do q := X[q] done; 2 -> q := H[q] } end",
                      ProgramEnv(L, {"X": X}, {"M": M}))
    assert isinstance(p, Case)
    nf = normalize_program(p, L)
    assert 4 in [d for _, d in nf.guards]
    assert verify_normal_form(p, nf) and guard_hygiene(p, nf)


def test_nested_loop():
    p = prog("while M[q]=1 do q := H[q]; while M[q]=1 do q := X[q] done done")
    nf = normalize_program(p, Q)
    assert count_while(nf.body) == 0
    assert verify_normal_form(p, nf)


def test_is_single_loop_examples():
    w = prog("while M[q]=1 do q := X[q] done")
    assert is_single_loop(w)
    assert not is_single_loop(Skip())
    assert not is_single_loop(prog("while M[q]=1 do q := X[q] done; while M[q]=1 do skip done"))
    assert not is_single_loop(While("M", ("q",), M, w))


def test_dimension_limit():
    L = VariableLayout.qubits("a", "b", "c", "d", "e")
    p = parse_program("while M[a]=1 do a := X[a] done; while M[b]=1 do b := X[b] done; "
                      "while M[c]=1 do c := X[c] done", ProgramEnv(L, {"X": X}, {"M": M}))
    nf = normalize_program(p, L)
    with pytest.raises(ProgramError):
        normal_form_distance(p, nf)


def test_random_programs(rng):
    done = 0
    while done < 12:
        L = VariableLayout.qubits("q")
        p = random_program(rng, L, depth=2)
        nf = normalize_program(p, L)
        if nf.layout.dim > 64:
            continue
        try:
            ok = verify_normal_form(p, nf)
        except NonConvergent:
            continue
        assert ok and is_single_loop(nf.program())
        done += 1
