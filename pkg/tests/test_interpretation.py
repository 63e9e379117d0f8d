import numpy as np
import pytest

from nkaq import quantum as qc
from nkaq.interpretation import (ConvergencePolicy, InfiniteCoefficient, InterpretationSetting,
                                 check_completeness_claim, check_enc_recovery, completeness_setting,
                                 completeness_sides, dual_interpret, interpret)
from nkaq.programs import EncoderSetting, Skip, Unitary, VariableLayout, While
from nkaq.quantum import Measurement, Superoperator
from nkaq.syntax import Symbol, parse_expr

from oracles import kraus_apply

E = parse_expr


def setting(rng, d=2, names=("a", "b", "c")):
    return InterpretationSetting(d, {Symbol(n): qc.random_kraus_map(d, rng) for n in names})


def test_constants(rng):
    s = setting(rng)
    assert qc.choi_distance(interpret(E("1"), s).superop, qc.identity(2)) == 0
    assert qc.max_abs(interpret(E("0"), s).superop) == 0
    assert qc.choi_distance(dual_interpret(E("1"), s).superop, qc.identity(2)) == 0


def test_product_runs_left_factor_first(rng):
    s = setting(rng)
    rho = qc.random_density(2, rng)
    ka, kb = s.lookup(Symbol("a")).kraus, s.lookup(Symbol("b")).kraus
    got = qc.apply(interpret(E("a b"), s).superop, rho)
    assert np.allclose(got, kraus_apply(kb, kraus_apply(ka, rho)))


def test_dual_atom(rng):
    s = setting(rng)
    A = qc.random_effect(2, rng)
    K = s.lookup(Symbol("a")).kraus
    want = sum(k.conj().T @ A @ k for k in K)
    assert np.allclose(qc.apply(dual_interpret(E("a"), s).superop, A), want)


def test_divergent_star_certificate(rng):
    res = interpret(E("(1 + 1)*"), setting(rng))
    assert not res.converged and res.certificate == "diverged"


def test_star_converges_for_contractions(rng):
    s = setting(rng)
    res = interpret(E("(a b)* c"), s)
    assert res.converged
    # compare with a plain truncated series built from Kraus lists
    rho = qc.random_density(2, rng)
    ab = lambda r: kraus_apply(s.lookup(Symbol("b")).kraus, kraus_apply(s.lookup(Symbol("a")).kraus, r))
    total, cur = np.zeros((2, 2), dtype=complex), rho
    for _ in range(3000):
        total = total + cur
        cur = ab(cur)
    want = kraus_apply(s.lookup(Symbol("c")).kraus, total)
    assert np.allclose(qc.apply(res.superop, rho), want, atol=1e-9)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_primal_dual_adjunction(d, rng):
    s = setting(rng, d)
    for text in ["a b", "(a b)* c", "a + b c", "(a + b)* c a"]:
        e = E(text)
        p, q = interpret(e, s), dual_interpret(e, s)
        if not (p.converged and q.converged):
            continue
        for _ in range(5):
            A, rho = qc.random_effect(d, rng), qc.random_density(d, rng)
            lhs = np.trace(A @ qc.apply(p.superop, rho))
            rhs = np.trace(qc.apply(q.superop, A) @ rho)
            assert abs(lhs - rhs) < 1e-9


def test_policy_validation():
    with pytest.raises(ValueError):
        ConvergencePolicy(tol=0)
    with pytest.raises(ValueError):
        ConvergencePolicy(max_terms=0)


def test_setting_json_and_validation(rng):
    E1 = qc.random_kraus_map(2, rng)
    s = InterpretationSetting.from_json({"dim": 2, "eval": {"a": qc.superop_to_json(E1)}})
    assert qc.choi_distance(s.lookup(Symbol("a")), E1) < 1e-12
    assert s.validate()
    bad = InterpretationSetting(2, {Symbol("a"): Superoperator([2 * np.eye(2)])})
    assert not bad.validate()
    with pytest.raises(qc.DimensionMismatch):
        InterpretationSetting(3, {Symbol("a"): E1})


# -- string-space construction --------------------------------------------------

def test_completeness_setting_examples():
    cs = completeness_setting(["a"], 1)
    assert cs.strings == [(), ("a",)] and cs.counts == {"a": 1}
    (k,) = cs.setting.lookup(Symbol("a")).kraus
    assert np.allclose(k, np.array([[0, 0], [1, 0]]))
    cs2 = completeness_setting(["a", "b"], 2)
    assert cs2.counts["a"] == 3
    assert qc.validate_superop(cs2.setting.lookup(Symbol("a")))["traceNonIncreasing"]


def test_completeness_claim_examples():
    cs = completeness_setting(["a"], 1)
    lhs, rhs, ok = completeness_sides(E("a"), (), 1.0, cs)
    assert ok and np.allclose(lhs, rhs) and np.allclose(lhs, np.diag([0, 1]))
    lhs, rhs, _ = completeness_sides(E("a + a"), (), 1.0, cs)
    assert np.allclose(lhs, np.diag([0, 2])) and np.allclose(rhs, lhs)
    for s in [(), ("a",)]:
        lhs, rhs, _ = completeness_sides(E("1"), s, 0.5, cs)
        assert np.allclose(lhs, rhs)
    assert check_completeness_claim(E("(a b)* a + b"), ("b",), 0.7, 3, alphabet=["a", "b"])


def test_completeness_infinite_coefficient():
    cs = completeness_setting(["a"], 1)
    with pytest.raises(InfiniteCoefficient):
        completeness_sides(E("1*"), (), 1.0, cs)


# -- encoding recovery ------------------------------------------------------------

def test_enc_recovery_examples():
    Q = VariableLayout.qubits("q")
    assert check_enc_recovery(Skip(), Q)
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    m = Measurement({1: qc.proj(0, 2), 0: qc.proj(1, 2)})
    w = While("M", ("q",), m, Unitary(("q",), "X", X))
    assert check_enc_recovery(w, Q, tol=1e-9)
    # the loop never exits from |0>: still recovers
    assert check_enc_recovery(While("M", ("q",), m, Skip()), Q)


def test_enc_recovery_with_explicit_encoder():
    Q = VariableLayout.qubits("q")
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    p = Unitary(("q",), "X", X)
    enc = EncoderSetting({("unitary", "X", ("q",)): "x"})
    assert check_enc_recovery(p, Q, enc)
