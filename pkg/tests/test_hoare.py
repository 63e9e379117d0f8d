import numpy as np
import pytest

from nkaq import quantum as qc
from nkaq.hoare import (RULES, HoareTriple, Undefined, check_partition, encode_triple, encoded_holds,
                        hoare_check, hoare_valid, negate_effect, oplus_effects, pqhl_rule_check,
                        random_instance, triple_from_json, triple_setting)
from nkaq.programs import Abort, denote, EncoderSetting, Skip, Unitary, VariableLayout, random_program
from nkaq.quantum import Measurement
from nkaq.syntax import Alphabet, parse_inequation

AB = Alphabet.of(effects=["a", "b"])

from oracles import partial_correctness_sampled

Q = VariableLayout.qubits("q")
I2, O2 = np.eye(2), np.zeros((2, 2))
P0, P1 = qc.proj(0, 2), qc.proj(1, 2)
X = np.array([[0, 1], [1, 0]], dtype=complex)


def test_effect_operations():
    assert np.allclose(negate_effect(P0), P1)
    assert np.allclose(oplus_effects(P0, P1), I2)
    assert oplus_effects(I2, P0) is Undefined and not Undefined
    with pytest.raises(ValueError):
        negate_effect(2 * I2)


def test_effect_algebra_laws(rng):
    for _ in range(200):
        d = int(rng.integers(2, 4))
        a, b = qc.random_effect(d, rng), qc.random_effect(d, rng)
        assert np.allclose(negate_effect(negate_effect(a)), a)
        assert np.allclose(oplus_effects(a, negate_effect(a)), np.eye(d))
        ab, ba = oplus_effects(a, b), oplus_effects(b, a)
        assert (ab is Undefined) == (ba is Undefined)
        if ab is not Undefined:
            assert np.allclose(ab, ba)
        # a (+) b is defined exactly when a <= ~b
        assert (ab is not Undefined) == qc.loewner_leq(a, negate_effect(b), 1e-9)


def test_partitions():
    assert check_partition(qc.computational_measurement(2)).valid
    assert check_partition(Measurement([I2])).valid
    bad = check_partition(Measurement([I2 / 2]))
    assert not bad.valid and bad.defect == pytest.approx(0.75)


def test_triple_examples():
    assert hoare_valid(HoareTriple(P0, Skip(), P0, Q))
    assert hoare_valid(HoareTriple(I2, Abort(), O2, Q))
    v = hoare_check(HoareTriple(P0, Unitary(("q",), "X", X), P1, Q))
    assert v.valid and v.marginal and v.status == "marginal"
    w = hoare_check(HoareTriple(P0, Unitary(("q",), "X", X), P0, Q))
    assert not w.valid and w.margin == pytest.approx(-1) and not w.sampled_valid


def test_dual_and_sampled_agree(rng):
    for _ in range(100):
        p = random_program(rng, Q, depth=2, loops=False)
        a, b = qc.random_effect(2, rng), qc.random_effect(2, rng)
        v = hoare_check(HoareTriple(a, p, b, Q), samples=40, rng=rng)
        # sampling can miss a thin violation but never invents one
        assert v.sampled_valid or not v.valid
        if v.valid and not v.marginal:
            E = denote(p, Q)
            assert partial_correctness_sampled(a, b, lambda r: qc.apply(E, r), 2, rng)


def test_encoding_examples():
    ineq = encode_triple(Skip())
    assert ineq == parse_inequation("1 ~b <= ~a", AB)
    assert encode_triple(Abort()) == parse_inequation("0 ~b <= ~a", AB)


def test_encoded_form_matches_validity(rng):
    for _ in range(30):
        p = random_program(rng, Q, depth=1, loops=False)
        a, b = qc.random_effect(2, rng), qc.random_effect(2, rng)
        t = HoareTriple(a, p, b, Q)
        enc = EncoderSetting.short(p)
        v = hoare_check(t, samples=0)
        if v.marginal:
            continue
        assert encoded_holds(encode_triple(t, enc), triple_setting(t, enc)) == v.valid


@pytest.mark.parametrize("rule", RULES)
def test_rule_soundness(rule, rng):
    for _ in range(100):
        rc = pqhl_rule_check(rule, random_instance(rule, rng))
        assert rc.premises and rc.ok, rc.margins


def test_unknown_rule():
    with pytest.raises(ValueError):
        pqhl_rule_check("frame", {"layout": Q})


def test_triple_json():
    t, parts = triple_from_json({"registers": {"q": 2}, "pre": [[1, 0], [0, 0]], "program": "q := X[q]",
                                 "post": [[0, 0], [0, 1]]})
    assert hoare_valid(t) and parts == []
