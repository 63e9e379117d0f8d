import numpy as np
import pytest

from nkaq import quantum as qc
from nkaq.quantum import Measurement, Superoperator

from oracles import kraus_apply

X = np.array([[0, 1], [1, 0]], dtype=complex)
P0 = qc.proj(0, 2)
P1 = qc.proj(1, 2)


def test_apply_examples():
    assert np.allclose(qc.apply(Superoperator([X]), P0), P1)
    assert np.allclose(qc.apply(Superoperator([P0]), np.eye(2) / 2), P0 / 2)
    assert np.allclose(qc.apply(qc.zero_map(2), np.eye(2) / 2), 0)


def test_dimension_mismatch():
    with pytest.raises(qc.DimensionMismatch):
        qc.apply(Superoperator([X]), np.eye(3))
    with pytest.raises(qc.DimensionMismatch):
        qc.compose(Superoperator([X]), qc.identity(3))


def test_compose_examples():
    xx = qc.compose(Superoperator([X]), Superoperator([X]))
    assert qc.choi_distance(xx, qc.identity(2)) < 1e-12
    meas = qc.superop_sum(Superoperator([P0]), Superoperator([P1]))
    assert qc.validate_superop(meas)["tracePreserving"]


def test_compose_program_order(rng):
    # compose(E1, E2) runs E1 first
    E1, E2 = qc.random_kraus_map(2, rng), qc.random_kraus_map(2, rng)
    rho = qc.random_density(2, rng)
    expect = kraus_apply(E2.kraus, kraus_apply(E1.kraus, rho))
    assert np.allclose(qc.apply(qc.compose(E1, E2), rho), expect)


def test_tensor_acts_on_second_factor(rng):
    E = qc.random_kraus_map(2, rng)
    T = qc.tensor(qc.identity(2), E)
    a, b = qc.random_density(2, rng), qc.random_density(2, rng)
    assert np.allclose(qc.apply(T, np.kron(a, b)), np.kron(a, qc.apply(E, b)))


def test_dual_examples(rng):
    K = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    D = qc.dual_superop(Superoperator([K]))
    assert np.allclose(D.kraus[0], K.conj().T)
    U = qc.random_unitary(3, rng)
    assert qc.choi_distance(qc.dual_superop(qc.unitary_channel(U)), qc.unitary_channel(U.conj().T)) < 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
def test_duality_identity(d, rng):
    for _ in range(34):
        E = qc.random_kraus_map(d, rng)
        A, rho = qc.random_effect(d, rng), qc.random_density(d, rng)
        lhs = np.trace(A @ qc.apply(E, rho))
        rhs = np.trace(qc.apply(qc.dual_superop(E), A) @ rho)
        assert abs(lhs - rhs) < 1e-10


def test_loewner_examples(rng):
    assert qc.loewner_leq(np.zeros((2, 2)), qc.random_density(2, rng))
    assert qc.loewner_leq(P0, np.eye(2))
    assert not qc.loewner_leq(np.eye(2), P0)
    assert qc.loewner_margin(np.eye(2), P0) == pytest.approx(-1)
    with pytest.raises(qc.NotHermitian):
        qc.loewner_leq(np.array([[0, 1], [0, 0]]), np.eye(2))


def test_validate_examples():
    assert qc.validate_superop(Superoperator([P0])) == {"cp": True, "traceNonIncreasing": True,
                                                       "tracePreserving": False}
    assert all(qc.validate_superop(qc.unitary_channel(X)).values())
    assert not qc.validate_superop(Superoperator([2 * np.eye(2)]))["traceNonIncreasing"]


def test_non_cp_transfer_detected():
    # transpose map: positive but not completely positive
    t = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            t[j * 2 + i, i * 2 + j] = 1
    assert not qc.validate_superop(Superoperator(transfer=t))["cp"]


def test_linearity(rng):
    E = qc.random_kraus_map(3, rng)
    r, s = qc.random_density(3, rng), qc.random_density(3, rng)
    assert np.allclose(qc.apply(E, 0.3 * r + 0.7 * s), 0.3 * qc.apply(E, r) + 0.7 * qc.apply(E, s))


def test_compose_associative_and_sum_commutative(rng):
    A, B, C = (qc.random_kraus_map(2, rng) for _ in range(3))
    left = qc.compose(qc.compose(A, B), C)
    right = qc.compose(A, qc.compose(B, C))
    assert qc.choi_distance(left, right) < 1e-12
    rho = qc.random_density(2, rng)
    assert np.allclose(qc.apply(qc.superop_sum(A, B), rho), qc.apply(qc.superop_sum(B, A), rho))


def test_representations_agree(rng):
    E = qc.random_kraus_map(3, rng, n_kraus=3)
    F = Superoperator(transfer=E.transfer())
    rho = qc.random_density(3, rng)
    assert np.allclose(qc.apply(F, rho), kraus_apply(E.kraus, rho))
    assert np.allclose(kraus_apply(F.kraus, rho), kraus_apply(E.kraus, rho))


def test_choi_psd_iff_psd_preserving_spot_check(rng):
    E = qc.random_kraus_map(2, rng)
    assert qc.is_psd(E.choi())
    for _ in range(20):
        assert qc.is_psd(qc.apply(E, qc.random_psd(2, rng)))


def test_measurements(rng):
    m = qc.random_projective_measurement(3, rng, 2)
    assert m.is_complete() and m.is_projective()
    assert not Measurement([np.eye(2) / 2]).is_complete()
    povm = Measurement([np.sqrt(0.5) * np.eye(2), np.sqrt(0.5) * np.eye(2)])
    assert povm.is_complete() and not povm.is_projective()


def test_density_and_effect_types():
    qc.DensityOperator(np.eye(2) / 2)
    with pytest.raises(ValueError):
        qc.DensityOperator(np.eye(2))
    qc.Effect(P0)
    with pytest.raises(ValueError):
        qc.Effect(2 * P0)


def test_json_round_trip(rng):
    E = qc.random_kraus_map(2, rng)
    back = qc.superop_from_json(qc.superop_to_json(E))
    assert qc.choi_distance(E, back) < 1e-12
    assert np.allclose(qc.matrix_from_json([[1, 0], [0, 0]]), P0)
    assert np.allclose(qc.matrix_from_json({"dim": 2, "entries": [[0, 0], [1, 0], [1, 0], [0, 0]]}), X)
    m = qc.measurement_from_json({"ops": {"0": [[1, 0], [0, 0]], "1": [[0, 0], [0, 1]]}})
    assert m.outcomes == [0, 1]
