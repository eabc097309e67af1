import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pqsteer.assemblage import AssemblageError, BipartiteAssemblage, Scenario, transpose_elements, validate
from pqsteer.quantum import (
    I2,
    KET0,
    KET1,
    PAULIS,
    QuantumModel,
    QuantumModelError,
    ReferenceAssemblage,
    X,
    Y,
    Z,
    assemblage_from_model,
    conjugate_model,
    ghjw_realization,
    haar_pure_state,
    haar_unitary,
    join_outcome,
    join_setting,
    load_model,
    model_probabilities,
    pauli_steered_elements,
    phi_plus,
    pr_box_assemblage,
    random_density,
    random_effect,
    random_povm,
    random_projective,
    reconstruction_error,
    reference_assemblage,
    sample_quantum_assemblage,
    sample_quantum_model,
    save_model,
    split_outcome,
    split_setting,
    tensor_pauli_basis,
)


def test_paulis():
    assert abs(np.trace(X @ Y)) == 0
    np.testing.assert_allclose(X @ Y, 1j * Z)
    for P in PAULIS:
        np.testing.assert_allclose(P @ P, I2)


def test_pauli_steered_elements_identities():
    S = pauli_steered_elements(1)
    assert S.shape == (2, 3, 2, 2)
    for w, P in enumerate(PAULIS):
        np.testing.assert_array_equal(S[0, w] - S[1, w], P)
        np.testing.assert_array_equal(S[0, w] + S[1, w], I2)
    np.testing.assert_array_equal(S[0, 2], KET0)
    np.testing.assert_array_equal(S[1, 2], KET1)


def test_pauli_steered_elements_two_qubits():
    S1, S2 = pauli_steered_elements(1), pauli_steered_elements(2)
    assert S2.shape == (4, 9, 4, 4)
    for d in range(4):
        for w in range(9):
            d1, d2 = split_outcome(d, 2)
            w1, w2 = split_setting(w, 2)
            np.testing.assert_allclose(S2[d, w], np.kron(S1[d1, w1], S1[d2, w2]))
    for w in range(9):
        np.testing.assert_allclose(S2[:, w].sum(axis=0), np.eye(4), atol=1e-15)


def test_index_helpers():
    assert split_outcome(2, 2) == (1, 0)
    assert join_outcome((1, 0)) == 2
    assert split_setting(5, 2) == (1, 2)
    assert join_setting((1, 2)) == 5
    for w in range(27):
        assert join_setting(split_setting(w, 3)) == w


def test_tensor_pauli_basis():
    B = tensor_pauli_basis(2)
    assert len(B) == 16
    np.testing.assert_array_equal(B[0], np.eye(4))
    np.testing.assert_array_equal(B[15], np.kron(Z, Z))
    gram = np.array([[np.trace(a.conj().T @ b) for b in B] for a in B])
    np.testing.assert_allclose(gram, 4 * np.eye(16), atol=1e-12)
    with pytest.raises(ValueError):
        tensor_pauli_basis(0)


@pytest.mark.parametrize("r", [0.0, 0.25, 1.0])
def test_reference_assemblage(r):
    ref = reference_assemblage(1, r)
    assert isinstance(ref, ReferenceAssemblage)
    assert validate(ref).passed
    assert ref.dim == 4
    np.testing.assert_allclose(np.trace(ref.elements, axis1=-2, axis2=-1), 0.5, atol=1e-15)
    red = np.asarray(ref.elements).sum(axis=0)
    for w in range(3):
        np.testing.assert_array_equal(red[w], red[0])


def test_reference_conditional_branches():
    # r = 1: S (x) |0><0| ; r = 0: S^T (x) |1><1|
    ref1, ref0 = reference_assemblage(1, 1.0), reference_assemblage(1, 0.0)
    np.testing.assert_array_equal(ref1.conditional_elements[0, 2], np.kron(KET0, KET0))
    np.testing.assert_array_equal(ref0.conditional_elements[0, 1], np.kron(((I2 + Y) / 2).T, KET1))
    np.testing.assert_allclose(ref0.conditional_elements[0, 1], np.kron((I2 - Y) / 2, KET1))


def test_reference_two_qubits():
    ref = reference_assemblage(2, 0.5)
    assert ref.index_shape == (4, 9)
    assert ref.dim == 8
    assert validate(ref).passed


def test_reference_errors():
    with pytest.raises(ValueError):
        reference_assemblage(1, 1.5)
    with pytest.raises(ValueError):
        reference_assemblage(0, 0.0)


def test_reference_replace_drops_subclass():
    t = transpose_elements(reference_assemblage(1, 0.0))
    assert type(t) is BipartiteAssemblage


def test_pr_box():
    asm = pr_box_assemblage()
    p = asm.probabilities()
    for a, b, x, y in np.ndindex(2, 2, 2, 2):
        assert p[a, b, x, y] == pytest.approx(0.5 if (a ^ b) == x * y else 0.0)
    assert validate(pr_box_assemblage(3)).passed


def test_phi_plus():
    P = phi_plus(2)
    np.testing.assert_allclose(P, np.array([[1, 0, 0, 1], [0] * 4, [0] * 4, [1, 0, 0, 1]]) / 2)
    np.testing.assert_allclose(P @ P, P, atol=1e-15)
    np.testing.assert_array_equal(P.T, P)


def test_model_validation():
    with pytest.raises(QuantumModelError):
        QuantumModel(np.eye(4) / 4, (2, 3), ())
    with pytest.raises(QuantumModelError):
        QuantumModel(np.eye(4) / 4, (2, 2), (np.zeros((1, 2, 3, 3)), None))
    bad = QuantumModel(np.eye(4) / 4, (2, 2), (np.stack([[np.eye(2), np.eye(2)]]), None))
    assert not bad.validate().passed
    assert [c.name for c in bad.validate().failed()] == ["party0_complete"]
    with pytest.raises(QuantumModelError):
        assemblage_from_model(bad)


def test_assemblage_from_model_bell_state():
    # Dani measures Z on |Phi+>; Charlie is steered to |d><d| / 2
    Zm = np.stack([[KET0, KET1]])
    model = QuantumModel(phi_plus(2), (2, 2), (Zm, None))
    asm = assemblage_from_model(model)
    assert isinstance(asm, BipartiteAssemblage)
    np.testing.assert_allclose(asm[0, 0], KET0 / 2, atol=1e-15)
    np.testing.assert_allclose(asm[1, 0], KET1 / 2, atol=1e-15)
    # X on |Phi+> steers to the X eigenstates; Y steers to the conjugate eigenstates
    Xm = np.stack([[(I2 + X) / 2, (I2 - X) / 2], [(I2 + Y) / 2, (I2 - Y) / 2]])
    asm = assemblage_from_model(QuantumModel(phi_plus(2), (2, 2), (Xm, None)))
    np.testing.assert_allclose(asm[0, 0], (I2 + X) / 4, atol=1e-15)
    np.testing.assert_allclose(asm[0, 1], (I2 - Y) / 4, atol=1e-15)


def test_steered_party_choice():
    model = sample_quantum_model((2, 2), (2, 2), (2, 3, 2), seed=5)
    full = np.asarray(assemblage_from_model(model).elements)
    p = model_probabilities(QuantumModel(model.state, model.dims, model.measurements[:2] + (np.stack([[np.eye(2), 0 * np.eye(2)]]),)))
    np.testing.assert_allclose(np.trace(full, axis1=-2, axis2=-1).real, p[:, :, 0, :, :, 0], atol=1e-12)


def test_samplers():
    rng = np.random.default_rng(1)
    U = haar_unitary(4, rng)
    np.testing.assert_allclose(U @ U.conj().T, np.eye(4), atol=1e-12)
    assert haar_unitary(1, rng).shape == (1, 1)
    assert abs(np.linalg.norm(haar_pure_state(5, rng)) - 1) < 1e-12
    E = random_povm(3, 4, rng)
    np.testing.assert_allclose(E.sum(axis=0), np.eye(3), atol=1e-12)
    assert all(np.linalg.eigvalsh(e).min() > -1e-12 for e in E)
    P = random_projective(4, 2, rng)
    np.testing.assert_allclose(P[0] @ P[0], P[0], atol=1e-12)
    np.testing.assert_allclose(P.sum(axis=0), np.eye(4), atol=1e-12)
    F = random_effect(3, rng)
    ev = np.linalg.eigvalsh(F)
    assert ev.min() >= -1e-12 and ev.max() <= 1 + 1e-12
    Fp = random_effect(3, rng, projective=True)
    np.testing.assert_allclose(Fp @ Fp, Fp, atol=1e-12)
    rho = random_density(3, 2, rng)
    assert abs(np.trace(rho) - 1) < 1e-12 and np.linalg.matrix_rank(rho, 1e-10) == 2


def test_sampling_reproducible():
    a = sample_quantum_assemblage(Scenario(nX=2, nY=2, nA=2, nB=2, dC=2), (2, 2, 2), seed=11)
    b = sample_quantum_assemblage(Scenario(nX=2, nY=2, nA=2, nB=2, dC=2), (2, 2, 2), seed=11)
    assert a.digest() == b.digest()


def test_conjugate_model_transposes():
    model = sample_quantum_model((2, 2), (2, 2), (2, 2, 2), seed=3)
    a = assemblage_from_model(model)
    b = assemblage_from_model(conjugate_model(model))
    np.testing.assert_allclose(np.asarray(b.elements), np.swapaxes(np.asarray(a.elements), -1, -2), atol=1e-12)


def test_ghjw_bell_state():
    Xm = np.stack([[(I2 + P) / 2, (I2 - P) / 2] for P in PAULIS])
    asm = assemblage_from_model(QuantumModel(phi_plus(2), (2, 2), (Xm, None)))
    model = ghjw_realization(asm)
    assert model.dims == (2, 2)
    assert model.validate().passed
    assert reconstruction_error(asm, model) < 1e-12


def test_ghjw_rank_deficient():
    # reduced state of rank 1 in dimension 3: Charlie always holds |0>
    el = np.zeros((2, 2, 3, 3), dtype=complex)
    el[0, :, 0, 0] = 0.3
    el[1, :, 0, 0] = 0.7
    asm = BipartiteAssemblage(el)
    model = ghjw_realization(asm)
    assert model.dims == (1, 3)
    assert reconstruction_error(asm, model) < 1e-12


def test_ghjw_rejects_invalid():
    el = np.asarray(reference_assemblage(1, 0.0).elements).copy()
    el[0, 0] *= 2
    with pytest.raises(AssemblageError):
        ghjw_realization(BipartiteAssemblage(el))


def test_ghjw_reference():
    ref = reference_assemblage(1, 0.4)
    assert reconstruction_error(ref, ghjw_realization(ref)) < 1e-12


def test_model_json_round_trip(tmp_path):
    model = sample_quantum_model((2, 3), (2, 2), (2, 2, 3), seed=9)
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back.dims == model.dims
    np.testing.assert_array_equal(back.state, model.state)
    np.testing.assert_array_equal(back.measurements[1], model.measurements[1])
    assert back.measurements[2] is None


@given(st.integers(1, 3), st.integers(1, 4), st.integers(2, 3), st.integers(0, 2**31 - 1))
def test_ghjw_round_trip_property(dD, dC, settings, seed):
    model = sample_quantum_model((settings,), (2,), (dD, dC), seed)
    asm = assemblage_from_model(model)
    assert reconstruction_error(asm, ghjw_realization(asm)) <= 1e-9


@given(st.integers(0, 2**31 - 1))
def test_conjugate_property(seed):
    model = sample_quantum_model((2, 2), (2, 3), (2, 2, 3), seed)
    a = np.asarray(assemblage_from_model(model).elements)
    b = np.asarray(assemblage_from_model(conjugate_model(model)).elements)
    assert np.max(np.abs(b - np.swapaxes(a, -1, -2))) <= 1e-12


@given(st.integers(1, 2), st.floats(0, 1))
def test_reference_reduced_state_consistent(n, r):
    ref = reference_assemblage(n, r)
    red = np.asarray(ref.elements).sum(axis=0)
    assert np.all(red == red[0])
