import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pqsteer.assemblage import Assemblage, AssemblageParseError
from pqsteer.functionals import (
    ICD_CLASSICAL,
    ICD_QUANTUM,
    ICD_TERMS,
    BellCoefficients,
    CorrelationTable,
    FunctionalError,
    SteeringFunctional,
    chsh_expression,
    chsh_value,
    correlators,
    decompose_to_bell,
    evaluate_bell,
    evaluate_steering,
    icd_expression,
    icd_value,
    load_functional,
    optimal_selftest_model,
    save_functional,
    selftest_charlie_effects,
    shifted_chsh_functional,
    table_from_model,
)
from pqsteer.quantum import (
    I2,
    KET0,
    X,
    Y,
    Z,
    QuantumModel,
    assemblage_from_model,
    phi_plus,
    pr_box_assemblage,
    sample_quantum_model,
)

from conftest import random_hermitian

SQ2 = math.sqrt(2)


def unsteered(p, dC=2):
    return Assemblage(np.einsum("abxy,ij->abxyij", p, np.eye(dC) / dC))


def det_table(a0, b0):
    p = np.zeros((2, 2, 2, 2))
    p[a0, b0] = 1.0
    return p


def proj(obs):
    return np.stack([(I2 + obs) / 2, (I2 - obs) / 2])


def tsirelson_assemblage():
    """|Phi+>_AB (x) |0>_C with the standard CHSH measurements."""
    state = np.kron(phi_plus(2), KET0)
    A = np.stack([proj(Z), proj(X)])
    B = np.stack([proj((Z + X) / SQ2), proj((Z - X) / SQ2)])
    return assemblage_from_model(QuantumModel(state, (2, 2, 2), (A, B, None)))


# --- steering functionals ------------------------------------------------------


def test_normalization_functional():
    F = SteeringFunctional(np.einsum("abxy,ij->abxyij", np.ones((2, 2, 2, 2)) / 4, np.eye(2)))
    assert evaluate_steering(F, pr_box_assemblage()) == pytest.approx(1.0, abs=1e-14)
    assert evaluate_steering(F, tsirelson_assemblage()) == pytest.approx(1.0, abs=1e-14)


def test_shifted_chsh_on_pr_box():
    # oracle: sum over x, y of sqrt2/2 minus the PR-box CHSH value 4
    value = evaluate_steering(shifted_chsh_functional(), pr_box_assemblage())
    assert value == pytest.approx(2 * SQ2 - 4, abs=1e-12)
    direct = sum((SQ2 / 2 - (-1) ** (a ^ b ^ (x * y))) * (0.5 if (a ^ b) == x * y else 0.0)
                 for a in range(2) for b in range(2) for x in range(2) for y in range(2))
    assert value == pytest.approx(direct, abs=1e-14)


def test_shifted_chsh_on_classical():
    assert evaluate_steering(shifted_chsh_functional(), unsteered(det_table(0, 0))) == pytest.approx(2 * SQ2 - 2)
    assert chsh_value(det_table(0, 0)) == 2


def test_shifted_chsh_on_tsirelson():
    assert evaluate_steering(shifted_chsh_functional(), tsirelson_assemblage()) == pytest.approx(0.0, abs=1e-12)


def test_shifted_chsh_metadata():
    F = shifted_chsh_functional(3)
    assert F.quantum_bound == 0 and F.dim == 3


def test_functional_checks():
    with pytest.raises(FunctionalError):
        SteeringFunctional(np.zeros((2, 2, 2, 2, 2)))
    F = np.zeros((1, 1, 1, 1, 2, 2), dtype=complex)
    F[..., 0, 1] = 1
    with pytest.raises(FunctionalError, match="Hermitian"):
        SteeringFunctional(F)
    with pytest.raises(FunctionalError):
        evaluate_steering(shifted_chsh_functional(3), pr_box_assemblage())


def test_residue_reported():
    # an assemblage whose elements are not Hermitian leaves an imaginary part
    el = np.asarray(pr_box_assemblage().elements).copy()
    el[0, 0, 0, 0, 0, 1] = 0.1j
    F = np.zeros((2, 2, 2, 2, 2, 2), dtype=complex)
    F[0, 0, 0, 0] = X
    value, residue = evaluate_steering(SteeringFunctional(F), Assemblage(el), return_residue=True)
    assert residue == pytest.approx(0.1)
    assert value == pytest.approx(0.0)


def test_functional_json(tmp_path):
    F = shifted_chsh_functional()
    save_functional(F, tmp_path / "f.json")
    G = load_functional(tmp_path / "f.json")
    assert G.digest() == F.digest() and G.name == "shifted_chsh"
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(AssemblageParseError) as exc:
        load_functional(tmp_path / "bad.json")
    assert ":1:" in exc.value.where
    doc = F.to_document()
    doc["coefficients"].pop()
    with pytest.raises(AssemblageParseError, match="missing"):
        SteeringFunctional.from_document(doc)


# --- decomposition ---------------------------------------------------------------


def _single(F):
    return SteeringFunctional(np.asarray(F, dtype=complex)[None, None, None, None])


def test_decompose_identity():
    f = decompose_to_bell(_single(I2)).coefficients[0, 0, :, 0, 0, :]
    np.testing.assert_allclose(f, np.full((2, 3), 1 / 3), atol=1e-15)


def test_decompose_z():
    f = decompose_to_bell(_single(Z)).coefficients[0, 0, :, 0, 0, :]
    want = np.zeros((2, 3))
    want[0, 2], want[1, 2] = 1, -1
    np.testing.assert_allclose(f, want, atol=1e-15)


def test_decompose_zz():
    f = decompose_to_bell(_single(np.kron(Z, Z)), 2).coefficients[0, 0, :, 0, 0, :]
    want = np.zeros((4, 9))
    for d1 in range(2):
        for d2 in range(2):
            want[2 * d1 + d2, 8] = (-1) ** (d1 + d2)
    np.testing.assert_allclose(f, want, atol=1e-15)


def test_decompose_rejects_bad_dimension():
    with pytest.raises(FunctionalError):
        decompose_to_bell(_single(np.eye(3)))
    with pytest.raises(FunctionalError):
        decompose_to_bell(_single(np.eye(4)), 1)


def test_bell_coefficients_json():
    f = decompose_to_bell(shifted_chsh_functional())
    doc = f.to_document()
    assert doc["index_order"] == ["a", "b", "d", "x", "y", "w"]
    g = BellCoefficients.from_document(doc)
    np.testing.assert_array_equal(g.coefficients, f.coefficients)
    doc["index_order"] = ["x", "y", "w", "a", "b", "d"]
    with pytest.raises(AssemblageParseError):
        BellCoefficients.from_document(doc)
    with pytest.raises(FunctionalError):
        BellCoefficients(np.full((1, 1, 2, 1, 1, 3), np.nan))


@given(st.integers(1, 2), st.integers(0, 2**31 - 1))
def test_decompose_reconstructs(n, seed):
    rng = np.random.default_rng(seed)
    D = 2 ** n
    F = np.stack([random_hermitian(rng, D) for _ in range(4)]).reshape(2, 1, 2, 1, D, D)
    f = decompose_to_bell(SteeringFunctional(F), n)
    assert np.max(np.abs(f.reconstruct() - F)) <= 1e-10


@given(st.integers(0, 2**31 - 1))
def test_decompose_pauli_coefficients_oracle(seed):
    # independent oracle: the Pauli coefficients c_P = tr(P F) / 2 give f directly
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, 2)
    c = [np.trace(P @ H).real / 2 for P in (I2, X, Y, Z)]
    f = decompose_to_bell(_single(H)).coefficients[0, 0, :, 0, 0, :]
    for w in range(3):
        assert f[0, w] == pytest.approx(c[0] / 3 + c[w + 1], abs=1e-12)
        assert f[1, w] == pytest.approx(c[0] / 3 - c[w + 1], abs=1e-12)


# --- correlation tables and I^CD -------------------------------------------------------


def test_icd_terms_match_expression():
    # E11 + E12 - E21 + E22 + E31 + E41 + E33 - E43 + E52 + E62 + E53 - E63 (1-based)
    one_based = [(1, 1, 1), (1, 2, 1), (2, 1, -1), (2, 2, 1), (3, 1, 1), (4, 1, 1),
                 (3, 3, 1), (4, 3, -1), (5, 2, 1), (6, 2, 1), (5, 3, 1), (6, 3, -1)]
    assert sorted(ICD_TERMS) == sorted((z - 1, w - 1, s) for z, w, s in one_based)


def test_icd_uniform():
    assert icd_value(np.full((2, 2, 6, 3), 0.25)) == 0.0


def test_icd_optimal_model():
    table = table_from_model(optimal_selftest_model(), "cd")
    assert table.validate().passed
    assert icd_value(table) == pytest.approx(6 * SQ2, abs=1e-9)
    assert ICD_QUANTUM == pytest.approx(8.485281374, abs=1e-9)


def test_icd_best_deterministic():
    # plain-python oracle over all 512 sign assignments
    best = -np.inf
    for s in range(64):
        for t in range(8):
            a = [1 - 2 * ((s >> z) & 1) for z in range(6)]
            b = [1 - 2 * ((t >> w) & 1) for w in range(3)]
            best = max(best, sum(sg * a[z] * b[w] for z, w, sg in ICD_TERMS))
    assert best == ICD_CLASSICAL == 6


def test_icd_shape_errors():
    with pytest.raises(FunctionalError):
        icd_value(np.zeros((2, 2, 5, 3)))
    with pytest.raises(FunctionalError):
        icd_value(np.zeros((3, 2, 6, 3)))


def test_correlators():
    p = np.zeros((2, 2, 1, 1))
    p[0, 0] = p[1, 1] = 0.5
    assert correlators(p)[0, 0] == 1.0


def test_selftest_effects():
    eff = selftest_charlie_effects()
    assert eff.shape == (6, 2, 2, 2)
    np.testing.assert_allclose(eff.sum(axis=1), np.broadcast_to(I2, (6, 2, 2)), atol=1e-15)
    flagged = selftest_charlie_effects(flagged=True)
    assert flagged.shape == (6, 2, 4, 4)
    np.testing.assert_allclose(flagged.sum(axis=1), np.broadcast_to(np.eye(4), (6, 4, 4)), atol=1e-15)
    for z in range(6):
        for c in range(2):
            assert np.linalg.eigvalsh(flagged[z, c]).min() > -1e-12


def test_table_marginal_and_validate():
    model = sample_quantum_model((2, 2, 3), (2, 2, 2), (2, 2, 2), seed=4, steered_last=False)
    from pqsteer.quantum import model_probabilities

    t = CorrelationTable(model_probabilities(model), "abc")
    assert t.validate().passed
    m = t.marginal("ac")
    assert m.parties == "ac" and m.probs.shape == (2, 2, 2, 3)
    np.testing.assert_allclose(m.probs, t.probs.sum(axis=1)[:, :, :, 0, :], atol=1e-14)
    bad = CorrelationTable(np.full((2, 2, 1, 1), 0.3), "ab")
    assert [c.name for c in bad.validate().failed()] == ["normalization"]
    with pytest.raises(FunctionalError):
        CorrelationTable(np.zeros((2, 2, 2)), "ab")


def test_table_json():
    t = table_from_model(optimal_selftest_model(), "cd")
    back = CorrelationTable.from_document(t.to_document())
    np.testing.assert_array_equal(back.probs, t.probs)
    with pytest.raises(AssemblageParseError):
        CorrelationTable.from_document({"values": [1, 2]})


def test_evaluate_bell_requirements():
    f = BellCoefficients(np.zeros((2, 2, 2, 2, 2, 3)))
    with pytest.raises(FunctionalError, match="star"):
        evaluate_bell(f, CorrelationTable(np.zeros((2, 2, 2, 2, 2, 2, 1, 3)), "abcd"))
    with pytest.raises(FunctionalError):
        evaluate_bell(f, CorrelationTable(np.zeros((2, 2, 2, 2)), "cd"))
    t = CorrelationTable(np.full((2, 2, 2, 2, 2, 2, 1, 3), 1 / 16), "abcd", star=0)
    assert evaluate_bell(f, t) == 0.0


def test_expressions():
    assert chsh_expression().value(det_table(0, 0)) == 2
    e = icd_expression()
    assert e.n_parties == 2 and e.outcomes == (2, 2) and e.settings == (6, 3)
    assert e.value(table_from_model(optimal_selftest_model(), "cd").probs) == pytest.approx(6 * SQ2)


@given(st.integers(0, 2**31 - 1))
def test_icd_relabel_invariance(seed):
    rng = np.random.default_rng(seed)
    p = rng.random((2, 2, 6, 3))
    p /= p.sum(axis=(0, 1), keepdims=True)
    assert icd_value(p[::-1, ::-1]) == pytest.approx(icd_value(p), abs=1e-12)


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_quantum_assemblages_respect_functional(dA, dB, dC, seed):
    asm = assemblage_from_model(sample_quantum_model((2, 2), (2, 2), (dA, dB, dC), seed))
    assert evaluate_steering(shifted_chsh_functional(dC), asm) >= -1e-7


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_normalization_functional_property(dC, seed):
    asm = assemblage_from_model(sample_quantum_model((2, 3), (3, 2), (2, 2, dC), seed))
    F = SteeringFunctional(np.einsum("abxy,ij->abxyij", np.ones((3, 2, 2, 3)) / 6, np.eye(dC)))
    assert evaluate_steering(F, asm) == pytest.approx(1.0, abs=1e-12)
