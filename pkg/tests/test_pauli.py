from itertools import product

import numpy as np
import pytest
from conftest import dense, random_label, word

from libcsvqe.hamiltonian_io import LabeledHamiltonian
from libcsvqe.pauli import (
    InvalidPauliLabelError,
    NonHermitianTermError,
    NonQwcCliqueError,
    PauliSizeMismatchError,
    PauliString,
    PauliSum,
    QwcCliqueCover,
    commutator,
    commutes,
    greedy_qwc_cover,
    measurement_basis,
    multiply,
    qubitwise_commutes,
)

ALL_TWO_QUBIT = ["".join(letters) for letters in product("IXYZ", repeat=2)]


def test_from_label() -> None:
    """PauliString from_label() should put the leftmost letter on the highest qubit"""
    p = word("XIZY")
    assert p.n_qubits == 4
    assert p.letter(3) == "X"
    assert p.letter(2) == "I"
    assert p.letter(1) == "Z"
    assert p.letter(0) == "Y"
    assert p.label == "XIZY"
    assert p.support == (0, 1, 3)
    assert p.weight == 3
    assert p.y_count == 1


def test_from_label_rejects_garbage() -> None:
    """PauliString from_label() should reject empty labels and unknown letters"""
    with pytest.raises(InvalidPauliLabelError):
        PauliString.from_label("")
    with pytest.raises(InvalidPauliLabelError):
        PauliString.from_label("XQ")


def test_to_matrix_matches_kronecker_products() -> None:
    """PauliString to_matrix() should equal the Kronecker product of its letters"""
    for label in ALL_TWO_QUBIT + ["XYZ", "YYI", "ZIX"]:
        assert np.allclose(word(label).to_matrix(), dense(label)), label


def test_multiply_single_qubit_table() -> None:
    """multiply() should follow XY = iZ and its cyclic permutations"""
    assert multiply(word("X"), word("Y")) == PauliString.from_label("Z", phase=1)
    assert multiply(word("Y"), word("Z")) == PauliString.from_label("X", phase=1)
    assert multiply(word("Z"), word("X")) == PauliString.from_label("Y", phase=1)
    assert multiply(word("Y"), word("X")) == PauliString.from_label("Z", phase=3)
    assert multiply(word("Y"), word("Y")) == PauliString.identity(1)


def test_multiply_matches_dense_products_exhaustively() -> None:
    """multiply() should agree with dense matrix products on every pair of 2-qubit words"""
    for a, b in product(ALL_TWO_QUBIT, repeat=2):
        assert np.allclose(multiply(word(a), word(b)).to_matrix(), dense(a) @ dense(b)), (a, b)


def test_multiply_matches_dense_products_on_random_words() -> None:
    """multiply() should agree with dense matrix products on random 5-qubit words"""
    rng = np.random.default_rng(7)
    for _ in range(200):
        a, b = random_label(rng, 5), random_label(rng, 5)
        product_word = multiply(word(a), word(b))
        assert np.allclose(product_word.to_matrix(), dense(a) @ dense(b)), (a, b)


def test_multiply_is_associative() -> None:
    """multiply() should be associative, phases included"""
    rng = np.random.default_rng(11)
    for _ in range(100):
        a, b, c = (word(random_label(rng, 3)) for _ in range(3))
        assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))


def test_multiply_size_mismatch() -> None:
    """multiply() should refuse words on different qubit counts"""
    with pytest.raises(PauliSizeMismatchError):
        multiply(word("XY"), word("XYZ"))


def test_commutes_matches_dense() -> None:
    """commutes() should agree with the dense commutator on random words"""
    rng = np.random.default_rng(3)
    for _ in range(200):
        a, b = random_label(rng, 4), random_label(rng, 4)
        dense_commutes = np.allclose(dense(a) @ dense(b), dense(b) @ dense(a))
        assert commutes(word(a), word(b)) is dense_commutes, (a, b)


def test_qubitwise_commutes() -> None:
    """qubitwise_commutes() should require equal letters wherever both words act"""
    assert qubitwise_commutes(word("XIZ"), word("XZI"))
    assert qubitwise_commutes(word("IIZ"), word("XII"))
    assert not qubitwise_commutes(word("XX"), word("YY"))
    # commuting but not qubit-wise commuting
    assert commutes(word("XX"), word("YY"))


def test_pauli_sum_from_terms_folds_phases() -> None:
    """PauliSum from_terms() should fold a -1 phase into the coefficient and prune zeros"""
    h = PauliSum.from_terms(
        2,
        [
            (word("XX"), 0.5),
            (PauliString.from_label("XX", phase=2), 0.25),
            (word("ZZ"), 1.0),
            (word("ZZ"), -1.0),
        ],
    )
    assert h.terms == {word("XX"): 0.25}


def test_pauli_sum_from_terms_rejects_imaginary_phase() -> None:
    """PauliSum from_terms() should reject an anti-Hermitian term"""
    with pytest.raises(NonHermitianTermError):
        PauliSum.from_terms(1, [(PauliString.from_label("X", phase=1), 1.0)])


def test_pauli_sum_to_matrix() -> None:
    """PauliSum to_matrix() should equal the weighted sum of dense words"""
    h = PauliSum.from_dict({"II": -1.5, "XY": 0.25, "ZI": 0.75})
    expected = -1.5 * dense("II") + 0.25 * dense("XY") + 0.75 * dense("ZI")
    assert np.allclose(h.to_matrix(), expected)
    assert h.identity_coefficient == -1.5
    assert len(h.without_identity()) == 2


def test_commutator_single_qubit() -> None:
    """commutator() should give i[Z, Y] = 2X"""
    result = commutator(PauliSum.from_dict({"Z": 1.0}), word("Y"))
    assert result.terms == pytest.approx({word("X"): 2.0})


def test_commutator_matches_dense() -> None:
    """commutator() should equal i(HP - PH) computed densely"""
    rng = np.random.default_rng(5)
    for _ in range(20):
        labels = {random_label(rng, 3) for _ in range(6)}
        h = PauliSum.from_dict({label: float(rng.normal()) for label in labels})
        p_label = random_label(rng, 3)
        matrix, p = h.to_matrix(), dense(p_label)
        expected = 1j * (matrix @ p - p @ matrix)
        assert np.allclose(commutator(h, word(p_label)).to_matrix(), expected)


def test_commutator_of_bundled_clique(h0: LabeledHamiltonian) -> None:
    """commutator() should match the dense oracle on a bundled clique"""
    clique = h0.cover.cliques[0]
    p = word("IIIXY")
    matrix = clique.to_matrix()
    expected = 1j * (matrix @ dense("IIIXY") - dense("IIIXY") @ matrix)
    assert np.allclose(commutator(clique, p).to_matrix(), expected)


def test_measurement_basis() -> None:
    """measurement_basis() should merge the letters of a qubit-wise commuting clique"""
    clique = PauliSum.from_dict({"IXZ": 1.0, "YXI": 0.5, "IIZ": 0.25})
    assert measurement_basis(clique) == "YXZ"
    with pytest.raises(NonQwcCliqueError):
        measurement_basis(PauliSum.from_dict({"XI": 1.0, "ZI": 1.0}))


def test_greedy_qwc_cover_reconstructs() -> None:
    """greedy_qwc_cover() should produce valid cliques that sum back to the operator"""
    rng = np.random.default_rng(13)
    labels = {random_label(rng, 4) for _ in range(30)}
    h = PauliSum.from_dict({label: float(rng.normal()) for label in labels})
    cover = greedy_qwc_cover(h)
    cover.validate()
    assert cover.reconstruct() == h
    assert cover.n_terms == len(h.without_identity())


def test_cover_validate_rejects_bad_cliques() -> None:
    """QwcCliqueCover validate() should reject non-commuting members and identity terms"""
    clashing = QwcCliqueCover(2, 0.0, (PauliSum.from_dict({"XI": 1.0, "ZI": 1.0}),))
    with pytest.raises(NonQwcCliqueError):
        clashing.validate()
    identity = QwcCliqueCover(2, 0.0, (PauliSum.from_dict({"II": 1.0}),))
    with pytest.raises(NonQwcCliqueError):
        identity.validate()
