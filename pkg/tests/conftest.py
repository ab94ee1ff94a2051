"""
    Shared fixtures for the libcsvqe test suite.

    Read more about conftest.py under:
    - https://docs.pytest.org/en/stable/fixture.html
"""

import numpy as np
import pytest

from libcsvqe.hamiltonian_io import LabeledHamiltonian, load_bundled
from libcsvqe.pauli import PauliString
from libcsvqe.topology import HardwareTopology, load_topology

SINGLE_QUBIT = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def dense(label: str) -> np.ndarray:
    """Kronecker product with the leftmost letter as the most significant qubit"""
    matrix = np.ones((1, 1), dtype=np.complex128)
    for letter in label:
        matrix = np.kron(matrix, SINGLE_QUBIT[letter])
    return matrix


def random_label(rng: np.random.Generator, n_qubits: int) -> str:
    return "".join(rng.choice(list("IXYZ"), size=n_qubits))


def random_state(rng: np.random.Generator, n_qubits: int) -> np.ndarray:
    vector = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return vector / np.linalg.norm(vector)


def word(label: str) -> PauliString:
    return PauliString.from_label(label)


@pytest.fixture(scope="session")
def h9() -> LabeledHamiltonian:
    return load_bundled("h9")


@pytest.fixture(scope="session")
def h0() -> LabeledHamiltonian:
    return load_bundled("h0")


@pytest.fixture(scope="session")
def falcon() -> HardwareTopology:
    return load_topology("falcon27")


@pytest.fixture(scope="session")
def eagle() -> HardwareTopology:
    return load_topology("eagle127")
