"""Dense statevector and density-matrix simulation"""

import logging
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy import linalg

from .circuit import Circuit, Gate
from .const import DEFAULT_P_1Q, DEFAULT_P_2Q, MAX_DENSE_QUBITS, NORM_TOLERANCE
from .pauli import (
    NonHermitianTermError,
    NonQwcCliqueError,
    PauliString,
    PauliSum,
    QwcCliqueCover,
    measurement_basis,
    parity_signs,
)
from .types import GateKind

_LOGGER = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
FloatArray = npt.NDArray[np.float64]

__all__ = [
    "MeasurementRecord",
    "NoiseChannelSpec",
    "NonQwcCliqueError",
    "QuantumState",
    "apply_gate",
    "apply_noise_channel",
    "apply_pauli",
    "apply_pauli_exponential",
    "apply_pauli_sum",
    "clique_energy",
    "clique_estimator_variance",
    "estimate_energy",
    "exact_ground",
    "expectation",
    "gate_matrix",
    "run_circuit",
    "sample_clique",
]

_SQRT_HALF = 1 / math.sqrt(2)
_FIXED_MATRICES: dict[GateKind, ComplexArray] = {
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=np.complex128),
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQRT_HALF,
    GateKind.SX: np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=np.complex128) / 2,
    GateKind.CNOT: np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128),
}


class QuantumState:
    """A pure statevector or a density matrix over n qubits, amplitude index bit q is qubit q"""

    def __init__(self, n_qubits: int, data: ComplexArray, mixed: bool) -> None:
        self.n_qubits = n_qubits
        self._data = data
        self.mixed = mixed

    @classmethod
    def basis(cls, n_qubits: int, occupation: str | int = 0) -> "QuantumState":
        """Computational basis state, a bit string is read with qubit n-1 leftmost"""
        _check_qubit_count(n_qubits)
        if isinstance(occupation, str):
            if len(occupation) != n_qubits or any(bit not in "01" for bit in occupation):
                raise StateSizeError(f"occupation {occupation!r} does not describe {n_qubits} qubits")
            index = int(occupation, 2)
        else:
            index = occupation
        if not 0 <= index < 1 << n_qubits:
            raise StateSizeError(f"basis index {index} out of range for {n_qubits} qubits")
        amplitudes = np.zeros(1 << n_qubits, dtype=np.complex128)
        amplitudes[index] = 1.0
        return cls(n_qubits, amplitudes, False)

    @classmethod
    def from_amplitudes(cls, amplitudes: npt.ArrayLike) -> "QuantumState":
        """Pure state from a normalized vector"""
        vector = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        n_qubits = _qubits_for_dimension(vector.shape[0])
        norm = np.linalg.norm(vector)
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise UnnormalizedStateError(f"state norm is {norm}, expected 1")
        return cls(n_qubits, vector, False)

    @classmethod
    def from_density(cls, density: npt.ArrayLike) -> "QuantumState":
        """Mixed state from a Hermitian, unit-trace, positive semidefinite matrix"""
        matrix = np.asarray(density, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise StateSizeError(f"density matrix must be square, got shape {matrix.shape}")
        n_qubits = _qubits_for_dimension(matrix.shape[0])
        if not np.allclose(matrix, matrix.conj().T, atol=NORM_TOLERANCE, rtol=0):
            raise UnnormalizedStateError("density matrix is not Hermitian")
        if abs(np.trace(matrix).real - 1.0) > NORM_TOLERANCE:
            raise UnnormalizedStateError(f"density matrix trace is {np.trace(matrix).real}, expected 1")
        if np.linalg.eigvalsh(matrix).min() < -1e-9:
            raise UnnormalizedStateError("density matrix is not positive semidefinite")
        return cls(n_qubits, matrix, True)

    @property
    def dimension(self) -> int:
        return 1 << self.n_qubits

    @property
    def amplitudes(self) -> ComplexArray:
        """Statevector of a pure state"""
        if self.mixed:
            raise InvalidStateModeError("a mixed state has no amplitudes")
        return self._data

    @property
    def density(self) -> ComplexArray:
        """Density matrix, built on demand for pure states"""
        if self.mixed:
            return self._data
        return np.outer(self._data, self._data.conj())

    def to_density(self) -> "QuantumState":
        return QuantumState(self.n_qubits, self.density, True)

    def probabilities(self) -> FloatArray:
        """Born distribution over computational basis outcomes"""
        if self.mixed:
            probabilities = np.real(np.diagonal(self._data)).copy()
        else:
            probabilities = np.abs(self._data) ** 2
        probabilities = np.clip(probabilities, 0.0, None)
        return probabilities / probabilities.sum()

    def fidelity(self, other: "QuantumState") -> float:
        """Root fidelity, insensitive to global phase"""
        _check_same_size(self.n_qubits, other.n_qubits)
        if not self.mixed and not other.mixed:
            return float(abs(np.vdot(self._data, other._data)))
        if not self.mixed:
            return math.sqrt(max(0.0, float(np.real(np.vdot(self._data, other._data @ self._data)))))
        if not other.mixed:
            return other.fidelity(self)
        root = linalg.sqrtm(self._data)
        return float(np.real(np.trace(linalg.sqrtm(root @ other._data @ root))))


def _qubits_for_dimension(dimension: int) -> int:
    n_qubits = dimension.bit_length() - 1
    if dimension < 2 or 1 << n_qubits != dimension:
        raise StateSizeError(f"dimension {dimension} is not a power of two")
    _check_qubit_count(n_qubits)
    return n_qubits


def _check_qubit_count(n_qubits: int) -> None:
    if n_qubits < 1:
        raise StateSizeError(f"need at least one qubit, got {n_qubits}")
    if n_qubits > MAX_DENSE_QUBITS:
        raise TooManyQubitsError(f"{n_qubits} qubits exceed the dense limit of {MAX_DENSE_QUBITS}")


def _check_same_size(expected: int, actual: int) -> None:
    if expected != actual:
        raise StateSizeError(f"size mismatch: {expected} vs {actual} qubits")


def gate_matrix(gate: Gate, angle: float | None = None) -> ComplexArray:
    """Unitary of a gate; for two-qubit gates the first operand is the high index bit"""
    if gate.kind in _FIXED_MATRICES:
        return _FIXED_MATRICES[gate.kind]
    if angle is None:
        angle = gate.angle
    if angle is None:
        raise InvalidGateAngleError(f"{gate.kind.value} on {gate.qubits} needs an angle")
    if gate.kind is GateKind.RZ:
        return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * angle)]).astype(np.complex128)


def _apply_on_axes(tensor: ComplexArray, matrix: ComplexArray, axes: list[int]) -> ComplexArray:
    k = len(axes)
    reshaped = matrix.reshape((2,) * (2 * k))
    result = np.tensordot(reshaped, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(result, list(range(k)), axes)


def apply_gate(state: QuantumState, matrix: ComplexArray, qubits: Sequence[int]) -> QuantumState:
    """Apply a 1- or 2-qubit unitary, U rho U^dagger in mixed mode"""
    n = state.n_qubits
    _check_qubits(n, qubits)
    row_axes = [n - 1 - qubit for qubit in qubits]
    if not state.mixed:
        tensor = state.amplitudes.reshape((2,) * n)
        return QuantumState(n, _apply_on_axes(tensor, matrix, row_axes).reshape(-1), False)
    tensor = state.density.reshape((2,) * (2 * n))
    tensor = _apply_on_axes(tensor, matrix, row_axes)
    tensor = _apply_on_axes(tensor, matrix.conj(), [2 * n - 1 - qubit for qubit in qubits])
    return QuantumState(n, tensor.reshape(1 << n, 1 << n), True)


def _check_qubits(n_qubits: int, qubits: Sequence[int]) -> None:
    if not qubits or len(set(qubits)) != len(qubits) or any(not 0 <= q < n_qubits for q in qubits):
        raise InvalidQubitError(f"invalid qubit operands {list(qubits)} for {n_qubits} qubits")


def apply_pauli(vector: ComplexArray, p: PauliString) -> ComplexArray:
    """P|psi> on a raw statevector"""
    indices = np.arange(vector.shape[0])
    factor = p.coefficient * (1j) ** (p.y_count % 4)
    result = np.empty_like(vector)
    result[indices ^ p.x] = factor * parity_signs(indices, p.z) * vector
    return result


def apply_pauli_exponential(state: QuantumState, p: PauliString, theta: float) -> QuantumState:
    """exp(i theta P)|psi> = cos(theta)|psi> + i sin(theta) P|psi>"""
    _check_same_size(state.n_qubits, p.n_qubits)
    if state.mixed:
        raise InvalidStateModeError("Pauli exponentials are applied to pure states")
    if p.phase % 2:
        raise NonHermitianTermError(f"{p} is not Hermitian")
    vector = state.amplitudes
    return QuantumState(
        state.n_qubits,
        math.cos(theta) * vector + 1j * math.sin(theta) * apply_pauli(vector, p),
        False,
    )


def apply_pauli_sum(state: QuantumState, h: PauliSum) -> ComplexArray:
    """H|psi>, not normalized"""
    _check_same_size(state.n_qubits, h.n_qubits)
    return h.to_matrix() @ state.amplitudes


def expectation(state: QuantumState, h: PauliSum) -> float:
    """<psi|H|psi> or Tr(rho H)"""
    _check_same_size(state.n_qubits, h.n_qubits)
    matrix = h.to_matrix()
    if state.mixed:
        value = complex(np.sum(state.density * matrix.T))
    else:
        value = complex(np.vdot(state.amplitudes, matrix @ state.amplitudes))
    scale = max(1.0, sum(abs(coeff) for coeff in h.terms.values()))
    if abs(value.imag) > NORM_TOLERANCE * scale:
        raise ComplexExpectationError(f"expectation value has imaginary part {value.imag}")
    return value.real


def exact_ground(h: PauliSum) -> tuple[float, QuantumState]:
    """Lowest eigenpair of the dense Hamiltonian"""
    _check_qubit_count(h.n_qubits)
    values, vectors = linalg.eigh(h.to_matrix(), subset_by_index=[0, 0])
    vector = vectors[:, 0]
    # fix the global phase so the largest amplitude is real and positive
    pivot = vector[np.argmax(np.abs(vector))]
    vector = vector * (abs(pivot) / pivot)
    _LOGGER.debug("Dense ground energy %.10f on %d qubits", values[0], h.n_qubits)
    return float(values[0]), QuantumState(h.n_qubits, vector, False)


@dataclass(frozen=True)
class NoiseChannelSpec:
    """Depolarizing strengths applied after one- and two-qubit gates"""

    p_1q: float = DEFAULT_P_1Q
    p_2q: float = DEFAULT_P_2Q

    def __post_init__(self) -> None:
        for name, value in (("p_1q", self.p_1q), ("p_2q", self.p_2q)):
            if not 0.0 <= value <= 1.0:
                raise InvalidNoiseError(f"{name} must lie in [0, 1], got {value}")

    @property
    def is_noiseless(self) -> bool:
        return self.p_1q == 0.0 and self.p_2q == 0.0

    def probability_for(self, n_operands: int) -> float:
        return self.p_2q if n_operands == 2 else self.p_1q

    def scaled(self, factor: float) -> "NoiseChannelSpec":
        return NoiseChannelSpec(min(1.0, self.p_1q * factor), min(1.0, self.p_2q * factor))


def apply_noise_channel(state: QuantumState, channel: NoiseChannelSpec, qubits: Sequence[int]) -> QuantumState:
    """rho -> (1 - p) rho + p (I/d) x Tr_qubits(rho) on one qubit or a pair"""
    if not state.mixed:
        raise InvalidStateModeError("noise channels act on density matrices")
    _check_qubits(state.n_qubits, qubits)
    if len(qubits) > 2:
        raise InvalidQubitError(f"depolarizing acts on one or two qubits, got {list(qubits)}")
    p = channel.probability_for(len(qubits))
    if p == 0.0:
        return state
    return QuantumState(state.n_qubits, _depolarize(state.density, state.n_qubits, qubits, p), True)


def _depolarize(density: ComplexArray, n: int, qubits: Sequence[int], p: float) -> ComplexArray:
    k = len(qubits)
    d = 1 << k
    axes = [n - 1 - q for q in qubits] + [2 * n - 1 - q for q in qubits]
    tensor = np.moveaxis(density.reshape((2,) * (2 * n)), axes, list(range(2 * n - 2 * k, 2 * n)))
    rest_shape = tensor.shape[: 2 * n - 2 * k]
    traced = np.trace(tensor.reshape(rest_shape + (d, d)), axis1=-2, axis2=-1)
    replaced = (traced[..., None, None] * (np.eye(d) / d)).reshape(tensor.shape)
    mixed = np.moveaxis(replaced, list(range(2 * n - 2 * k, 2 * n)), axes).reshape(density.shape)
    return (1.0 - p) * density + p * mixed


def run_circuit(
    circuit: Circuit,
    parameters: Sequence[float] | Mapping[str, float] | None = None,
    initial: QuantumState | None = None,
    noise: NoiseChannelSpec | None = None,
) -> QuantumState:
    """Simulate a circuit, with a depolarizing channel after every gate when noise is given"""
    values = circuit.parameter_map(parameters if parameters is not None else ())
    state = initial if initial is not None else QuantumState.basis(circuit.n_qubits)
    _check_same_size(circuit.n_qubits, state.n_qubits)
    noisy = noise is not None and not noise.is_noiseless
    if noisy and not state.mixed:
        state = state.to_density()
    for gate in circuit.gates:
        state = apply_gate(state, gate_matrix(gate, gate.resolved_angle(values)), gate.qubits)
        if noisy and noise is not None:
            state = apply_noise_channel(state, noise, gate.qubits)
    return state


@dataclass(frozen=True)
class MeasurementRecord:
    """Shot counts of one clique, outcome bit q is qubit q after the basis change"""

    counts: Mapping[int, int]
    shots: int
    basis_clique: int
    n_qubits: int
    basis: str = field(default="")

    def __post_init__(self) -> None:
        if self.shots <= 0:
            raise InvalidMeasurementRecordError("a measurement record needs at least one shot")
        if sum(self.counts.values()) != self.shots:
            raise InvalidMeasurementRecordError(f"counts sum to {sum(self.counts.values())}, expected {self.shots}")
        if any(count < 0 for count in self.counts.values()):
            raise InvalidMeasurementRecordError("counts must be nonnegative")

    def distribution(self) -> FloatArray:
        """Empirical outcome frequencies as a dense vector"""
        frequencies = np.zeros(1 << self.n_qubits)
        for outcome, count in self.counts.items():
            frequencies[outcome] = count / self.shots
        return frequencies


def rotate_to_basis(state: QuantumState, basis: str) -> QuantumState:
    """Map X to Z with H and Y to Z with S^dagger then H, leftmost letter is qubit n-1"""
    hadamard = _FIXED_MATRICES[GateKind.H]
    s_dagger = np.diag([1.0, -1.0j])
    for qubit, letter in enumerate(reversed(basis)):
        if letter == "X":
            state = apply_gate(state, hadamard, [qubit])
        elif letter == "Y":
            state = apply_gate(state, hadamard @ s_dagger, [qubit])
    return state


def sample_clique(
    state: QuantumState,
    clique: PauliSum,
    shots: int,
    seed: int,
    clique_index: int = 0,
    stream: Iterable[int] = (),
    readout: Callable[[FloatArray], FloatArray] | None = None,
) -> MeasurementRecord:
    """Sample the clique's shared eigenbasis; the generator is seeded with (seed, *stream)

    readout, when given, maps the ideal outcome distribution to the one the detector reports.
    """
    _check_same_size(state.n_qubits, clique.n_qubits)
    if shots <= 0:
        raise InvalidMeasurementRecordError(f"shots must be positive, got {shots}")
    basis = measurement_basis(clique)
    probabilities = rotate_to_basis(state, basis).probabilities()
    if readout is not None:
        probabilities = np.clip(readout(probabilities), 0.0, None)
        probabilities = probabilities / probabilities.sum()
    rng = np.random.default_rng([seed, *stream])
    counts = rng.multinomial(shots, probabilities)
    return MeasurementRecord(
        {int(outcome): int(count) for outcome, count in enumerate(counts) if count},
        shots,
        clique_index,
        state.n_qubits,
        basis,
    )


def _sample_values(clique: PauliSum) -> FloatArray:
    """Energy contribution of the clique for every diagonal outcome"""
    indices = np.arange(1 << clique.n_qubits)
    values = np.zeros(indices.shape[0])
    for pauli, coeff in clique.items():
        values += coeff * parity_signs(indices, pauli.support_mask)
    return values


def clique_energy(distribution: FloatArray, clique: PauliSum) -> float:
    """Clique energy under a (quasi) distribution over diagonal outcomes"""
    return float(np.dot(_sample_values(clique), distribution))


def clique_estimator_variance(distribution: FloatArray, clique: PauliSum, shots: int) -> float:
    """Variance of the shot-averaged clique energy"""
    values = _sample_values(clique)
    mean = float(np.dot(values, distribution))
    second = float(np.dot(values**2, distribution))
    return max(0.0, second - mean**2) / shots


def estimate_energy(records: Sequence[MeasurementRecord], cover: QwcCliqueCover) -> float:
    """Identity offset plus empirical clique energies"""
    by_clique = {record.basis_clique: record for record in records}
    energy = cover.identity_coeff
    for index, clique in enumerate(cover.cliques):
        record = by_clique.get(index)
        if record is None:
            raise MissingCliqueRecordError(f"no measurement record for clique {index}")
        _check_same_size(cover.n_qubits, record.n_qubits)
        energy += clique_energy(record.distribution(), clique)
    return energy


class StateSizeError(ValueError):
    """Error to indicate a state and an operator act on different numbers of qubits"""


class TooManyQubitsError(ValueError):
    """Error to indicate the register is too large for dense simulation"""


class UnnormalizedStateError(ValueError):
    """Error to indicate amplitudes or a density matrix violate normalization"""


class InvalidStateModeError(ValueError):
    """Error to indicate a pure-only or mixed-only operation got the other kind of state"""


class InvalidQubitError(ValueError):
    """Error to indicate qubit operands are out of range or repeated"""


class InvalidGateAngleError(ValueError):
    """Error to indicate a rotation gate without an angle"""


class InvalidNoiseError(ValueError):
    """Error to indicate a depolarizing probability outside [0, 1]"""


class ComplexExpectationError(ValueError):
    """Error to indicate an expectation value with a significant imaginary part"""


class InvalidMeasurementRecordError(ValueError):
    """Error to indicate shot counts that do not add up"""


class MissingCliqueRecordError(LookupError):
    """Error to indicate a clique has no measurement record"""
