import math

import numpy as np
import pytest
from conftest import dense, random_label, random_state, word
from scipy import linalg

from libcsvqe.circuit import Circuit, Gate
from libcsvqe.hamiltonian_io import LabeledHamiltonian, load_bundled_sweep
from libcsvqe.pauli import PauliSum
from libcsvqe.simulator import (
    InvalidMeasurementRecordError,
    MeasurementRecord,
    MissingCliqueRecordError,
    NoiseChannelSpec,
    QuantumState,
    StateSizeError,
    UnnormalizedStateError,
    apply_noise_channel,
    apply_pauli_exponential,
    apply_pauli_sum,
    estimate_energy,
    exact_ground,
    expectation,
    run_circuit,
    sample_clique,
)
from libcsvqe.types import GateKind


def test_basis_state_ordering() -> None:
    """QuantumState basis() should read the occupation string with qubit n-1 leftmost"""
    state = QuantumState.basis(3, "001")
    assert state.amplitudes[1] == 1.0
    assert QuantumState.basis(3, "100").amplitudes[4] == 1.0
    with pytest.raises(StateSizeError):
        QuantumState.basis(3, "01")


def test_from_amplitudes_requires_normalization() -> None:
    """QuantumState from_amplitudes() should reject unnormalized vectors"""
    with pytest.raises(UnnormalizedStateError):
        QuantumState.from_amplitudes([1.0, 1.0])


def test_pauli_exponential_matches_expm() -> None:
    """apply_pauli_exponential() should equal the dense matrix exponential"""
    rng = np.random.default_rng(1)
    for label in ("XYZ", "IYI", "ZZX", "YYY"):
        theta = float(rng.uniform(-math.pi, math.pi))
        vector = random_state(rng, 3)
        evolved = apply_pauli_exponential(QuantumState.from_amplitudes(vector), word(label), theta)
        expected = linalg.expm(1j * theta * dense(label)) @ vector
        assert np.allclose(evolved.amplitudes, expected)


def test_expectation_matches_dense() -> None:
    """expectation() should agree for statevectors and density matrices"""
    rng = np.random.default_rng(2)
    h = PauliSum.from_dict({"IZ": 0.5, "XX": -0.25, "YI": 0.75, "II": -1.0})
    vector = random_state(rng, 2)
    pure = QuantumState.from_amplitudes(vector)
    expected = float(np.vdot(vector, h.to_matrix() @ vector).real)
    assert expectation(pure, h) == pytest.approx(expected, abs=1e-12)
    assert expectation(pure.to_density(), h) == pytest.approx(expected, abs=1e-12)


def test_reference_energy_of_h9(h9: LabeledHamiltonian) -> None:
    """expectation() of a basis state should be the identity plus the diagonal terms"""
    state = QuantumState.basis(5, "10000")
    vector = state.amplitudes
    expected = float(np.vdot(vector, h9.hamiltonian.to_matrix() @ vector).real)
    assert expectation(state, h9.hamiltonian) == pytest.approx(expected, abs=1e-10)


def test_exact_ground_matches_eigvalsh() -> None:
    """exact_ground() should return the lowest eigenvalue and a matching eigenvector"""
    for h in load_bundled_sweep():
        energy, state = exact_ground(h.hamiltonian)
        assert energy == pytest.approx(float(np.linalg.eigvalsh(h.hamiltonian.to_matrix())[0]), abs=1e-10)
        assert expectation(state, h.hamiltonian) == pytest.approx(energy, abs=1e-10)


def test_run_circuit_bell_state() -> None:
    """run_circuit() should prepare a Bell pair from H and CNOT"""
    circuit = Circuit(2, (Gate(GateKind.H, (1,)), Gate(GateKind.CNOT, (1, 0))))
    state = run_circuit(circuit)
    assert np.allclose(state.amplitudes, [1 / math.sqrt(2), 0, 0, 1 / math.sqrt(2)])


def test_depolarizing_single_qubit() -> None:
    """apply_noise_channel() should mix a single qubit toward I/2"""
    p = 0.2
    state = apply_noise_channel(QuantumState.basis(1).to_density(), NoiseChannelSpec(p, 0.0), [0])
    assert np.allclose(state.density, np.diag([1 - p / 2, p / 2]))


def test_depolarizing_composes() -> None:
    """apply_noise_channel() twice should equal one channel of strength 2p - p^2"""
    p = 0.1
    channel = NoiseChannelSpec(p, 0.0)
    state = QuantumState.basis(1).to_density()
    twice = apply_noise_channel(apply_noise_channel(state, channel, [0]), channel, [0])
    once = apply_noise_channel(state, NoiseChannelSpec(2 * p - p * p, 0.0), [0])
    assert np.allclose(twice.density, once.density)


def test_depolarizing_two_qubit_keeps_spectator() -> None:
    """apply_noise_channel() on a pair should leave the reduced state of other qubits alone"""
    state = QuantumState.basis(3, "100").to_density()
    noisy = apply_noise_channel(state, NoiseChannelSpec(0.0, 1.0), [0, 1])
    probabilities = noisy.probabilities()
    assert probabilities[4:].sum() == pytest.approx(1.0)
    assert np.allclose(probabilities[4:], 0.25)
    assert np.trace(noisy.density).real == pytest.approx(1.0)


def test_noiseless_channel_keeps_pure_states() -> None:
    """run_circuit() should stay in statevector mode without noise"""
    circuit = Circuit(1, (Gate(GateKind.H, (0,)),))
    assert not run_circuit(circuit, noise=NoiseChannelSpec(0.0, 0.0)).mixed
    assert run_circuit(circuit, noise=NoiseChannelSpec(0.01, 0.0)).mixed


def test_fidelity() -> None:
    """QuantumState fidelity() should ignore global phase and handle mixed states"""
    rng = np.random.default_rng(4)
    vector = random_state(rng, 2)
    a = QuantumState.from_amplitudes(vector)
    b = QuantumState.from_amplitudes(1j * vector)
    assert a.fidelity(b) == pytest.approx(1.0)
    mixed_identity = QuantumState.from_density(np.eye(4) / 4)
    assert a.fidelity(b.to_density()) == pytest.approx(1.0)
    assert mixed_identity.fidelity(mixed_identity) == pytest.approx(1.0)
    assert a.fidelity(mixed_identity) == pytest.approx(0.5)


def test_sample_clique_is_deterministic(h9: LabeledHamiltonian) -> None:
    """sample_clique() should give identical counts for identical seeds and streams"""
    state = QuantumState.basis(5, "00000")
    clique = h9.cover.cliques[1]
    first = sample_clique(state, clique, 1000, seed=42, clique_index=1, stream=(1, 1, 0))
    second = sample_clique(state, clique, 1000, seed=42, clique_index=1, stream=(1, 1, 0))
    other = sample_clique(state, clique, 1000, seed=42, clique_index=1, stream=(1, 2, 0))
    assert first == second
    assert first.counts != other.counts
    assert first.shots == 1000
    assert first.basis_clique == 1


def test_estimate_energy_converges(h9: LabeledHamiltonian) -> None:
    """estimate_energy() should approach the exact energy with many shots"""
    energy, ground = exact_ground(h9.hamiltonian)
    records = [
        sample_clique(ground, clique, 200_000, seed=5, clique_index=index, stream=(index,))
        for index, clique in enumerate(h9.cover.cliques)
    ]
    assert estimate_energy(records, h9.cover) == pytest.approx(energy, abs=1e-2)
    with pytest.raises(MissingCliqueRecordError):
        estimate_energy(records[1:], h9.cover)


def test_sample_clique_applies_readout() -> None:
    """sample_clique() should sample from the distribution returned by the readout map"""
    clique = PauliSum.from_dict({"Z": 1.0})
    record = sample_clique(QuantumState.basis(1), clique, 100, seed=0, readout=lambda p: p[::-1].copy())
    assert record.counts == {1: 100}


def test_measurement_record_validation() -> None:
    """MeasurementRecord should reject counts that do not sum to the shot count"""
    with pytest.raises(InvalidMeasurementRecordError):
        MeasurementRecord({0: 3, 1: 3}, 5, 0, 1)
    with pytest.raises(InvalidMeasurementRecordError):
        MeasurementRecord({}, 0, 0, 1)
    record = MeasurementRecord({0: 3, 1: 1}, 4, 0, 1)
    assert np.allclose(record.distribution(), [0.75, 0.25])


def test_pauli_exponential_angles_add() -> None:
    """apply_pauli_exponential() twice on one word should equal a single rotation by the summed angle"""
    rng = np.random.default_rng(14)
    for _ in range(50):
        p = word(random_label(rng, 5))
        first, second = (float(v) for v in rng.uniform(-math.pi, math.pi, 2))
        state = QuantumState.from_amplitudes(random_state(rng, 5))
        twice = apply_pauli_exponential(apply_pauli_exponential(state, p, first), p, second)
        once = apply_pauli_exponential(state, p, first + second)
        assert np.allclose(twice.amplitudes, once.amplitudes, atol=1e-12), p.label


def test_apply_pauli_sum_matches_dense() -> None:
    """apply_pauli_sum() should equal the dense Hamiltonian times the statevector"""
    rng = np.random.default_rng(15)
    h = PauliSum.from_dict({"XZY": 0.4, "IIZ": -1.1, "YYI": 0.25})
    vector = random_state(rng, 3)
    expected = 0.4 * dense("XZY") @ vector - 1.1 * dense("IIZ") @ vector + 0.25 * dense("YYI") @ vector
    assert np.allclose(apply_pauli_sum(QuantumState.from_amplitudes(vector), h), expected)
    with pytest.raises(StateSizeError):
        apply_pauli_sum(QuantumState.basis(2), h)


def test_exact_ground_bounds_random_states(h9: LabeledHamiltonian) -> None:
    """exact_ground() should lie below the energy of every random state"""
    energy, _ = exact_ground(h9.hamiltonian)
    rng = np.random.default_rng(13)
    for _ in range(100):
        state = QuantumState.from_amplitudes(random_state(rng, 5))
        assert expectation(state, h9.hamiltonian) >= energy - 1e-10


def test_estimate_energy_error_scales_with_shots(h9: LabeledHamiltonian) -> None:
    """estimate_energy() should have an RMS error falling as one over the square root of the shots"""
    state = QuantumState.from_amplitudes(random_state(np.random.default_rng(12), 5))
    exact = expectation(state, h9.hamiltonian)
    shots = np.array([250, 1_000, 4_000, 16_000, 64_000])
    rms = []
    for n in shots:
        errors = [
            estimate_energy(
                [
                    sample_clique(state, clique, int(n), seed, clique_index=index, stream=(index,))
                    for index, clique in enumerate(h9.cover.cliques)
                ],
                h9.cover,
            )
            - exact
            for seed in range(100)
        ]
        rms.append(math.sqrt(float(np.mean(np.square(errors)))))
    slope = np.polyfit(np.log(shots), np.log(rms), 1)[0]
    assert -0.6 <= slope <= -0.4
