import math
from itertools import product

import numpy as np
import pytest
from conftest import dense, random_state, word
from scipy import linalg

from libcsvqe.circuit import (
    Circuit,
    CircuitFormatError,
    Gate,
    IdentityExponentialError,
    InvalidAmplificationError,
    InvalidCircuitError,
    amplify_noise,
    cancel_inverse_gates,
    compile_ansatz,
    compile_exponential,
    coupling_graph,
    insert_dd,
    parse_circuit,
    schedule,
)
from libcsvqe.simulator import QuantumState, run_circuit
from libcsvqe.types import GateKind


def _evolve(circuit: Circuit, vector: np.ndarray, theta: list[float] | None = None) -> np.ndarray:
    return run_circuit(circuit, theta or [], QuantumState.from_amplitudes(vector)).amplitudes


def test_compile_exponential_matches_expm() -> None:
    """compile_exponential() should implement exp(i theta P) exactly for every 2-qubit word"""
    rng = np.random.default_rng(0)
    labels = ["".join(letters) for letters in product("IXYZ", repeat=2) if "".join(letters) != "II"]
    for label in labels + ["XYZ", "YIY", "ZXY", "YYX"]:
        theta = float(rng.uniform(-math.pi, math.pi))
        vector = random_state(rng, len(label))
        circuit = compile_exponential(word(label), "theta0")
        expected = linalg.expm(1j * theta * dense(label)) @ vector
        assert np.allclose(_evolve(circuit, vector, [theta]), expected), label


def test_compile_exponential_structure() -> None:
    """compile_exponential() should use a CNOT ladder of length weight - 1, mirrored"""
    circuit = compile_exponential(word("XIYZ"), "t")
    assert circuit.cnot_count() == 4
    assert circuit.parameter_slots == ("t",)
    rotations = [gate for gate in circuit.gates if gate.is_parametric]
    assert len(rotations) == 1
    assert rotations[0].qubits == (3,)
    assert rotations[0].scale == -2.0
    with pytest.raises(IdentityExponentialError):
        compile_exponential(word("II"), "t")


def test_compile_ansatz_prepares_reference() -> None:
    """compile_ansatz() should flip the occupied qubits before the exponentials"""
    circuit = compile_ansatz("10010", [])
    state = run_circuit(circuit)
    assert state.amplitudes[0b10010] == 1.0
    ansatz = compile_ansatz("11000", [word("IIIXY"), word("YXIII")])
    assert ansatz.parameter_slots == ("theta0", "theta1")


def test_coupling_graph_weights() -> None:
    """coupling_graph() should count two-qubit gates per qubit pair"""
    ansatz = compile_ansatz("000", [word("XIY"), word("IYX")])
    graph = coupling_graph(ansatz)
    assert graph.nodes == (0, 1, 2)
    assert graph.weights == {(0, 2): 2, (0, 1): 2}
    assert graph.total_weight == 4
    assert graph.node_weight(0) == 4
    assert graph.without([0]).weights == {}


def test_text_format_parses_back() -> None:
    """Circuit to_text() should parse back to an equal circuit"""
    ansatz = compile_ansatz("11000", [word("IIIXY"), word("YIIYY")])
    assert parse_circuit(ansatz.to_text()) == ansatz
    bound = ansatz.bind([0.125, -0.5])
    assert parse_circuit(bound.to_text()) == bound
    assert not bound.parameter_slots


def test_parse_circuit_errors() -> None:
    """parse_circuit() should reject unknown gates, bad arity and undeclared slots"""
    with pytest.raises(CircuitFormatError):
        parse_circuit("# n_qubits: 2\nTOFFOLI 0 1\n")
    with pytest.raises(CircuitFormatError):
        parse_circuit("# n_qubits: 2\nCNOT 0\n")
    with pytest.raises(CircuitFormatError):
        parse_circuit("# n_qubits: 2\n# parameters: a\nRZ 0 b\n")
    with pytest.raises(CircuitFormatError):
        parse_circuit("# n_qubits: 1\nCNOT 0 1\n")


def test_circuit_validation() -> None:
    """Circuit should reject angles on fixed gates and repeated operands"""
    with pytest.raises(InvalidCircuitError):
        Circuit(1, (Gate(GateKind.H, (0,), angle=1.0),))
    with pytest.raises(InvalidCircuitError):
        Circuit(2, (Gate(GateKind.CNOT, (1, 1)),))
    with pytest.raises(InvalidCircuitError):
        Circuit(1, (Gate(GateKind.RZ, (0,)),))


def test_amplify_noise_counts() -> None:
    """amplify_noise() should turn every CNOT into 2 lambda CNOTs"""
    cnot = Circuit(2, (Gate(GateKind.CNOT, (1, 0)),))
    for lam in (1, 2, 3, 5):
        amplified = amplify_noise(cnot, lam)
        assert amplified.cnot_count() == 2 * lam
        assert amplified.single_qubit_count() == 3 * lam + 2
    with pytest.raises(InvalidAmplificationError):
        amplify_noise(cnot, 0)


def test_amplify_noise_preserves_unitary() -> None:
    """amplify_noise() should leave the noiseless action unchanged up to a global phase"""
    rng = np.random.default_rng(8)
    ansatz = compile_ansatz("10000", [word("IIIXY"), word("YIIYY"), word("XYIII")])
    theta = [0.3, -0.7, 1.1]
    vector = random_state(rng, 5)
    reference = QuantumState.from_amplitudes(_evolve(ansatz, vector, theta))
    for lam in (1, 2, 3):
        amplified = QuantumState.from_amplitudes(_evolve(amplify_noise(ansatz, lam), vector, theta))
        assert reference.fidelity(amplified) == pytest.approx(1.0, abs=1e-9)


def test_schedule_is_asap() -> None:
    """schedule() should start gates as soon as their operands are free"""
    circuit = Circuit(
        3, (Gate(GateKind.H, (0,)), Gate(GateKind.CNOT, (1, 2)), Gate(GateKind.CNOT, (0, 1)))
    )
    timing = schedule(circuit)
    assert [(event.start, event.end) for event in timing.events] == [(0.0, 1.0), (0.0, 2.0), (2.0, 4.0)]
    assert timing.duration == 4.0
    windows = timing.idle_windows(3)
    assert windows[0] == [(1.0, 2.0)]
    assert windows[2] == [(2.0, 4.0)]


def test_insert_dd_fills_long_windows() -> None:
    """insert_dd() should place an X pair in a window of three X lengths and keep the unitary"""
    circuit = Circuit(
        3, (Gate(GateKind.H, (0,)), Gate(GateKind.CNOT, (1, 2)), Gate(GateKind.CNOT, (1, 2)))
    )
    decoupled = insert_dd(circuit)
    pulses = [gate for gate in decoupled.gates if gate.kind is GateKind.X]
    assert [gate.qubits for gate in pulses] == [(0,), (0,)]
    rng = np.random.default_rng(9)
    vector = random_state(rng, 3)
    assert np.allclose(_evolve(decoupled, vector), _evolve(circuit, vector))


def test_insert_dd_skips_short_windows() -> None:
    """insert_dd() should leave windows shorter than two X lengths and leading gaps alone"""
    circuit = Circuit(3, (Gate(GateKind.H, (0,)), Gate(GateKind.CNOT, (1, 2))))
    assert insert_dd(circuit) == circuit
    late = Circuit(
        2,
        (Gate(GateKind.H, (0,)), Gate(GateKind.H, (0,)), Gate(GateKind.H, (0,)), Gate(GateKind.CNOT, (0, 1))),
    )
    assert insert_dd(late) == late


def test_cancel_inverse_gates() -> None:
    """cancel_inverse_gates() should drop self-inverse pairs and merge fixed rotations"""
    circuit = Circuit(
        2,
        (
            Gate(GateKind.H, (0,)),
            Gate(GateKind.H, (0,)),
            Gate(GateKind.RZ, (1,), angle=0.25),
            Gate(GateKind.RZ, (1,), angle=0.5),
            Gate(GateKind.CNOT, (0, 1)),
            Gate(GateKind.X, (0,)),
            Gate(GateKind.X, (0,)),
            Gate(GateKind.CNOT, (0, 1)),
        ),
    )
    simplified = cancel_inverse_gates(circuit)
    assert simplified.gates == (Gate(GateKind.RZ, (1,), angle=0.75),)


def test_cancel_inverse_gates_keeps_unitary() -> None:
    """cancel_inverse_gates() should not change a compiled ansatz's action"""
    rng = np.random.default_rng(10)
    ansatz = compile_ansatz("11000", [word("IIIXY"), word("IIIYX"), word("YXIII")]).bind([0.2, 0.4, -0.3])
    simplified = cancel_inverse_gates(ansatz)
    assert len(simplified.gates) <= len(ansatz.gates)
    vector = random_state(rng, 5)
    before = QuantumState.from_amplitudes(_evolve(ansatz, vector))
    after = QuantumState.from_amplitudes(_evolve(simplified, vector))
    assert before.fidelity(after) == pytest.approx(1.0, abs=1e-9)
