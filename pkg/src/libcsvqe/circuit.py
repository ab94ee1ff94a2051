"""Gate-level circuits in the native gate set and the passes that rewrite them"""

import logging
import math
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace

import networkx as nx

from .const import DEFAULT_GATE_DURATIONS
from .pauli import PauliString
from .types import GateKind

_LOGGER = logging.getLogger(__name__)

_SLOT_RE = re.compile(r"^(?:(?P<scale>[+-]?[0-9.eE+-]+)\*)?(?P<slot>[A-Za-z_]\w*)$")
_ANGLE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Gate:
    """One gate; rotation angles are either fixed or scale * theta[slot]"""

    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None
    slot: str | None = None
    scale: float = 1.0

    @property
    def is_parametric(self) -> bool:
        return self.slot is not None

    def resolved_angle(self, parameters: Mapping[str, float]) -> float | None:
        """Numeric rotation angle, None for gates without one"""
        if self.slot is not None:
            return self.scale * parameters[self.slot]
        return self.angle

    def to_text(self) -> str:
        operands = " ".join(str(qubit) for qubit in self.qubits)
        if self.slot is not None:
            argument = self.slot if self.scale == 1.0 else f"{self.scale!r}*{self.slot}"
            return f"{self.kind.value} {operands} {argument}"
        if self.angle is not None:
            return f"{self.kind.value} {operands} {self.angle!r}"
        return f"{self.kind.value} {operands}"


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over n qubits with named parameter slots"""

    n_qubits: int
    gates: tuple[Gate, ...] = ()
    parameter_slots: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        referenced: set[str] = set()
        for gate in self.gates:
            if len(gate.qubits) != gate.kind.n_qubits:
                raise InvalidCircuitError(f"{gate.kind.value} needs {gate.kind.n_qubits} operands, got {gate.qubits}")
            if any(not 0 <= qubit < self.n_qubits for qubit in gate.qubits):
                raise InvalidCircuitError(f"{gate.to_text()} addresses a qubit outside 0..{self.n_qubits - 1}")
            if len(set(gate.qubits)) != len(gate.qubits):
                raise InvalidCircuitError(f"{gate.to_text()} repeats an operand")
            needs_angle = gate.kind in (GateKind.RZ, GateKind.CP)
            if needs_angle and gate.angle is None and gate.slot is None:
                raise InvalidCircuitError(f"{gate.kind.value} on {gate.qubits} has no angle")
            if not needs_angle and (gate.angle is not None or gate.slot is not None):
                raise InvalidCircuitError(f"{gate.kind.value} does not take an angle")
            if gate.slot is not None:
                if gate.slot not in self.parameter_slots:
                    raise InvalidCircuitError(f"slot {gate.slot} is not declared")
                referenced.add(gate.slot)
        unused = [slot for slot in self.parameter_slots if slot not in referenced]
        if unused:
            raise InvalidCircuitError(f"slots never referenced: {', '.join(unused)}")
        if len(set(self.parameter_slots)) != len(self.parameter_slots):
            raise InvalidCircuitError("duplicate parameter slot")

    def cnot_count(self) -> int:
        return sum(1 for gate in self.gates if gate.kind is GateKind.CNOT)

    def two_qubit_count(self) -> int:
        return sum(1 for gate in self.gates if gate.kind.n_qubits == 2)

    def single_qubit_count(self) -> int:
        return sum(1 for gate in self.gates if gate.kind.n_qubits == 1)

    def parameter_map(self, theta: Sequence[float] | Mapping[str, float]) -> dict[str, float]:
        """Map slot names to values, accepting a vector in slot order"""
        if isinstance(theta, Mapping):
            missing = [slot for slot in self.parameter_slots if slot not in theta]
            if missing:
                raise InvalidCircuitError(f"missing values for {', '.join(missing)}")
            return {slot: float(theta[slot]) for slot in self.parameter_slots}
        if len(theta) != len(self.parameter_slots):
            raise InvalidCircuitError(f"expected {len(self.parameter_slots)} parameters, got {len(theta)}")
        return {slot: float(value) for slot, value in zip(self.parameter_slots, theta)}

    def bind(self, theta: Sequence[float] | Mapping[str, float]) -> "Circuit":
        """Replace every slot by its numeric angle"""
        values = self.parameter_map(theta)
        gates = tuple(
            replace(gate, angle=gate.resolved_angle(values), slot=None, scale=1.0) if gate.is_parametric else gate
            for gate in self.gates
        )
        return Circuit(self.n_qubits, gates)

    def then(self, other: "Circuit") -> "Circuit":
        """Concatenate two circuits on the same register"""
        if other.n_qubits != self.n_qubits:
            raise InvalidCircuitError(f"cannot append a {other.n_qubits}-qubit circuit to {self.n_qubits} qubits")
        slots = self.parameter_slots + tuple(s for s in other.parameter_slots if s not in self.parameter_slots)
        return Circuit(self.n_qubits, self.gates + other.gates, slots)

    def to_text(self) -> str:
        lines = [f"# n_qubits: {self.n_qubits}"]
        if self.parameter_slots:
            lines.append(f"# parameters: {' '.join(self.parameter_slots)}")
        lines.extend(gate.to_text() for gate in self.gates)
        return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> Circuit:
    """Parse the line-oriented circuit format"""
    n_qubits: int | None = None
    declared: list[str] | None = None
    gates: list[Gate] = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            if key.strip() == "n_qubits":
                try:
                    n_qubits = int(value)
                except ValueError as err:
                    raise CircuitFormatError(f"line {line_number}: invalid qubit count") from err
            elif key.strip() == "parameters":
                declared = value.split()
            continue
        gates.append(_parse_gate(line_number, line))
    if n_qubits is None:
        n_qubits = max((max(gate.qubits) for gate in gates), default=-1) + 1
    if declared is None:
        declared = []
        for gate in gates:
            if gate.slot is not None and gate.slot not in declared:
                declared.append(gate.slot)
    try:
        return Circuit(n_qubits, tuple(gates), tuple(declared))
    except InvalidCircuitError as err:
        raise CircuitFormatError(str(err)) from err


def _parse_gate(line_number: int, line: str) -> Gate:
    name, *args = line.split()
    try:
        kind = GateKind(name.upper())
    except ValueError as err:
        raise CircuitFormatError(f"line {line_number}: unknown gate {name!r}") from err
    has_angle = kind in (GateKind.RZ, GateKind.CP)
    expected = kind.n_qubits + (1 if has_angle else 0)
    if len(args) != expected:
        raise CircuitFormatError(f"line {line_number}: {kind.value} expects {expected} arguments")
    try:
        qubits = tuple(int(arg) for arg in args[: kind.n_qubits])
    except ValueError as err:
        raise CircuitFormatError(f"line {line_number}: qubit operands must be integers") from err
    if not has_angle:
        return Gate(kind, qubits)
    argument = args[-1]
    try:
        return Gate(kind, qubits, angle=float(argument))
    except ValueError:
        pass
    match = _SLOT_RE.match(argument)
    if match is None:
        raise CircuitFormatError(f"line {line_number}: cannot read angle {argument!r}")
    try:
        scale = float(match["scale"]) if match["scale"] else 1.0
    except ValueError as err:
        raise CircuitFormatError(f"line {line_number}: cannot read angle {argument!r}") from err
    return Gate(kind, qubits, slot=match["slot"], scale=scale)


def _basis_in(letter: str, qubit: int) -> list[Gate]:
    if letter == "X":
        return [Gate(GateKind.H, (qubit,))]
    if letter == "Y":
        return [Gate(GateKind.RZ, (qubit,), angle=-math.pi / 2), Gate(GateKind.H, (qubit,))]
    return []


def _basis_out(letter: str, qubit: int) -> list[Gate]:
    if letter == "X":
        return [Gate(GateKind.H, (qubit,))]
    if letter == "Y":
        return [Gate(GateKind.H, (qubit,)), Gate(GateKind.RZ, (qubit,), angle=math.pi / 2)]
    return []


def compile_exponential(p: PauliString, slot: str) -> Circuit:
    """Circuit for exp(i * theta * P): basis change, CNOT ladder onto the highest qubit, RZ(-2 theta)"""
    if p.is_identity:
        raise IdentityExponentialError("the identity only contributes a global phase")
    support = p.support
    pivot = support[-1]
    gates: list[Gate] = []
    for qubit in support:
        gates.extend(_basis_in(p.letter(qubit), qubit))
    ladder = [Gate(GateKind.CNOT, (a, b)) for a, b in zip(support, support[1:])]
    gates.extend(ladder)
    gates.append(Gate(GateKind.RZ, (pivot,), slot=slot, scale=-2.0))
    gates.extend(reversed(ladder))
    for qubit in support:
        gates.extend(_basis_out(p.letter(qubit), qubit))
    return Circuit(p.n_qubits, tuple(gates), (slot,))


def slot_name(index: int) -> str:
    return f"theta{index}"


def compile_ansatz(reference: str, generators: Sequence[PauliString]) -> Circuit:
    """Reference preparation followed by one exponential per generator, applied in order"""
    n_qubits = len(reference)
    if any(bit not in "01" for bit in reference):
        raise InvalidCircuitError(f"reference must be a bit string, got {reference!r}")
    circuit = Circuit(
        n_qubits,
        tuple(Gate(GateKind.X, (qubit,)) for qubit, bit in enumerate(reversed(reference)) if bit == "1"),
    )
    for index, generator in enumerate(generators):
        if generator.n_qubits != n_qubits:
            raise InvalidCircuitError(f"{generator.label} does not act on {n_qubits} qubits")
        circuit = circuit.then(compile_exponential(generator, slot_name(index)))
    return circuit


@dataclass(frozen=True)
class CouplingGraph:
    """Undirected weighted graph of two-qubit interactions"""

    nodes: tuple[int, ...]
    weights: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        normalized: dict[tuple[int, int], int] = {}
        node_set = set(self.nodes)
        for (u, v), weight in self.weights.items():
            if u == v:
                raise InvalidCircuitError(f"self-loop on node {u}")
            if u not in node_set or v not in node_set:
                raise InvalidCircuitError(f"edge ({u}, {v}) leaves the node set")
            if weight < 0:
                raise InvalidCircuitError(f"negative weight on ({u}, {v})")
            key = (min(u, v), max(u, v))
            normalized[key] = normalized.get(key, 0) + weight
        object.__setattr__(self, "nodes", tuple(sorted(node_set)))
        object.__setattr__(self, "weights", normalized)

    @classmethod
    def from_edges(cls, nodes: Iterable[int], edges: Iterable[tuple[int, int]]) -> "CouplingGraph":
        """Unit-weight graph"""
        return cls(tuple(nodes), {(u, v): 1 for u, v in edges})

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(self.weights)

    @property
    def total_weight(self) -> int:
        """W, the summed edge weight"""
        return sum(self.weights.values())

    def node_weight(self, node: int) -> int:
        """Summed weight of the edges incident to a node"""
        return sum(weight for (u, v), weight in self.weights.items() if node in (u, v))

    def without(self, removed: Iterable[int]) -> "CouplingGraph":
        """Graph with the given nodes and their edges deleted"""
        gone = set(removed)
        return CouplingGraph(
            tuple(node for node in self.nodes if node not in gone),
            {edge: weight for edge, weight in self.weights.items() if gone.isdisjoint(edge)},
        )

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from((u, v, {"weight": weight}) for (u, v), weight in self.weights.items())
        return graph


def coupling_graph(c: Circuit) -> CouplingGraph:
    """One node per register qubit, edge weights count two-qubit gates per pair"""
    weights: dict[tuple[int, int], int] = {}
    for gate in c.gates:
        if gate.kind.n_qubits == 2:
            u, v = sorted(gate.qubits)
            weights[(u, v)] = weights.get((u, v), 0) + 1
    return CouplingGraph(tuple(range(c.n_qubits)), weights)


@dataclass(frozen=True)
class ScheduledGate:
    start: float
    end: float
    gate: Gate


@dataclass(frozen=True)
class Schedule:
    """ASAP timing of a circuit"""

    events: tuple[ScheduledGate, ...]
    duration: float

    def idle_windows(self, n_qubits: int) -> dict[int, list[tuple[float, float]]]:
        """Per qubit, gaps after its first gate where it waits, trailing gap included"""
        busy: dict[int, list[tuple[float, float]]] = {qubit: [] for qubit in range(n_qubits)}
        for event in self.events:
            for qubit in event.gate.qubits:
                busy[qubit].append((event.start, event.end))
        windows: dict[int, list[tuple[float, float]]] = {}
        for qubit, intervals in busy.items():
            gaps: list[tuple[float, float]] = []
            for (_, previous_end), (next_start, _) in zip(intervals, intervals[1:]):
                if next_start > previous_end:
                    gaps.append((previous_end, next_start))
            if intervals and self.duration > intervals[-1][1]:
                gaps.append((intervals[-1][1], self.duration))
            windows[qubit] = gaps
        return windows


def schedule(c: Circuit, durations: Mapping[GateKind, float] | None = None) -> Schedule:
    """Start every gate as soon as all of its operands are free"""
    table = dict(DEFAULT_GATE_DURATIONS) | dict(durations or {})
    if any(value <= 0 for value in table.values()):
        raise InvalidCircuitError("gate durations must be positive")
    available = [0.0] * c.n_qubits
    events: list[ScheduledGate] = []
    for gate in c.gates:
        start = max(available[qubit] for qubit in gate.qubits)
        end = start + table[gate.kind]
        for qubit in gate.qubits:
            available[qubit] = end
        events.append(ScheduledGate(start, end, gate))
    return Schedule(tuple(events), max(available, default=0.0))


def insert_dd(
    c: Circuit,
    durations: Mapping[GateKind, float] | None = None,
    pulses: int = 2,
) -> Circuit:
    """Fill idle windows of at least two X durations with an even, uniformly spaced X train"""
    if pulses < 2 or pulses % 2:
        raise InvalidCircuitError(f"pulse count must be a positive even number, got {pulses}")
    timing = schedule(c, durations)
    x_length = (dict(DEFAULT_GATE_DURATIONS) | dict(durations or {}))[GateKind.X]
    timed: list[tuple[float, int, Gate]] = [
        (event.start, order, event.gate) for order, event in enumerate(timing.events)
    ]
    inserted = 0
    for qubit, windows in timing.idle_windows(c.n_qubits).items():
        for start, end in windows:
            length = end - start
            if length < 2 * x_length:
                continue
            count = min(pulses, int(length // x_length) // 2 * 2)
            spacing = (length - count * x_length) / count
            for index in range(count):
                pulse_start = start + spacing / 2 + index * (spacing + x_length)
                timed.append((pulse_start, len(timed), Gate(GateKind.X, (qubit,))))
                inserted += 1
    _LOGGER.debug("Inserted %d DD pulses", inserted)
    timed.sort(key=lambda item: (item[0], item[1]))
    return Circuit(c.n_qubits, tuple(gate for _, _, gate in timed), c.parameter_slots)


def amplify_noise(c: Circuit, lam: int) -> Circuit:
    """Replace every CNOT by H . CPhase(pi/lam)^lam . H on the target, in native gates"""
    if lam < 1:
        raise InvalidAmplificationError(f"amplification factor must be at least 1, got {lam}")
    phi = math.pi / lam
    gates: list[Gate] = []
    for gate in c.gates:
        if gate.kind is not GateKind.CNOT:
            gates.append(gate)
            continue
        control, target = gate.qubits
        gates.append(Gate(GateKind.H, (target,)))
        for _ in range(lam):
            gates.extend(
                (
                    Gate(GateKind.RZ, (control,), angle=phi / 2),
                    Gate(GateKind.CNOT, (control, target)),
                    Gate(GateKind.RZ, (target,), angle=-phi / 2),
                    Gate(GateKind.CNOT, (control, target)),
                    Gate(GateKind.RZ, (target,), angle=phi / 2),
                )
            )
        gates.append(Gate(GateKind.H, (target,)))
    return Circuit(c.n_qubits, tuple(gates), c.parameter_slots)


def _is_self_inverse(kind: GateKind) -> bool:
    return kind in (GateKind.H, GateKind.X, GateKind.CNOT)


def _trivial_angle(angle: float) -> bool:
    # RZ(2 pi) is -I, a global phase
    remainder = math.fmod(angle, 2 * math.pi)
    return min(abs(remainder), 2 * math.pi - abs(remainder)) < _ANGLE_TOLERANCE


def cancel_inverse_gates(c: Circuit) -> Circuit:
    """Drop adjacent self-inverse pairs and merge adjacent fixed RZ rotations until nothing changes"""
    current = list(c.gates)
    while True:
        result: list[Gate] = []
        for gate in current:
            previous_index = next(
                (j for j in range(len(result) - 1, -1, -1) if set(result[j].qubits) & set(gate.qubits)),
                None,
            )
            if previous_index is not None:
                previous = result[previous_index]
                if previous.qubits == gate.qubits and previous.kind is gate.kind:
                    if _is_self_inverse(gate.kind):
                        del result[previous_index]
                        continue
                    if gate.kind is GateKind.RZ and gate.angle is not None and previous.angle is not None:
                        merged = previous.angle + gate.angle
                        if _trivial_angle(merged):
                            del result[previous_index]
                        else:
                            result[previous_index] = replace(previous, angle=merged)
                        continue
            if gate.kind is GateKind.RZ and not gate.is_parametric and gate.angle is not None:
                if _trivial_angle(gate.angle):
                    continue
            result.append(gate)
        if len(result) == len(current):
            break
        current = result
    return Circuit(c.n_qubits, tuple(result), c.parameter_slots)


class IdentityExponentialError(ValueError):
    """Error to indicate an exponential of the identity was requested"""


class CircuitFormatError(ValueError):
    """Error to indicate the circuit text cannot be parsed"""


class InvalidCircuitError(ValueError):
    """Error to indicate a circuit violates its structural invariants"""


class InvalidAmplificationError(ValueError):
    """Error to indicate a noise amplification factor below one"""
