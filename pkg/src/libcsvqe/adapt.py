"""The qubit-ADAPT-VQE loop: pool, scores, ansatz growth and parameter re-optimization"""

import json
import logging
import math
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np
import numpy.typing as npt
from scipy import optimize

from .circuit import Circuit, compile_ansatz
from .const import (
    DEFAULT_DELTA_C,
    DEFAULT_DELTA_F,
    DEFAULT_GRADIENT_TOLERANCE,
    DEFAULT_N_MAX,
    DEFAULT_OPTIMIZER_MAX_ITERATIONS,
)
from .hamiltonian_io import LabeledHamiltonian
from .pauli import PauliString, PauliSum, commutator
from .simulator import QuantumState, apply_pauli, apply_pauli_sum, expectation
from .topology import BiasSettings, HardwareTopology, IsomorphismBias
from .types import AdaptIterationRecord, GradientMethod, PoolProvenance, Termination

_LOGGER = logging.getLogger(__name__)

_TIE_TOLERANCE = 1e-12
_SHIFT = math.pi / 4
_SWEEP_GAIN = 1e-10

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]


@dataclass(frozen=True)
class OperatorPool:
    """Candidate generators, each with an odd number of Y letters"""

    operators: tuple[PauliString, ...]
    provenance: PoolProvenance = PoolProvenance.SINGLES_DOUBLES

    def __post_init__(self) -> None:
        if not self.operators:
            raise InvalidPoolError("the operator pool is empty")
        n_qubits = self.operators[0].n_qubits
        seen: set[str] = set()
        for operator in self.operators:
            if operator.n_qubits != n_qubits:
                raise InvalidPoolError(f"{operator.label} does not act on {n_qubits} qubits")
            if operator.phase:
                raise InvalidPoolError(f"{operator} carries a phase")
            if operator.y_count % 2 == 0:
                raise InvalidPoolError(f"{operator.label} has an even number of Y letters")
            if operator.label in seen:
                raise InvalidPoolError(f"{operator.label} appears twice")
            seen.add(operator.label)

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "OperatorPool":
        return cls(tuple(PauliString.from_label(label) for label in labels), PoolProvenance.CUSTOM)

    @property
    def n_qubits(self) -> int:
        return self.operators[0].n_qubits

    def __len__(self) -> int:
        return len(self.operators)

    def __iter__(self) -> Iterator[PauliString]:
        return iter(self.operators)


def _word(n_qubits: int, letters: dict[int, str]) -> PauliString:
    return PauliString.from_label("".join(letters.get(qubit, "I") for qubit in reversed(range(n_qubits))))


def build_pool(n_qubits: int, reference_occupation: str | None = None) -> OperatorPool:
    """Odd-Y words from one- and two-body excitation generators, ordered by weight then label"""
    if n_qubits < 1:
        raise InvalidPoolError(f"a pool needs at least one qubit, got {n_qubits}")
    if reference_occupation is not None and len(reference_occupation) != n_qubits:
        raise InvalidPoolError(f"reference {reference_occupation!r} does not have {n_qubits} qubits")
    words: list[PauliString] = []
    for size, alphabet in ((1, "XYZ"), (2, "XYZ"), (3, "XY"), (4, "XY")):
        for support in combinations(range(n_qubits), size):
            for letters in product(alphabet, repeat=size):
                if letters.count("Y") % 2:
                    words.append(_word(n_qubits, dict(zip(support, letters))))
    words.sort(key=lambda word: (word.weight, word.label))
    return OperatorPool(tuple(words))


@dataclass(frozen=True)
class OptimizerSettings:
    """Inner VQE optimizer knobs"""

    gradient: GradientMethod = GradientMethod.ADJOINT
    gradient_tolerance: float = DEFAULT_GRADIENT_TOLERANCE
    max_iterations: int = DEFAULT_OPTIMIZER_MAX_ITERATIONS

    def __post_init__(self) -> None:
        if not self.gradient_tolerance > 0:
            raise InvalidAdaptConfigError(f"gradient tolerance must be positive, got {self.gradient_tolerance}")
        if self.max_iterations < 1:
            raise InvalidAdaptConfigError(f"optimizer iteration cap must be positive, got {self.max_iterations}")


@dataclass(frozen=True)
class AdaptConfig:
    """Inputs of an ADAPT run, hardware=None selects the standard unbiased score"""

    delta_f: float = DEFAULT_DELTA_F
    delta_c: float = DEFAULT_DELTA_C
    n_max: int = DEFAULT_N_MAX
    bias: BiasSettings = field(default_factory=BiasSettings)
    hardware: HardwareTopology | None = None
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    pool: OperatorPool | None = None

    def __post_init__(self) -> None:
        if not self.delta_f > 0:
            raise InvalidAdaptConfigError(f"score tolerance must be positive, got {self.delta_f}")
        if not self.delta_c > 0:
            raise InvalidAdaptConfigError(f"energy tolerance must be positive, got {self.delta_c}")
        if self.n_max < 0:
            raise InvalidAdaptConfigError(f"iteration cap must be nonnegative, got {self.n_max}")


def _reference_state(reference: QuantumState | str, n_qubits: int) -> QuantumState:
    state = QuantumState.basis(n_qubits, reference) if isinstance(reference, str) else reference
    if state.n_qubits != n_qubits:
        raise InvalidAdaptConfigError(f"reference has {state.n_qubits} qubits, the Hamiltonian {n_qubits}")
    if state.mixed:
        raise InvalidAdaptConfigError("the reference must be a pure state")
    return state


def _rotate(vector: ComplexArray, p: PauliString, theta: float) -> ComplexArray:
    result: ComplexArray = math.cos(theta) * vector + 1j * math.sin(theta) * apply_pauli(vector, p)
    return result


def _prepare(generators: Sequence[PauliString], theta: Iterable[float], vector: ComplexArray) -> ComplexArray:
    for p, angle in zip(generators, theta):
        vector = _rotate(vector, p, float(angle))
    return vector


def ansatz_state(
    generators: Sequence[PauliString], theta: Sequence[float], reference: QuantumState | str
) -> QuantumState:
    """prod_n exp(i theta_n P_n)|reference>, the first generator applied first"""
    if len(generators) != len(theta):
        raise InvalidAdaptConfigError(f"{len(generators)} generators but {len(theta)} parameters")
    if generators:
        n_qubits = generators[0].n_qubits
    else:
        n_qubits = len(reference) if isinstance(reference, str) else reference.n_qubits
    start = _reference_state(reference, n_qubits)
    return QuantumState(n_qubits, _prepare(generators, theta, start.amplitudes), False)


def _energy(matrix: ComplexArray, vector: ComplexArray) -> float:
    return float(np.vdot(vector, matrix @ vector).real)


def _adjoint_gradient(
    generators: Sequence[PauliString], theta: FloatArray, matrix: ComplexArray, start: ComplexArray
) -> tuple[float, FloatArray]:
    state = _prepare(generators, theta, start)
    costate = matrix @ state
    energy = float(np.vdot(state, costate).real)
    gradient = np.zeros(len(generators))
    for k in reversed(range(len(generators))):
        p = generators[k]
        gradient[k] = 2.0 * float(np.vdot(costate, 1j * apply_pauli(state, p)).real)
        state = _rotate(state, p, -float(theta[k]))
        costate = _rotate(costate, p, -float(theta[k]))
    return energy, gradient


def _shift_gradient(
    generators: Sequence[PauliString], theta: FloatArray, matrix: ComplexArray, start: ComplexArray
) -> tuple[float, FloatArray]:
    energy = _energy(matrix, _prepare(generators, theta, start))
    gradient = np.zeros(len(generators))
    for k in range(len(generators)):
        forward, backward = theta.copy(), theta.copy()
        forward[k] += _SHIFT
        backward[k] -= _SHIFT
        gradient[k] = _energy(matrix, _prepare(generators, forward, start)) - _energy(
            matrix, _prepare(generators, backward, start)
        )
    return energy, gradient


def _coordinate_sweep(
    generators: Sequence[PauliString], theta: FloatArray, matrix: ComplexArray, start: ComplexArray
) -> FloatArray:
    """Move each parameter to the exact minimum of its sinusoid, leaving stationary saddles and maxima"""
    theta = theta.copy()
    for k in range(len(generators)):
        trial = theta.copy()
        here = _energy(matrix, _prepare(generators, trial, start))
        trial[k] = theta[k] + _SHIFT
        plus = _energy(matrix, _prepare(generators, trial, start))
        trial[k] = theta[k] - _SHIFT
        minus = _energy(matrix, _prepare(generators, trial, start))
        # E(theta_k + d) = a + b cos 2d + c sin 2d
        a = (plus + minus) / 2
        b, c = here - a, (plus - minus) / 2
        if a - math.hypot(b, c) < here - _SWEEP_GAIN:
            theta[k] += math.atan2(-c, -b) / 2
    return theta


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of one inner VQE optimization; converged=False is the non-convergence warning flag"""

    theta: tuple[float, ...]
    energy: float
    converged: bool
    iterations: int


def energy_and_gradient(
    generators: Sequence[PauliString],
    h: PauliSum,
    theta: Sequence[float],
    reference: QuantumState | str,
    method: GradientMethod = GradientMethod.ADJOINT,
) -> tuple[float, FloatArray]:
    """E(theta) and dE/dtheta for the ansatz built from the generators"""
    start = _reference_state(reference, h.n_qubits).amplitudes
    if any(p.n_qubits != h.n_qubits for p in generators):
        raise InvalidAdaptConfigError(f"every generator must act on {h.n_qubits} qubits")
    evaluate = _adjoint_gradient if method is GradientMethod.ADJOINT else _shift_gradient
    return evaluate(generators, np.asarray(theta, dtype=float), h.to_matrix(), start)


def optimize_parameters(
    generators: Sequence[PauliString],
    h: PauliSum,
    initial_theta: Sequence[float],
    reference: QuantumState | str,
    settings: OptimizerSettings | None = None,
) -> OptimizationResult:
    """BFGS with analytic gradients; never returns an energy above the starting one"""
    settings = settings or OptimizerSettings()
    x0 = np.asarray(initial_theta, dtype=float)
    if x0.shape != (len(generators),):
        raise InvalidAdaptConfigError(f"{len(generators)} generators but {x0.size} parameters")
    if not np.all(np.isfinite(x0)):
        raise NonFiniteEnergyError("initial parameters must be finite")
    start = _reference_state(reference, h.n_qubits).amplitudes
    matrix = h.to_matrix()
    evaluate = _adjoint_gradient if settings.gradient is GradientMethod.ADJOINT else _shift_gradient

    def objective(theta: FloatArray) -> tuple[float, FloatArray]:
        return evaluate(generators, theta, matrix, start)

    initial_energy, initial_gradient = objective(x0)
    if not math.isfinite(initial_energy):
        raise NonFiniteEnergyError(f"energy at the initial parameters is {initial_energy}")
    if not generators:
        return OptimizationResult((), initial_energy, True, 0)
    start_theta = x0
    if float(np.max(np.abs(initial_gradient))) < settings.gradient_tolerance:
        start_theta = _coordinate_sweep(generators, x0, matrix, start)
        if np.array_equal(start_theta, x0):
            return OptimizationResult(tuple(float(v) for v in x0), initial_energy, True, 0)

    result = optimize.minimize(
        objective,
        start_theta,
        jac=True,
        method="BFGS",
        options={"gtol": settings.gradient_tolerance, "maxiter": settings.max_iterations},
    )
    energy = float(result.fun)
    if not math.isfinite(energy) or not np.all(np.isfinite(result.x)):
        raise NonFiniteEnergyError(f"optimizer produced a non-finite energy {energy}")
    theta = np.asarray(result.x, dtype=float)
    if energy > initial_energy:
        theta, energy = x0, initial_energy
    _, gradient = objective(theta)
    converged = float(np.max(np.abs(gradient))) < settings.gradient_tolerance
    if not converged:
        _LOGGER.warning(
            "Optimizer stopped after %d iterations with gradient norm %.3g: %s",
            result.nit,
            float(np.max(np.abs(gradient))),
            result.message,
        )
    return OptimizationResult(tuple(float(v) for v in theta), energy, converged, int(result.nit))


def score(h: PauliSum, p: PauliString, state: QuantumState, bias: float = 1.0) -> float:
    """dE/dtheta of exp(i theta P) at theta = 0, <psi|i[H, P]|psi>, times the hardware bias"""
    return bias * expectation(state, commutator(h, p))


def pool_gradients(h: PauliSum, pool: OperatorPool, state: QuantumState) -> FloatArray:
    """Unbiased scores of every pool operator at one state, -2 Im<H psi|P psi>"""
    vector = state.amplitudes
    costate = apply_pauli_sum(state, h)
    return np.array([-2.0 * float(np.vdot(costate, apply_pauli(vector, p)).imag) for p in pool])


@dataclass(frozen=True)
class AdaptIteration:
    """State of the loop right after one operator was appended and all parameters re-optimized"""

    iteration: int
    operator: PauliString
    score: float
    energy: float
    delta_f: float
    delta_c: float
    cnot_count: int
    theta: tuple[float, ...] = ()
    converged: bool = True

    def to_record(self) -> AdaptIterationRecord:
        return {
            "iteration": self.iteration,
            "operator": self.operator.label,
            "score": self.score,
            "energy": self.energy,
            "delta_f": self.delta_f,
            "delta_c": self.delta_c,
            "cnot_count": self.cnot_count,
        }


@dataclass(frozen=True)
class AdaptResult:
    """Final ansatz, optimized generators and the per-iteration trace"""

    n_qubits: int
    reference: str
    reference_energy: float
    generators: tuple[tuple[PauliString, float], ...]
    trace: tuple[AdaptIteration, ...]
    termination: Termination
    ansatz: Circuit

    @property
    def energy(self) -> float:
        return self.trace[-1].energy if self.trace else self.reference_energy

    @property
    def theta(self) -> tuple[float, ...]:
        return tuple(angle for _, angle in self.generators)

    @property
    def energy_trace(self) -> list[tuple[int, float, float, float, int]]:
        return [(it.iteration, it.energy, it.delta_f, it.delta_c, it.cnot_count) for it in self.trace]

    def state(self) -> QuantumState:
        return ansatz_state([p for p, _ in self.generators], self.theta, self.reference)

    def to_trace_lines(self) -> str:
        return "".join(json.dumps(it.to_record(), sort_keys=True) + "\n" for it in self.trace)


def _select(labels: Sequence[str], scores: FloatArray) -> int:
    magnitudes = np.abs(scores)
    best = float(np.max(magnitudes))
    tied = [index for index in range(len(labels)) if magnitudes[index] >= best - _TIE_TOLERANCE]
    return min(tied, key=lambda index: labels[index])


def run_adapt(
    h: LabeledHamiltonian | PauliSum,
    reference: str,
    cfg: AdaptConfig | None = None,
    on_iteration: Callable[[AdaptIteration], None] | None = None,
) -> AdaptResult:
    """Grow the ansatz while the best score, the energy change and the iteration count allow"""
    cfg = cfg or AdaptConfig()
    hamiltonian = h.hamiltonian if isinstance(h, LabeledHamiltonian) else h
    n_qubits = hamiltonian.n_qubits
    if len(reference) != n_qubits:
        raise InvalidAdaptConfigError(f"reference {reference!r} does not have {n_qubits} qubits")
    pool = cfg.pool or build_pool(n_qubits, reference)
    if pool.n_qubits != n_qubits:
        raise InvalidAdaptConfigError(f"pool acts on {pool.n_qubits} qubits, the Hamiltonian on {n_qubits}")
    labels = [p.label for p in pool]
    biaser = IsomorphismBias(cfg.hardware, cfg.bias) if cfg.hardware is not None else None

    matrix = hamiltonian.to_matrix()
    start = QuantumState.basis(n_qubits, reference)
    reference_energy = _energy(matrix, start.amplitudes)
    generators: list[PauliString] = []
    theta: list[float] = []
    trace: list[AdaptIteration] = []
    energy = reference_energy
    delta_f = delta_c = math.inf
    ansatz = compile_ansatz(reference, generators)

    def partial(termination: Termination) -> AdaptResult:
        return AdaptResult(
            n_qubits, reference, reference_energy, tuple(zip(generators, theta)), tuple(trace), termination, ansatz
        )

    while True:
        if len(generators) >= cfg.n_max:
            termination = Termination.MAX_ITERATIONS
            break
        if not delta_c > cfg.delta_c:
            termination = Termination.ENERGY_CONVERGED
            break
        state = ansatz_state(generators, theta, start)
        scores = pool_gradients(hamiltonian, pool, state)
        if biaser is not None:
            scores = scores * np.array([biaser(p, ansatz) for p in pool])
        chosen = _select(labels, scores)
        delta_f = float(abs(scores[chosen]))
        _LOGGER.debug("Pool scored: best %s with |f| = %.3e", labels[chosen], delta_f)
        if not delta_f > cfg.delta_f:
            termination = Termination.SCORE_CONVERGED
            break

        generators.append(pool.operators[chosen])
        try:
            result = optimize_parameters(generators, hamiltonian, [*theta, 0.0], start, cfg.optimizer)
        except NonFiniteEnergyError as err:
            generators.pop()
            raise AdaptOptimizerError(str(err), partial(Termination.MAX_ITERATIONS)) from err
        theta = list(result.theta)
        delta_c = abs(energy - result.energy)
        energy = result.energy
        ansatz = compile_ansatz(reference, generators)
        record = AdaptIteration(
            len(generators),
            pool.operators[chosen],
            float(scores[chosen]),
            energy,
            delta_f,
            delta_c,
            ansatz.cnot_count(),
            result.theta,
            result.converged,
        )
        trace.append(record)
        _LOGGER.info(
            "ADAPT iteration %d: appended %s, E = %.10f, CNOTs = %d",
            record.iteration,
            record.operator.label,
            energy,
            record.cnot_count,
        )
        if on_iteration is not None:
            on_iteration(record)

    _LOGGER.info("ADAPT stopped after %d iterations: %s", len(generators), termination.value)
    return partial(termination)


class InvalidPoolError(ValueError):
    """Error to indicate an operator pool with duplicates or even-Y words"""


class InvalidAdaptConfigError(ValueError):
    """Error to indicate ADAPT inputs out of range or of mismatched size"""


class NonFiniteEnergyError(ArithmeticError):
    """Error to indicate the energy or the parameters became non-finite"""


class AdaptOptimizerError(Exception):
    """Error to indicate the inner optimizer failed; the trace so far is kept on the error"""

    def __init__(self, message: str, partial_result: AdaptResult) -> None:
        super().__init__(message)
        self.partial_result = partial_result
