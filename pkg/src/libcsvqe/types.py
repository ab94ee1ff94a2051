"""Common types used in the library"""

from enum import Enum
from typing import TypedDict


class GateKind(str, Enum):
    """Native gate set, plus the CPhase gate used by noise amplification"""

    SX = "SX"
    X = "X"
    RZ = "RZ"
    H = "H"
    CNOT = "CNOT"
    CP = "CP"

    @property
    def n_qubits(self) -> int:
        """Number of operands the gate acts on"""
        return 2 if self in (GateKind.CNOT, GateKind.CP) else 1


class PoolProvenance(str, Enum):
    """Where the operators of a pool came from"""

    SINGLES_DOUBLES = "singles_doubles"
    CUSTOM = "custom"


class Termination(str, Enum):
    """Reason an ADAPT run stopped"""

    SCORE_CONVERGED = "score_converged"
    ENERGY_CONVERGED = "energy_converged"
    MAX_ITERATIONS = "max_iterations"


class FitKind(str, Enum):
    """Extrapolation model used by zero-noise extrapolation"""

    LINEAR = "linear"
    QUADRATIC = "quadratic"
    RICHARDSON = "richardson"


class GradientMethod(str, Enum):
    """How VQE parameter gradients are evaluated"""

    ADJOINT = "adjoint"
    PARAMETER_SHIFT = "parameter_shift"


class BundledHamiltonianConfig(TypedDict):
    """Settings for one bundled N2 Hamiltonian"""

    bond_length: float
    reference: str
    resource: str


class BundledHamiltonianPartialConfig(TypedDict, total=False):
    """Settings for one bundled N2 Hamiltonian (partial)"""

    bond_length: float
    reference: str
    resource: str


class AdaptIterationRecord(TypedDict):
    """One line of the ADAPT trace"""

    iteration: int
    operator: str
    score: float
    energy: float
    delta_f: float
    delta_c: float
    cnot_count: int


class TopologyFile(TypedDict):
    """On-disk layout of a hardware topology"""

    name: str
    nodes: list[int]
    edges: list[list[int]]


class NoiseModelFile(TypedDict, total=False):
    """On-disk layout of a noise model"""

    p_1q: float
    p_2q: float
    readout_p01: list[float]
    readout_p10: list[float]


class TileReport(TypedDict):
    """Energy estimate of a single tile at a single noise scale"""

    tile: int
    noise_scale: float
    energy: float
    std_error: float


class ZnePointReport(TypedDict):
    """Pooled energy estimate at a single noise scale"""

    scale: int
    energy: float
    std_error: float
    effective_shots: int
    tiles: list[TileReport]


class MitigationReport(TypedDict):
    """Everything a mitigated energy evaluation produced"""

    fit_kind: str
    points: list[ZnePointReport]
    fit_coefficients: list[float]
    energy: float
    uncertainty: float
    # bound circuit before amplification, readout not unfolded
    raw_energy: float
    mem: bool
    dd: bool
    seed: int
