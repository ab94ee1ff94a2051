"""Constants and defaults for the N2 contextual-subspace workbench."""

from .types import BundledHamiltonianPartialConfig, GateKind

# ADAPT loop
DEFAULT_DELTA_F = 1e-3
DEFAULT_DELTA_C = 1e-6
DEFAULT_N_MAX = 20

# Hardware-aware biasing
DEFAULT_BIAS = 1.0
DEFAULT_MAX_DEPTH = 2
COLLECTION_BUDGET = 20_000

# Tiling
EXACT_TILING_MAX_CANDIDATES = 50_000
EXACT_TILING_TIME_LIMIT = 60.0

# Pauli algebra and dense simulation
PRUNE_TOLERANCE = 1e-12
MAX_DENSE_QUBITS = 14
NORM_TOLERANCE = 1e-10

# Inner VQE optimizer
DEFAULT_GRADIENT_TOLERANCE = 1e-6
DEFAULT_OPTIMIZER_MAX_ITERATIONS = 500

# Arbitrary time units, only relative lengths matter
DEFAULT_GATE_DURATIONS: dict[GateKind, float] = {
    GateKind.SX: 1.0,
    GateKind.X: 1.0,
    GateKind.RZ: 1.0,
    GateKind.H: 1.0,
    GateKind.CNOT: 2.0,
    GateKind.CP: 2.0,
}

# Stand-in device noise, not a claim about any real chip
DEFAULT_P_1Q = 0.001
DEFAULT_P_2Q = 0.01
DEFAULT_READOUT_P01 = 0.02
DEFAULT_READOUT_P10 = 0.03
SINGULAR_DETERMINANT = 1e-6

# Mitigation
DEFAULT_LAMBDAS = (1, 2, 3)
DEFAULT_SHOTS = 10_000
TILE_SCALE_LOW = 0.5
TILE_SCALE_HIGH = 1.5

# Reporting
HARTREE_TO_MEV = 27211.386245988
FCI_ERROR_BAR_HARTREE = 0.00448
CHEMICAL_PRECISION_HARTREE = 0.0016

BUNDLED_TOPOLOGIES = ("falcon27", "eagle127")

BUNDLED_HAMILTONIAN_CONFIG: dict[str, BundledHamiltonianPartialConfig] = {
    "default": {
        "bond_length": 0.0,
        "reference": "11000",
    },
    "h0": {"bond_length": 0.80, "resource": "h0.ham"},
    "h1": {"bond_length": 0.93, "resource": "h1.ham"},
    "h2": {"bond_length": 1.07, "resource": "h2.ham"},
    "h3": {"bond_length": 1.20, "resource": "h3.ham"},
    "h4": {"bond_length": 1.33, "reference": "10000", "resource": "h4.ham"},
    "h5": {"bond_length": 1.47, "reference": "10000", "resource": "h5.ham"},
    "h6": {"bond_length": 1.60, "reference": "10000", "resource": "h6.ham"},
    "h7": {"bond_length": 1.73, "reference": "10000", "resource": "h7.ham"},
    "h8": {"bond_length": 1.87, "reference": "10000", "resource": "h8.ham"},
    "h9": {"bond_length": 2.00, "reference": "00000", "resource": "h9.ham"},
}
