"""Readout-error mitigation, zero-noise extrapolation and tiled-ensemble aggregation"""

import json
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .circuit import Circuit, amplify_noise, insert_dd
from .const import (
    DEFAULT_LAMBDAS,
    DEFAULT_P_1Q,
    DEFAULT_P_2Q,
    DEFAULT_READOUT_P01,
    DEFAULT_READOUT_P10,
    DEFAULT_SHOTS,
    SINGULAR_DETERMINANT,
    TILE_SCALE_HIGH,
    TILE_SCALE_LOW,
)
from .hamiltonian_io import LabeledHamiltonian
from .simulator import (
    MeasurementRecord,
    NoiseChannelSpec,
    clique_energy,
    clique_estimator_variance,
    run_circuit,
    sample_clique,
)
from .topology import TilingPlan
from .types import FitKind, MitigationReport, NoiseModelFile, TileReport, ZnePointReport
from .utils import get_thread_count

_LOGGER = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

_STOCHASTIC_TOLERANCE = 1e-12
# second seed word of the tile-scale generator
_TILE_SCALE_STREAM = 0x7111E
# sampling key of the bound circuit before amplification
_UNAMPLIFIED = 0


def _apply_factors(distribution: FloatArray, matrices: Sequence[FloatArray]) -> FloatArray:
    """Apply one 2x2 matrix per qubit without building the full tensor product"""
    n = len(matrices)
    tensor = np.asarray(distribution, dtype=float).reshape((2,) * n)
    for qubit, matrix in enumerate(matrices):
        axis = n - 1 - qubit
        tensor = np.moveaxis(np.tensordot(matrix, tensor, axes=([1], [axis])), 0, axis)
    result: FloatArray = tensor.reshape(-1)
    return result


@dataclass(frozen=True, eq=False)
class ConfusionModel:
    """Per-qubit readout matrices, rows measured and columns prepared, noisy = A . true"""

    per_qubit: tuple[FloatArray, ...]

    def __post_init__(self) -> None:
        for qubit, matrix in enumerate(self.per_qubit):
            if matrix.shape != (2, 2):
                raise InvalidConfusionModelError(f"qubit {qubit}: expected a 2x2 matrix, got {matrix.shape}")
            if np.any(matrix < 0) or np.any(np.abs(matrix.sum(axis=0) - 1.0) > _STOCHASTIC_TOLERANCE):
                raise InvalidConfusionModelError(f"qubit {qubit}: columns must be probability vectors")
            if matrix[0, 0] <= 0.5 or matrix[1, 1] <= 0.5:
                raise InvalidConfusionModelError(f"qubit {qubit}: readout is not diagonally dominant")

    @classmethod
    def from_flip_probabilities(cls, p01: Sequence[float], p10: Sequence[float]) -> "ConfusionModel":
        """p01[q] is P(read 1 | prepared 0) on qubit q, p10[q] is P(read 0 | prepared 1)"""
        if len(p01) != len(p10):
            raise InvalidConfusionModelError(f"{len(p01)} 0->1 flips but {len(p10)} 1->0 flips")
        return cls(tuple(np.array([[1.0 - a, b], [a, 1.0 - b]]) for a, b in zip(p01, p10)))

    @classmethod
    def identity(cls, n_qubits: int) -> "ConfusionModel":
        return cls(tuple(np.eye(2) for _ in range(n_qubits)))

    @property
    def n_qubits(self) -> int:
        return len(self.per_qubit)

    def apply(self, distribution: FloatArray) -> FloatArray:
        """Forward readout noise on an outcome distribution"""
        self._check_size(distribution)
        return _apply_factors(distribution, self.per_qubit)

    def unfold(self, distribution: FloatArray) -> FloatArray:
        """A^-1 . distribution, a signed quasi-distribution"""
        self._check_size(distribution)
        return _apply_factors(distribution, self.inverse_matrices())

    def inverse_matrices(self) -> tuple[FloatArray, ...]:
        inverses = []
        for qubit, matrix in enumerate(self.per_qubit):
            determinant = float(np.linalg.det(matrix))
            if abs(determinant) < SINGULAR_DETERMINANT:
                raise SingularConfusionMatrixError(f"qubit {qubit}: determinant {determinant:.3g} is too small")
            inverses.append(np.linalg.inv(matrix))
        return tuple(inverses)

    def _check_size(self, distribution: FloatArray) -> None:
        if distribution.shape != (1 << self.n_qubits,):
            raise ConfusionModelSizeError(
                f"distribution of length {distribution.shape[0]} is not over {self.n_qubits} qubits"
            )


def mitigate_counts(record: MeasurementRecord, model: ConfusionModel) -> FloatArray:
    """Signed quasi-distribution A^-1 . frequencies, applied factor by factor"""
    if record.n_qubits != model.n_qubits:
        raise ConfusionModelSizeError(f"model covers {model.n_qubits} qubits, record has {record.n_qubits}")
    return model.unfold(record.distribution())


@dataclass(frozen=True)
class NoiseModel:
    """Global depolarizing strengths and readout flips, one entry per hardware qubit or a single shared one"""

    p_1q: float = 0.0
    p_2q: float = 0.0
    readout_p01: tuple[float, ...] = ()
    readout_p10: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.readout_p01) != len(self.readout_p10):
            raise InvalidNoiseModelError("readout_p01 and readout_p10 must have the same length")
        for value in (self.p_1q, self.p_2q, *self.readout_p01, *self.readout_p10):
            if not 0.0 <= value <= 1.0:
                raise InvalidNoiseModelError(f"probabilities must lie in [0, 1], got {value}")

    @classmethod
    def default(cls) -> "NoiseModel":
        return cls(DEFAULT_P_1Q, DEFAULT_P_2Q, (DEFAULT_READOUT_P01,), (DEFAULT_READOUT_P10,))

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        try:
            raw: NoiseModelFile = json.loads(text)
            p_1q = float(raw.get("p_1q", 0.0))
            p_2q = float(raw.get("p_2q", 0.0))
            p01 = tuple(float(v) for v in raw.get("readout_p01", []))
            p10 = tuple(float(v) for v in raw.get("readout_p10", []))
        except (json.JSONDecodeError, AttributeError, TypeError, ValueError) as err:
            raise InvalidNoiseModelError(f"cannot read noise model: {err}") from err
        return cls(p_1q, p_2q, p01, p10)

    def to_file(self) -> NoiseModelFile:
        return {
            "p_1q": self.p_1q,
            "p_2q": self.p_2q,
            "readout_p01": list(self.readout_p01),
            "readout_p10": list(self.readout_p10),
        }

    @property
    def channel(self) -> NoiseChannelSpec:
        return NoiseChannelSpec(self.p_1q, self.p_2q)

    @property
    def is_noiseless(self) -> bool:
        return self.channel.is_noiseless and not any(self.readout_p01) and not any(self.readout_p10)

    def scaled(self, factor: float) -> "NoiseModel":
        """Every error probability multiplied by the factor, gate errors capped at 1"""
        return NoiseModel(
            min(1.0, self.p_1q * factor),
            min(1.0, self.p_2q * factor),
            tuple(v * factor for v in self.readout_p01),
            tuple(v * factor for v in self.readout_p10),
        )

    def confusion(self, hardware_qubits: Sequence[int]) -> ConfusionModel:
        """Confusion model of the listed hardware qubits, in logical qubit order"""
        if not self.readout_p01:
            return ConfusionModel.identity(len(hardware_qubits))
        if len(self.readout_p01) == 1:
            return ConfusionModel.from_flip_probabilities(
                self.readout_p01 * len(hardware_qubits), self.readout_p10 * len(hardware_qubits)
            )
        try:
            return ConfusionModel.from_flip_probabilities(
                [self.readout_p01[q] for q in hardware_qubits], [self.readout_p10[q] for q in hardware_qubits]
            )
        except IndexError as err:
            raise InvalidNoiseModelError(f"no readout entry for hardware qubits {list(hardware_qubits)}") from err


@dataclass(frozen=True)
class ZnePoint:
    scale: int
    energy: float
    std_error: float


@dataclass(frozen=True)
class ZneSeries:
    """Energies at amplified noise scales and the model to extrapolate them with"""

    points: tuple[ZnePoint, ...]
    fit_kind: FitKind = FitKind.LINEAR

    def __post_init__(self) -> None:
        scales = [point.scale for point in self.points]
        if len(set(scales)) != len(scales):
            raise InvalidZneSeriesError(f"noise scales must be distinct, got {scales}")
        if any(scale < 1 for scale in scales):
            raise InvalidZneSeriesError(f"noise scales must be at least 1, got {scales}")
        needed = 2 if self.fit_kind is FitKind.LINEAR else 3
        if len(scales) < needed:
            raise InvalidZneSeriesError(f"a {self.fit_kind.value} fit needs at least {needed} points")

    @property
    def degree(self) -> int:
        if self.fit_kind is FitKind.LINEAR:
            return 1
        if self.fit_kind is FitKind.QUADRATIC:
            return 2
        return len(self.points) - 1


@dataclass(frozen=True)
class ZneFit:
    """Polynomial coefficients in increasing order with their covariance"""

    coefficients: tuple[float, ...]
    covariance: FloatArray = field(compare=False)

    @property
    def energy(self) -> float:
        return self.coefficients[0]

    @property
    def uncertainty(self) -> float:
        return math.sqrt(max(0.0, float(self.covariance[0, 0])))


def fit_zne(series: ZneSeries) -> ZneFit:
    """Weighted least squares in the noise scale; unit weights with residual variance when any error is zero"""
    scales = np.array([point.scale for point in series.points], dtype=float)
    energies = np.array([point.energy for point in series.points])
    errors = np.array([point.std_error for point in series.points])
    design = np.vander(scales, series.degree + 1, increasing=True)
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise DegenerateFitError(f"design matrix for scales {scales.tolist()} is rank deficient")
    weighted = bool(np.all(errors > 0))
    weights = 1.0 / errors**2 if weighted else np.ones_like(energies)
    normal = design.T @ (weights[:, None] * design)
    try:
        inverse = np.linalg.inv(normal)
    except np.linalg.LinAlgError as err:
        raise DegenerateFitError(f"normal equations for scales {scales.tolist()} are singular") from err
    coefficients = inverse @ (design.T @ (weights * energies))
    if not weighted:
        dof = len(energies) - design.shape[1]
        residual = energies - design @ coefficients
        variance = float(residual @ residual) / dof if dof > 0 else 0.0
        inverse = inverse * variance
    return ZneFit(tuple(float(c) for c in coefficients), inverse)


def extrapolate(series: ZneSeries) -> tuple[float, float]:
    """Zero-noise energy and its propagated uncertainty"""
    fit = fit_zne(series)
    return fit.energy, fit.uncertainty


def tile_noise_scales(seed: int, n_tiles: int) -> tuple[float, ...]:
    """Deterministic per-tile noise multipliers in [0.5, 1.5]"""
    rng = np.random.default_rng([seed, _TILE_SCALE_STREAM])
    return tuple(float(v) for v in rng.uniform(TILE_SCALE_LOW, TILE_SCALE_HIGH, n_tiles))


@dataclass(frozen=True)
class MitigationConfig:
    """What to amplify, sample and mitigate; tiling=None runs one tile on qubits 0..n-1"""

    lambdas: tuple[int, ...] = DEFAULT_LAMBDAS
    shots: int = DEFAULT_SHOTS
    tiling: TilingPlan | None = None
    mem: bool = True
    dd: bool = False
    seed: int = 0
    fit_kind: FitKind = FitKind.LINEAR
    tile_scales: tuple[float, ...] | None = None
    heterogeneous: bool = True
    workers: int | None = None

    def __post_init__(self) -> None:
        if not self.lambdas:
            raise InvalidMitigationConfigError("at least one noise scale is needed")
        if len(set(self.lambdas)) != len(self.lambdas) or any(lam < 1 for lam in self.lambdas):
            raise InvalidMitigationConfigError(f"noise scales must be distinct and at least 1, got {self.lambdas}")
        if self.shots < 1:
            raise InvalidMitigationConfigError(f"shots must be positive, got {self.shots}")
        if self.seed < 0:
            raise InvalidMitigationConfigError(f"seed must be nonnegative, got {self.seed}")
        if self.tiling is not None and not self.tiling.blocks:
            raise InvalidMitigationConfigError("the tiling plan has no blocks")
        if self.tile_scales is not None and len(self.tile_scales) != self.n_tiles:
            raise InvalidMitigationConfigError(f"{len(self.tile_scales)} tile scales for {self.n_tiles} tiles")
        if self.workers is not None and self.workers < 1:
            raise InvalidMitigationConfigError(f"worker count must be positive, got {self.workers}")

    @property
    def n_tiles(self) -> int:
        return self.tiling.n_blocks if self.tiling is not None else 1

    def scales(self) -> tuple[float, ...]:
        if self.tile_scales is not None:
            return self.tile_scales
        if self.heterogeneous and self.n_tiles > 1:
            return tile_noise_scales(self.seed, self.n_tiles)
        return (1.0,) * self.n_tiles


@dataclass(frozen=True)
class MitigatedEnergy:
    energy: float
    uncertainty: float
    report: MitigationReport


@dataclass(frozen=True)
class _TileOutcome:
    raw: tuple[FloatArray, ...]
    mitigated: tuple[FloatArray, ...]


def _hardware_qubits(cfg: MitigationConfig, tile: int, n_qubits: int) -> list[int]:
    if cfg.tiling is None:
        return list(range(n_qubits))
    mapping = cfg.tiling.blocks[tile].mapping
    return [mapping[qubit] for qubit in range(n_qubits)]


def _check_tile_noise(noise: NoiseModel, cfg: MitigationConfig, scales: Sequence[float], n_qubits: int) -> None:
    """Raise before any simulation when a tile's scaled noise is out of range or its readout cannot be unfolded"""
    for tile, scale in enumerate(scales):
        try:
            confusion = noise.scaled(scale).confusion(_hardware_qubits(cfg, tile, n_qubits))
            if cfg.mem:
                confusion.inverse_matrices()
        except (InvalidNoiseModelError, InvalidConfusionModelError, SingularConfusionMatrixError) as err:
            raise InvalidMitigationConfigError(f"tile {tile} at noise scale {scale:.3g}: {err}") from err


def _energy_and_error(h: LabeledHamiltonian, distributions: Sequence[FloatArray], shots: int) -> tuple[float, float]:
    energy = h.cover.identity_coeff
    variance = 0.0
    for clique, distribution in zip(h.cover.cliques, distributions):
        energy += clique_energy(distribution, clique)
        variance += clique_estimator_variance(distribution, clique, shots)
    return energy, math.sqrt(variance)


def run_mitigated_energy(
    h: LabeledHamiltonian,
    ansatz: Circuit,
    theta: Sequence[float],
    noise: NoiseModel,
    cfg: MitigationConfig | None = None,
) -> MitigatedEnergy:
    """Amplify, optionally decouple, simulate every tile, sample, optionally unfold readout, pool and extrapolate"""
    cfg = cfg or MitigationConfig()
    if ansatz.n_qubits != h.n_qubits:
        raise InvalidMitigationConfigError(f"ansatz has {ansatz.n_qubits} qubits, the Hamiltonian {h.n_qubits}")
    bound = ansatz.bind(theta)
    scales = cfg.scales()
    _check_tile_noise(noise, cfg, scales, h.n_qubits)
    circuits = {lam: amplify_noise(bound, lam) for lam in cfg.lambdas}
    if cfg.dd:
        circuits = {lam: insert_dd(circuit) for lam, circuit in circuits.items()}
    circuits[_UNAMPLIFIED] = bound

    def simulate(lam: int, tile: int) -> _TileOutcome:
        tile_noise = noise.scaled(scales[tile])
        confusion = tile_noise.confusion(_hardware_qubits(cfg, tile, h.n_qubits))
        state = run_circuit(circuits[lam], noise=tile_noise.channel)
        raw: list[FloatArray] = []
        mitigated: list[FloatArray] = []
        for index, clique in enumerate(h.cover.cliques):
            record = sample_clique(
                state, clique, cfg.shots, cfg.seed, index, stream=(index, lam, tile), readout=confusion.apply
            )
            raw.append(record.distribution())
            unfold = cfg.mem and lam != _UNAMPLIFIED
            mitigated.append(mitigate_counts(record, confusion) if unfold else record.distribution())
        return _TileOutcome(tuple(raw), tuple(mitigated))

    tasks = [(lam, tile) for lam in (_UNAMPLIFIED, *cfg.lambdas) for tile in range(cfg.n_tiles)]
    with ThreadPoolExecutor(max_workers=cfg.workers or get_thread_count()) as executor:
        outcomes = dict(zip(tasks, executor.map(lambda task: simulate(*task), tasks)))

    effective_shots = cfg.shots * cfg.n_tiles

    def pooled(lam: int, mitigated: bool) -> list[FloatArray]:
        per_tile = [outcomes[(lam, tile)] for tile in range(cfg.n_tiles)]
        return [
            np.mean([(outcome.mitigated if mitigated else outcome.raw)[index] for outcome in per_tile], axis=0)
            for index in range(len(h.cover.cliques))
        ]

    raw_energy, _ = _energy_and_error(h, pooled(_UNAMPLIFIED, False), effective_shots)
    points: list[ZnePointReport] = []
    zne_points: list[ZnePoint] = []
    for lam in sorted(cfg.lambdas):
        tiles: list[TileReport] = []
        for tile in range(cfg.n_tiles):
            energy, error = _energy_and_error(h, outcomes[(lam, tile)].mitigated, cfg.shots)
            tiles.append({"tile": tile, "noise_scale": scales[tile], "energy": energy, "std_error": error})
        energy, error = _energy_and_error(h, pooled(lam, True), effective_shots)
        _LOGGER.debug("Noise scale %d: E = %.8f +/- %.2g over %d shots", lam, energy, error, effective_shots)
        points.append(
            {"scale": lam, "energy": energy, "std_error": error, "effective_shots": effective_shots, "tiles": tiles}
        )
        zne_points.append(ZnePoint(lam, energy, error))

    if len(zne_points) == 1:
        fit_kind = "none"
        coefficients: tuple[float, ...] = (zne_points[0].energy,)
        energy, uncertainty = zne_points[0].energy, zne_points[0].std_error
    else:
        fit = fit_zne(ZneSeries(tuple(zne_points), cfg.fit_kind))
        fit_kind = cfg.fit_kind.value
        coefficients = fit.coefficients
        energy, uncertainty = fit.energy, fit.uncertainty
    _LOGGER.info("Mitigated energy %.8f +/- %.2g from %d noise scales", energy, uncertainty, len(zne_points))
    report: MitigationReport = {
        "fit_kind": fit_kind,
        "points": points,
        "fit_coefficients": list(coefficients),
        "energy": energy,
        "uncertainty": uncertainty,
        "raw_energy": raw_energy,
        "mem": cfg.mem,
        "dd": cfg.dd,
        "seed": cfg.seed,
    }
    return MitigatedEnergy(energy, uncertainty, report)


class InvalidConfusionModelError(ValueError):
    """Error to indicate readout matrices that are not column-stochastic or not diagonally dominant"""


class ConfusionModelSizeError(ValueError):
    """Error to indicate a confusion model and a distribution over different qubit counts"""


class SingularConfusionMatrixError(ValueError):
    """Error to indicate a per-qubit readout matrix too close to singular to invert"""


class InvalidNoiseModelError(ValueError):
    """Error to indicate a noise model with probabilities out of range"""


class InvalidZneSeriesError(ValueError):
    """Error to indicate repeated or too few noise scales for the chosen fit"""


class DegenerateFitError(ValueError):
    """Error to indicate the extrapolation design matrix is singular"""


class InvalidMitigationConfigError(ValueError):
    """Error to indicate mitigation settings out of range"""
