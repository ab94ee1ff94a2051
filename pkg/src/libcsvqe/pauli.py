"""Pauli words in symplectic form and real-weighted sums of them"""

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import numpy.typing as npt

from .const import PRUNE_TOLERANCE

_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {letter: bits for bits, letter in _LETTERS.items()}
_PHASE_FACTORS = (1, 1j, -1, -1j)


@dataclass(frozen=True)
class PauliString:
    """A Pauli word i^phase * P_{n-1} ... P_0, bit q of x/z describes qubit q"""

    n_qubits: int
    x: int
    z: int
    phase: int = 0

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise InvalidPauliLabelError(f"a Pauli word needs at least one qubit, got {self.n_qubits}")
        limit = 1 << self.n_qubits
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise InvalidPauliLabelError(f"bit masks do not fit in {self.n_qubits} qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def from_label(cls, label: str, phase: int = 0) -> "PauliString":
        """Build from a letter string, leftmost letter is qubit n-1"""
        if not label or any(letter not in _BITS for letter in label):
            raise InvalidPauliLabelError(f"invalid Pauli label: {label!r}")
        x = z = 0
        for qubit, letter in enumerate(reversed(label)):
            x_bit, z_bit = _BITS[letter]
            x |= x_bit << qubit
            z |= z_bit << qubit
        return cls(len(label), x, z, phase)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        """The identity word on n qubits"""
        return cls(n_qubits, 0, 0)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str) -> "PauliString":
        """A single non-trivial letter on one qubit"""
        if not 0 <= qubit < n_qubits or letter not in _BITS:
            raise InvalidPauliLabelError(f"cannot place {letter!r} on qubit {qubit} of {n_qubits}")
        x_bit, z_bit = _BITS[letter]
        return cls(n_qubits, x_bit << qubit, z_bit << qubit)

    def letter(self, qubit: int) -> str:
        """Letter acting on one qubit"""
        return _LETTERS[((self.x >> qubit) & 1, (self.z >> qubit) & 1)]

    @property
    def label(self) -> str:
        """Letter string without phase"""
        return "".join(self.letter(qubit) for qubit in reversed(range(self.n_qubits)))

    @property
    def support_mask(self) -> int:
        return self.x | self.z

    @property
    def support(self) -> tuple[int, ...]:
        """Qubits carrying a non-identity letter, ascending"""
        return tuple(qubit for qubit in range(self.n_qubits) if (self.support_mask >> qubit) & 1)

    @property
    def weight(self) -> int:
        return self.support_mask.bit_count()

    @property
    def y_count(self) -> int:
        return (self.x & self.z).bit_count()

    @property
    def is_identity(self) -> bool:
        return self.support_mask == 0

    @property
    def coefficient(self) -> complex:
        """The phase factor as a complex number"""
        return _PHASE_FACTORS[self.phase]

    def without_phase(self) -> "PauliString":
        """Same letters with phase +1"""
        if self.phase == 0:
            return self
        return PauliString(self.n_qubits, self.x, self.z)

    def to_matrix(self) -> npt.NDArray[np.complex128]:
        """Dense 2^n x 2^n matrix"""
        dim = 1 << self.n_qubits
        indices = np.arange(dim)
        values = self.coefficient * _PHASE_FACTORS[self.y_count % 4] * parity_signs(indices, self.z)
        matrix = np.zeros((dim, dim), dtype=np.complex128)
        matrix[indices ^ self.x, indices] = values
        return matrix

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)

    def __str__(self) -> str:
        return ("+", "+i", "-", "-i")[self.phase] + self.label


def parity_signs(indices: npt.NDArray[np.int64], mask: int) -> npt.NDArray[np.float64]:
    """(-1)^popcount(index & mask) for every index"""
    parity = np.zeros(indices.shape, dtype=np.int64)
    bit = 0
    while mask >> bit:
        if (mask >> bit) & 1:
            parity ^= (indices >> bit) & 1
        bit += 1
    return 1.0 - 2.0 * parity


def _check_sizes(a: PauliString, b: PauliString) -> None:
    if a.n_qubits != b.n_qubits:
        raise PauliSizeMismatchError(f"cannot combine {a.n_qubits}-qubit and {b.n_qubits}-qubit Pauli words")


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Exact operator product a*b, phase included"""
    _check_sizes(a, b)
    a_x, a_y, a_z = a.x & ~a.z, a.x & a.z, a.z & ~a.x
    b_x, b_y, b_z = b.x & ~b.z, b.x & b.z, b.z & ~b.x
    # XY=iZ, YZ=iX, ZX=iY and the reversed orders give -i
    gained = (
        (a_x & b_y).bit_count()
        + (a_y & b_z).bit_count()
        + (a_z & b_x).bit_count()
        - (a_x & b_z).bit_count()
        - (a_y & b_x).bit_count()
        - (a_z & b_y).bit_count()
    )
    return PauliString(a.n_qubits, a.x ^ b.x, a.z ^ b.z, a.phase + b.phase + gained)


def commutes(a: PauliString, b: PauliString) -> bool:
    """Whether a*b == b*a"""
    _check_sizes(a, b)
    return ((a.x & b.z).bit_count() + (a.z & b.x).bit_count()) % 2 == 0


def qubitwise_commutes(a: PauliString, b: PauliString) -> bool:
    """Whether the letters agree on every qubit where both act"""
    _check_sizes(a, b)
    return ((a.x ^ b.x) | (a.z ^ b.z)) & a.support_mask & b.support_mask == 0


@dataclass(frozen=True)
class PauliSum:
    """Real linear combination of phase-free Pauli words"""

    n_qubits: int
    terms: Mapping[PauliString, float] = field(default_factory=dict)

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable[tuple[PauliString, float]]) -> "PauliSum":
        """Accumulate (word, coefficient) pairs, folding real phases and pruning zeros"""
        accumulated: dict[PauliString, float] = {}
        for pauli, coeff in terms:
            if pauli.n_qubits != n_qubits:
                raise PauliSizeMismatchError(f"expected {n_qubits}-qubit terms, got {pauli.label}")
            if pauli.phase % 2:
                raise NonHermitianTermError(f"term {pauli} has an imaginary phase")
            key = pauli.without_phase()
            value = coeff if pauli.phase == 0 else -coeff
            accumulated[key] = accumulated.get(key, 0.0) + value
        return cls(n_qubits, {key: value for key, value in accumulated.items() if abs(value) > PRUNE_TOLERANCE})

    @classmethod
    def from_dict(cls, terms: Mapping[str, float]) -> "PauliSum":
        """Build from a label to coefficient mapping"""
        if not terms:
            raise InvalidPauliLabelError("cannot infer the qubit count of an empty mapping")
        n_qubits = len(next(iter(terms)))
        return cls.from_terms(n_qubits, ((PauliString.from_label(label), coeff) for label, coeff in terms.items()))

    @property
    def identity_coefficient(self) -> float:
        return self.terms.get(PauliString.identity(self.n_qubits), 0.0)

    def without_identity(self) -> "PauliSum":
        return PauliSum(self.n_qubits, {key: value for key, value in self.terms.items() if not key.is_identity})

    def labels(self) -> list[str]:
        return [pauli.label for pauli in self.terms]

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum.from_terms(self.n_qubits, ((pauli, coeff * factor) for pauli, coeff in self.terms.items()))

    def to_matrix(self) -> npt.NDArray[np.complex128]:
        """Dense 2^n x 2^n matrix, cached and read-only"""
        return self._matrix

    @cached_property
    def _matrix(self) -> npt.NDArray[np.complex128]:
        dim = 1 << self.n_qubits
        indices = np.arange(dim)
        matrix = np.zeros((dim, dim), dtype=np.complex128)
        for pauli, coeff in self.terms.items():
            matrix[indices ^ pauli.x, indices] += coeff * _PHASE_FACTORS[pauli.y_count % 4] * parity_signs(
                indices, pauli.z
            )
        matrix.setflags(write=False)
        return matrix

    def items(self) -> Iterator[tuple[PauliString, float]]:
        return iter(self.terms.items())

    def __iter__(self) -> Iterator[PauliString]:
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if self.n_qubits != other.n_qubits:
            raise PauliSizeMismatchError(f"cannot add {self.n_qubits}-qubit and {other.n_qubits}-qubit sums")
        return PauliSum.from_terms(self.n_qubits, [*self.terms.items(), *other.terms.items()])

    def __mul__(self, factor: float) -> "PauliSum":
        return self.scaled(factor)

    __rmul__ = __mul__

    def __str__(self) -> str:
        return " ".join(f"{coeff:+.5f}*{pauli.label}" for pauli, coeff in self.terms.items()) or "0"


def commutator(h: PauliSum, p: PauliString) -> PauliSum:
    """i[H, P] as a real Pauli sum"""
    if h.n_qubits != p.n_qubits:
        raise PauliSizeMismatchError(f"cannot combine a {h.n_qubits}-qubit sum with {p.label}")
    if p.phase % 2:
        raise NonHermitianTermError(f"{p} is not Hermitian")
    terms = []
    for pauli, coeff in h.terms.items():
        if commutes(pauli, p):
            continue
        # anticommuting terms give [Q, P] = 2QP with QP = +-i R
        product = multiply(pauli, p)
        sign = 1.0 if (product.phase + 1) % 4 == 0 else -1.0
        terms.append((product.without_phase(), 2.0 * coeff * sign))
    return PauliSum.from_terms(h.n_qubits, terms)


@dataclass(frozen=True)
class QwcCliqueCover:
    """Identity offset plus qubit-wise commuting groups"""

    n_qubits: int
    identity_coeff: float
    cliques: tuple[PauliSum, ...]

    def reconstruct(self) -> PauliSum:
        """Sum of the identity term and all cliques"""
        terms: list[tuple[PauliString, float]] = [(PauliString.identity(self.n_qubits), self.identity_coeff)]
        for clique in self.cliques:
            terms.extend(clique.terms.items())
        return PauliSum.from_terms(self.n_qubits, terms)

    def validate(self) -> None:
        """Raise when a clique is not qubit-wise commuting or contains the identity"""
        for index, clique in enumerate(self.cliques):
            if clique.n_qubits != self.n_qubits:
                raise PauliSizeMismatchError(f"clique {index} has {clique.n_qubits} qubits")
            if any(pauli.is_identity for pauli in clique):
                raise NonQwcCliqueError(f"clique {index} contains the identity")
            if not is_qwc_clique(clique):
                raise NonQwcCliqueError(f"clique {index} is not qubit-wise commuting")

    @property
    def n_terms(self) -> int:
        return sum(len(clique) for clique in self.cliques)


def is_qwc_clique(clique: Iterable[PauliString]) -> bool:
    """Whether every pair of members qubit-wise commutes"""
    members = list(clique)
    return all(qubitwise_commutes(a, b) for i, a in enumerate(members) for b in members[i + 1 :])


def measurement_basis(clique: PauliSum) -> str:
    """Per-qubit letter that diagonalizes every member, leftmost is qubit n-1"""
    basis_x = basis_z = 0
    for pauli in clique:
        overlap = pauli.support_mask & (basis_x | basis_z)
        if ((pauli.x ^ basis_x) | (pauli.z ^ basis_z)) & overlap:
            raise NonQwcCliqueError(f"{pauli.label} clashes with measurement basis of the clique")
        basis_x |= pauli.x
        basis_z |= pauli.z
    return PauliString(clique.n_qubits, basis_x, basis_z).label


def greedy_qwc_cover(h: PauliSum) -> QwcCliqueCover:
    """Group terms into qubit-wise commuting cliques, largest coefficient first"""
    ordered = sorted(h.without_identity().items(), key=lambda item: (-abs(item[1]), item[0].label))
    cliques: list[list[tuple[PauliString, float]]] = []
    # running union of letters per clique, well defined because members agree where they overlap
    bases: list[tuple[int, int]] = []
    for pauli, coeff in ordered:
        for index, (basis_x, basis_z) in enumerate(bases):
            overlap = pauli.support_mask & (basis_x | basis_z)
            if not ((pauli.x ^ basis_x) | (pauli.z ^ basis_z)) & overlap:
                cliques[index].append((pauli, coeff))
                bases[index] = (basis_x | pauli.x, basis_z | pauli.z)
                break
        else:
            cliques.append([(pauli, coeff)])
            bases.append((pauli.x, pauli.z))
    return QwcCliqueCover(
        h.n_qubits,
        h.identity_coefficient,
        tuple(PauliSum(h.n_qubits, dict(members)) for members in cliques),
    )


class PauliSizeMismatchError(ValueError):
    """Error to indicate operands act on different numbers of qubits"""


class InvalidPauliLabelError(ValueError):
    """Error to indicate a Pauli word cannot be built from the given letters"""


class NonHermitianTermError(ValueError):
    """Error to indicate a term with imaginary phase was given where a real weight is required"""


class NonQwcCliqueError(ValueError):
    """Error to indicate a clique contains terms that do not qubit-wise commute"""
