"""Read and write the clique-grouped Hamiltonian text format"""

import hashlib
import logging
import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib.resources import files
from pathlib import Path
from typing import TextIO

from .pauli import (
    InvalidPauliLabelError,
    PauliString,
    PauliSum,
    QwcCliqueCover,
)
from .utils import UnknownBundledHamiltonianError, bundled_ids, get_bundled_config

_LOGGER = logging.getLogger(__name__)

_HEADER_RE = re.compile(r"^#\s*(?P<key>[a-z_]+)\s*:\s*(?P<value>\S+)\s*$")
_IDENTITY_RE = re.compile(r"^\[identity\]\s+(?P<value>\S+)$")
_CLIQUE_RE = re.compile(r"^\[clique\s+(?P<index>\d+)\]$")
_TERM_RE = re.compile(r"^(?P<coeff>[+-]\S+)\s+(?P<label>[IXYZ]+)$")

__all__ = [
    "HamiltonianParseError",
    "LabeledHamiltonian",
    "UnknownBundledHamiltonianError",
    "hamiltonian_digest",
    "load_bundled",
    "load_bundled_sweep",
    "load_hamiltonian",
    "parse_hamiltonian",
    "reference_for_bond_length",
    "serialize_hamiltonian",
]


@dataclass(frozen=True)
class LabeledHamiltonian:
    """A clique-grouped Hamiltonian tagged with its bond length"""

    bond_length: float | None
    cover: QwcCliqueCover
    name: str = field(default="", compare=False)

    @property
    def n_qubits(self) -> int:
        return self.cover.n_qubits

    @cached_property
    def hamiltonian(self) -> PauliSum:
        """The full operator, identity term included"""
        return self.cover.reconstruct()


class _Parser:
    """Line-oriented state machine for one Hamiltonian file"""

    def __init__(self) -> None:
        self.bond_length: float | None = None
        self.n_qubits: int | None = None
        self.identity: float | None = None
        self.cliques: list[list[tuple[PauliString, float]]] = []
        self.clique_lines: list[int] = []
        self.seen: set[str] = set()

    def feed(self, line_number: int, raw: str) -> None:
        line = raw.strip()
        if not line:
            return
        if line.startswith("#"):
            self._header(line_number, line)
        elif match := _IDENTITY_RE.match(line):
            if self.identity is not None:
                raise HamiltonianParseError(line_number, "duplicate [identity] section")
            self.identity = _parse_float(line_number, match["value"])
        elif match := _CLIQUE_RE.match(line):
            self._close_clique()
            index = int(match["index"])
            if index < len(self.cliques):
                raise HamiltonianParseError(line_number, f"duplicate clique index {index}")
            if index != len(self.cliques):
                raise HamiltonianParseError(line_number, f"expected clique {len(self.cliques)}, got {index}")
            self.cliques.append([])
            self.clique_lines.append(line_number)
        elif match := _TERM_RE.match(line):
            self._term(line_number, match["coeff"], match["label"])
        else:
            raise HamiltonianParseError(line_number, f"malformed line: {line!r}")

    def _header(self, line_number: int, line: str) -> None:
        match = _HEADER_RE.match(line)
        if match is None:
            return
        if match["key"] == "bond_length_angstrom":
            self.bond_length = _parse_float(line_number, match["value"])
        elif match["key"] == "n_qubits":
            try:
                self.n_qubits = int(match["value"])
            except ValueError as err:
                raise HamiltonianParseError(line_number, f"invalid qubit count {match['value']!r}") from err
            if self.n_qubits < 1:
                raise HamiltonianParseError(line_number, "qubit count must be positive")

    def _term(self, line_number: int, coeff_text: str, label: str) -> None:
        if not self.cliques:
            raise HamiltonianParseError(line_number, "term outside of a [clique k] section")
        if self.n_qubits is None:
            self.n_qubits = len(label)
        if len(label) != self.n_qubits:
            raise HamiltonianParseError(line_number, f"{label} has {len(label)} letters, expected {self.n_qubits}")
        if label in self.seen:
            raise HamiltonianParseError(line_number, f"duplicate term {label}")
        try:
            pauli = PauliString.from_label(label)
        except InvalidPauliLabelError as err:
            raise HamiltonianParseError(line_number, str(err)) from err
        if pauli.is_identity:
            raise HamiltonianParseError(line_number, "identity term belongs in the [identity] section")
        clique = self.cliques[-1]
        for other, _ in clique:
            overlap = pauli.support_mask & other.support_mask
            if ((pauli.x ^ other.x) | (pauli.z ^ other.z)) & overlap:
                raise HamiltonianParseError(line_number, f"{label} does not qubit-wise commute with {other.label}")
        self.seen.add(label)
        clique.append((pauli, _parse_float(line_number, coeff_text)))

    def _close_clique(self) -> None:
        if self.cliques and not self.cliques[-1]:
            raise HamiltonianParseError(self.clique_lines[-1], f"clique {len(self.cliques) - 1} is empty")

    def finish(self, last_line: int) -> LabeledHamiltonian:
        self._close_clique()
        if self.n_qubits is None:
            raise HamiltonianParseError(last_line, "cannot determine the qubit count")
        n_qubits = self.n_qubits
        cover = QwcCliqueCover(
            n_qubits,
            self.identity or 0.0,
            tuple(PauliSum(n_qubits, dict(members)) for members in self.cliques),
        )
        return LabeledHamiltonian(self.bond_length, cover)


def _parse_float(line_number: int, text: str) -> float:
    try:
        return float(text)
    except ValueError as err:
        raise HamiltonianParseError(line_number, f"invalid number {text!r}") from err


def parse_hamiltonian(text: str | TextIO) -> LabeledHamiltonian:
    """Parse a Hamiltonian file body"""
    lines = text.splitlines() if isinstance(text, str) else text.read().splitlines()
    parser = _Parser()
    for line_number, line in enumerate(lines, start=1):
        parser.feed(line_number, line)
    return parser.finish(len(lines))


def _format_bond_length(value: float) -> str:
    fixed = f"{value:.2f}"
    return fixed if float(fixed) == value else repr(value)


def serialize_hamiltonian(h: LabeledHamiltonian) -> str:
    """Canonical text form, parse(serialize(h)) == h"""
    lines: list[str] = []
    if h.bond_length is not None:
        lines.append(f"# bond_length_angstrom: {_format_bond_length(h.bond_length)}")
    lines.append(f"# n_qubits: {h.n_qubits}")
    lines.append(f"[identity] {h.cover.identity_coeff!r}")
    for index, clique in enumerate(h.cover.cliques):
        lines.append(f"[clique {index}]")
        lines.extend(f"{coeff:+} {pauli.label}" for pauli, coeff in clique.items())
    return "\n".join(lines) + "\n"


def hamiltonian_digest(h: LabeledHamiltonian) -> str:
    """SHA-256 of the canonical text"""
    return hashlib.sha256(serialize_hamiltonian(h).encode("utf-8")).hexdigest()


def load_hamiltonian(path: str | Path) -> LabeledHamiltonian:
    """Load a Hamiltonian from a file"""
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        parsed = parse_hamiltonian(handle)
    _LOGGER.debug("Loaded %s: %d cliques, %d terms", path, len(parsed.cover.cliques), parsed.cover.n_terms)
    return LabeledHamiltonian(parsed.bond_length, parsed.cover, path.stem)


def load_bundled(bundled_id: str) -> LabeledHamiltonian:
    """Load one of the bundled N2 Hamiltonians, h0 to h9"""
    config = get_bundled_config(bundled_id)
    resource = files("libcsvqe").joinpath("data", "n2", config["resource"])
    parsed = parse_hamiltonian(resource.read_text(encoding="utf-8"))
    return LabeledHamiltonian(config["bond_length"], parsed.cover, bundled_id)


def load_bundled_sweep() -> list[LabeledHamiltonian]:
    """All bundled Hamiltonians ordered by bond length"""
    return [load_bundled(bundled_id) for bundled_id in bundled_ids()]


def reference_for_bond_length(bond_length: float) -> str:
    """Reference occupation for the bundled 5-qubit instances, leftmost is qubit 4"""
    if bond_length <= 1.2 + 1e-9:
        return "11000"
    if bond_length < 2.0 - 1e-9:
        return "10000"
    return "00000"


class HamiltonianParseError(ValueError):
    """Error to indicate the Hamiltonian text is malformed"""

    def __init__(self, line_number: int, message: str) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


