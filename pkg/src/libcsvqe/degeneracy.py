"""Orbital-degeneracy scoring along a bond-length sweep"""

import csv
import io
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from scipy import special

from .utils import atomic_write_text

_SMALL_ARGUMENT = 1e-8
_HALF_ROOT_PI = math.sqrt(math.pi) / 2

FLAGGED_PAIR_HEADER = ("bond_length", "lower", "upper", "gap", "score")


@dataclass(frozen=True)
class LevelSet:
    """Energy levels at one bond length, ascending"""

    bond_length: float
    levels: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(b < a for a, b in zip(self.levels, self.levels[1:])):
            raise InvalidLevelSetError(f"levels at {self.bond_length} are not sorted ascending")

    @classmethod
    def from_unsorted(cls, bond_length: float, levels: Iterable[float]) -> "LevelSet":
        return cls(bond_length, tuple(sorted(levels)))

    def gaps(self) -> list[float]:
        return [b - a for a, b in zip(self.levels, self.levels[1:])]


@dataclass(frozen=True)
class FlaggedPair:
    bond_length: float
    lower: int
    upper: int
    gap: float
    score: float


def degeneracy_score(x: float, delta: float) -> float:
    """(sqrt(pi)/2) erf(delta x) / (delta x), equal to 1 at x = 0"""
    if not delta > 0:
        raise InvalidDeltaError(f"delta must be positive, got {delta}")
    z = delta * x
    if abs(z) < _SMALL_ARGUMENT:
        return 1.0 - z * z / 3.0
    return _HALF_ROOT_PI * float(special.erf(z)) / z


def scan_degeneracies(sweep: Sequence[LevelSet], delta: float, threshold: float) -> list[FlaggedPair]:
    """Adjacent level pairs scoring at least the threshold, by bond length then gap"""
    if not sweep:
        raise EmptySweepError("the sweep has no level sets")
    flagged = [
        FlaggedPair(level_set.bond_length, index, index + 1, gap, degeneracy_score(gap, delta))
        for level_set in sweep
        for index, gap in enumerate(level_set.gaps())
    ]
    return sorted(
        (pair for pair in flagged if pair.score >= threshold),
        key=lambda pair: (pair.bond_length, pair.gap, pair.lower),
    )


def read_level_sets(path: str | Path) -> list[LevelSet]:
    """Rows of bond_length, e0, e1, ...; a header row and blank lines are skipped"""
    sweep = []
    with Path(path).open(newline="", encoding="utf-8") as handle:
        for line_number, row in enumerate(csv.reader(handle), start=1):
            cells = [cell.strip() for cell in row if cell.strip()]
            if not cells or cells[0].startswith("#"):
                continue
            try:
                values = [float(cell) for cell in cells]
            except ValueError as err:
                if line_number == 1:
                    continue
                raise LevelFileFormatError(f"line {line_number}: {err}") from err
            if len(values) < 2:
                raise LevelFileFormatError(f"line {line_number}: a bond length needs at least one level")
            sweep.append(LevelSet.from_unsorted(values[0], values[1:]))
    return sweep


def format_flagged_pairs(rows: Iterable[FlaggedPair]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(FLAGGED_PAIR_HEADER)
    for row in rows:
        writer.writerow([repr(row.bond_length), row.lower, row.upper, repr(row.gap), repr(row.score)])
    return buffer.getvalue()


def write_flagged_pairs(path: str | Path, rows: Iterable[FlaggedPair]) -> None:
    atomic_write_text(Path(path), format_flagged_pairs(rows))


class InvalidDeltaError(ValueError):
    """Error to indicate a non-positive filtering parameter"""


class InvalidLevelSetError(ValueError):
    """Error to indicate levels that are not sorted ascending"""


class EmptySweepError(ValueError):
    """Error to indicate a degeneracy scan over no level sets"""


class LevelFileFormatError(ValueError):
    """Error to indicate a malformed level CSV file"""
