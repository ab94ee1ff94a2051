"""Utility functions"""

import os
import tempfile
from collections.abc import Mapping
from pathlib import Path
from typing import cast

from .const import BUNDLED_HAMILTONIAN_CONFIG
from .types import BundledHamiltonianConfig

THREADS_ENV_VAR = "LIBCSVQE_THREADS"


def get_bundled_config(bundled_id: str) -> BundledHamiltonianConfig:
    """Get settings of a bundled Hamiltonian, merged over the defaults"""
    default = BUNDLED_HAMILTONIAN_CONFIG["default"]
    try:
        specific = BUNDLED_HAMILTONIAN_CONFIG[bundled_id]
    except KeyError as err:
        raise UnknownBundledHamiltonianError(f"unknown bundled Hamiltonian: {bundled_id}") from err
    if bundled_id == "default":
        raise UnknownBundledHamiltonianError(f"unknown bundled Hamiltonian: {bundled_id}")
    return cast(BundledHamiltonianConfig, default | specific)


def bundled_ids() -> list[str]:
    """Ids of all bundled Hamiltonians, ordered by bond length"""
    ids = [key for key in BUNDLED_HAMILTONIAN_CONFIG if key != "default"]
    return sorted(ids, key=lambda key: get_bundled_config(key)["bond_length"])


def get_thread_count(default: int | None = None) -> int:
    """Worker count for concurrent fan-out, overridable from the environment"""
    value = os.environ.get(THREADS_ENV_VAR)
    if value:
        try:
            count = int(value)
        except ValueError as err:
            raise InvalidThreadCountError(f"{THREADS_ENV_VAR} must be a positive integer, got {value!r}") from err
        if count < 1:
            raise InvalidThreadCountError(f"{THREADS_ENV_VAR} must be a positive integer, got {value!r}")
        return count
    return default or min(8, os.cpu_count() or 1)


def atomic_write_text(path: Path, text: str) -> None:
    """Write a file through a temporary sibling so readers never see a partial file"""
    atomic_write_files({path: text})


def atomic_write_files(outputs: Mapping[Path, str]) -> None:
    """Stage every file as a temporary sibling, then rename them all; a failure while staging writes nothing"""
    staged: list[tuple[str, Path]] = []
    try:
        for path, text in outputs.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            staged.append((tmp_name, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(text)
        for tmp_name, path in staged:
            os.replace(tmp_name, path)
    except BaseException:
        for tmp_name, _ in staged:
            Path(tmp_name).unlink(missing_ok=True)
        raise


class UnknownBundledHamiltonianError(Exception):
    """Error to indicate the bundled Hamiltonian id does not exist"""


class InvalidThreadCountError(ValueError):
    """Error to indicate the thread count override is not a positive integer"""
