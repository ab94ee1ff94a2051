"""Command-line front end: exact energies, ADAPT runs, potential energy curves and degeneracy scans

Installed as the ``libcsvqe`` console script, also runnable with ``python -m libcsvqe``.
"""

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib.resources import files
from pathlib import Path
from typing import Any

from . import __version__
from .adapt import AdaptConfig, AdaptResult, OptimizerSettings, run_adapt
from .circuit import coupling_graph
from .const import (
    BUNDLED_TOPOLOGIES,
    CHEMICAL_PRECISION_HARTREE,
    DEFAULT_BIAS,
    DEFAULT_DELTA_C,
    DEFAULT_DELTA_F,
    DEFAULT_LAMBDAS,
    DEFAULT_MAX_DEPTH,
    DEFAULT_N_MAX,
    DEFAULT_SHOTS,
    HARTREE_TO_MEV,
)
from .degeneracy import format_flagged_pairs, read_level_sets, scan_degeneracies
from .hamiltonian_io import (
    LabeledHamiltonian,
    hamiltonian_digest,
    load_bundled,
    load_hamiltonian,
    reference_for_bond_length,
)
from .mitigation import MitigationConfig, NoiseModel, run_mitigated_energy
from .simulator import exact_ground
from .topology import BiasSettings, HardwareTopology, IsomorphismBias, load_topology, plan_tiling
from .types import FitKind, GradientMethod
from .utils import atomic_write_files, bundled_ids, get_bundled_config, get_thread_count

_LOGGER = logging.getLogger(__name__)

SOURCE_DATE_EPOCH_ENV_VAR = "SOURCE_DATE_EPOCH"


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce one command's outputs"""

    command: str
    parameters: dict[str, Any]
    seed: int | None
    input_digests: dict[str, str]
    tool_version: str = __version__
    timestamp: str = ""
    output_digests: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _timestamp() -> str:
    pinned = os.environ.get(SOURCE_DATE_EPOCH_ENV_VAR)
    moment = datetime.fromtimestamp(int(pinned), timezone.utc) if pinned else datetime.now(timezone.utc)
    return moment.isoformat()


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def data_digest() -> str:
    """SHA-256 over every bundled Hamiltonian and topology file"""
    digest = hashlib.sha256()
    data = files("libcsvqe").joinpath("data")
    for bundled_id in bundled_ids():
        digest.update(data.joinpath("n2", get_bundled_config(bundled_id)["resource"]).read_bytes())
    for name in BUNDLED_TOPOLOGIES:
        digest.update(data.joinpath("topologies", f"{name}.json").read_bytes())
    return digest.hexdigest()


def _write_outputs(output_dir: Path, outputs: dict[str, str], manifest: RunManifest) -> None:
    """Write every output and the manifest that lists their digests as one staged set"""
    digests = {name: _sha256(text) for name, text in outputs.items()}
    final = RunManifest(
        manifest.command,
        manifest.parameters,
        manifest.seed,
        manifest.input_digests,
        manifest.tool_version,
        _timestamp(),
        digests,
    )
    targets = {output_dir / name: text for name, text in outputs.items()}
    targets[output_dir / "manifest.json"] = final.to_json()
    atomic_write_files(targets)


def _load_source(args: argparse.Namespace) -> LabeledHamiltonian:
    if args.bundled is not None:
        return load_bundled(args.bundled)
    return load_hamiltonian(args.hamiltonian)


def _reference(args: argparse.Namespace, h: LabeledHamiltonian) -> str:
    if args.reference is not None:
        return str(args.reference)
    if args.bundled is not None:
        return get_bundled_config(args.bundled)["reference"]
    if h.bond_length is not None and h.n_qubits == 5:
        return reference_for_bond_length(h.bond_length)
    return "0" * h.n_qubits


def _topology(value: str | None) -> HardwareTopology | None:
    if value is None or value == "none":
        return None
    return load_topology(value)


def _adapt_config(args: argparse.Namespace, hardware: HardwareTopology | None) -> AdaptConfig:
    return AdaptConfig(
        delta_f=args.df,
        delta_c=args.dc,
        n_max=args.nmax,
        bias=BiasSettings(args.bias, args.depth, single_count=args.single_count),
        hardware=hardware,
        optimizer=OptimizerSettings(GradientMethod(args.gradient)),
    )


def _adapt_parameters(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "bias": args.bias,
        "depth": args.depth,
        "single_count": args.single_count,
        "df": args.df,
        "dc": args.dc,
        "nmax": args.nmax,
        "gradient": args.gradient,
        "topology": args.topology,
    }


def _source_digests(h: LabeledHamiltonian, topology: HardwareTopology | None) -> dict[str, str]:
    digests = {f"hamiltonian:{h.name or 'input'}": hamiltonian_digest(h)}
    if topology is not None:
        edges = json.dumps({"name": topology.name, "edges": topology.graph.edges})
        digests[f"topology:{topology.name}"] = _sha256(edges)
    return digests


def cmd_exact(args: argparse.Namespace) -> int:
    """Dense ground energy of one Hamiltonian"""
    h = _load_source(args)
    energy, state = exact_ground(h.hamiltonian)
    tag = f" (bond length {h.bond_length:.2f} angstrom)" if h.bond_length is not None else ""
    print(f"{h.name or 'hamiltonian'}: E = {energy:.10f} Ha{tag}")
    dump = {
        "name": h.name,
        "bond_length": h.bond_length,
        "n_qubits": h.n_qubits,
        "energy": energy,
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }
    manifest = RunManifest("exact", {"source": h.name}, None, _source_digests(h, None))
    _write_outputs(args.output_dir, {"exact.json": json.dumps(dump, indent=2) + "\n"}, manifest)
    return 0


def _result_document(
    h: LabeledHamiltonian,
    result: AdaptResult,
    exact: float,
    topology: HardwareTopology | None,
    args: argparse.Namespace,
) -> dict[str, Any]:
    document: dict[str, Any] = {
        "name": h.name,
        "bond_length": h.bond_length,
        "reference": result.reference,
        "reference_energy": result.reference_energy,
        "energy": result.energy,
        "exact_energy": exact,
        "error_mev": (result.energy - exact) * HARTREE_TO_MEV,
        "chemical_precision": result.energy - exact <= CHEMICAL_PRECISION_HARTREE,
        "termination": result.termination.value,
        "iterations": len(result.trace),
        "cnot_count": result.ansatz.cnot_count(),
        "generators": [[p.label, theta] for p, theta in result.generators],
    }
    if topology is not None:
        bias = IsomorphismBias(topology, BiasSettings(args.bias, args.depth, single_count=args.single_count))
        document["embeddable"] = bias.embeds(coupling_graph(result.ansatz))
    return document


def _comparison_csv(biased: AdaptResult, unbiased: AdaptResult, exact: float) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["iteration", "cnot_biased", "cnot_unbiased", "error_biased_mev", "error_unbiased_mev"])
    for index in range(max(len(biased.trace), len(unbiased.trace))):
        row: list[object] = [index + 1]
        for run in (biased, unbiased):
            row.append(run.trace[index].cnot_count if index < len(run.trace) else "")
        for run in (biased, unbiased):
            row.append(repr((run.trace[index].energy - exact) * HARTREE_TO_MEV) if index < len(run.trace) else "")
        writer.writerow(row)
    return buffer.getvalue()


def cmd_adapt(args: argparse.Namespace) -> int:
    """ADAPT run, optionally paired with the unbiased run for comparison"""
    h = _load_source(args)
    topology = _topology(args.topology)
    if args.compare and topology is None:
        raise UsageError("--compare needs a --topology to bias against")
    reference = _reference(args, h)
    exact, _ = exact_ground(h.hamiltonian)
    result = run_adapt(h, reference, _adapt_config(args, topology))
    outputs = {
        "trace.jsonl": result.to_trace_lines(),
        "ansatz.circ": result.ansatz.bind(result.theta).to_text(),
        "result.json": json.dumps(_result_document(h, result, exact, topology, args), indent=2) + "\n",
    }
    if args.compare:
        unbiased = run_adapt(h, reference, _adapt_config(args, None))
        outputs["comparison.csv"] = _comparison_csv(result, unbiased, exact)
    error_mev = (result.energy - exact) * HARTREE_TO_MEV
    print(
        f"{h.name or 'hamiltonian'}: E = {result.energy:.10f} Ha, error {error_mev:.3f} meV,"
        f" {len(result.trace)} operators, {result.ansatz.cnot_count()} CNOTs ({result.termination.value})"
    )
    parameters = _adapt_parameters(args) | {"reference": reference, "compare": args.compare}
    manifest = RunManifest("adapt", parameters, args.seed, _source_digests(h, topology))
    _write_outputs(args.output_dir, outputs, manifest)
    return 0


def _noise_model(value: str) -> NoiseModel | None:
    if value == "none":
        return None
    if value == "default":
        return NoiseModel.default()
    return NoiseModel.from_json(Path(value).read_text(encoding="utf-8"))


def _parse_lambdas(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from err


@dataclass(frozen=True)
class _PecPoint:
    name: str
    bond_length: float | None
    raw: float
    mitigated: float
    exact: float
    report: dict[str, Any] | None


def cmd_pec(args: argparse.Namespace) -> int:
    """Potential energy curve over bundled bond lengths, optionally through the noisy pipeline"""
    noise = _noise_model(args.noise)
    hardware = _topology(args.topology)
    tiles = _topology(args.tiles)
    ids = args.bundled or bundled_ids()
    hamiltonians = [load_bundled(bundled_id) for bundled_id in ids]
    workers = get_thread_count()

    def evaluate(h: LabeledHamiltonian) -> _PecPoint:
        exact, _ = exact_ground(h.hamiltonian)
        result = run_adapt(h, get_bundled_config(h.name)["reference"], _adapt_config(args, hardware))
        if noise is None:
            return _PecPoint(h.name, h.bond_length, result.energy, result.energy, exact, None)
        plan = plan_tiling(coupling_graph(result.ansatz), tiles) if tiles is not None else None
        cfg = MitigationConfig(
            lambdas=args.lambdas,
            shots=args.shots,
            tiling=plan,
            mem=args.mem,
            dd=args.dd,
            seed=args.seed,
            fit_kind=FitKind(args.fit),
            workers=1 if len(hamiltonians) > 1 else None,
        )
        mitigated = run_mitigated_energy(h, result.ansatz, result.theta, noise, cfg)
        report = dict(mitigated.report)
        return _PecPoint(h.name, h.bond_length, mitigated.report["raw_energy"], mitigated.energy, exact, report)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        points = list(executor.map(evaluate, hamiltonians))
    points.sort(key=lambda point: (point.bond_length or 0.0, point.name))

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["bond_length", "e_raw", "e_mitigated", "e_exact", "error_raw_mev", "error_mitigated_mev"])
    outputs: dict[str, str] = {}
    for point in points:
        writer.writerow(
            [
                f"{point.bond_length:.2f}" if point.bond_length is not None else "",
                repr(point.raw),
                repr(point.mitigated),
                repr(point.exact),
                repr((point.raw - point.exact) * HARTREE_TO_MEV),
                repr((point.mitigated - point.exact) * HARTREE_TO_MEV),
            ]
        )
        if point.report is not None:
            outputs[f"report_{point.name}.json"] = json.dumps(point.report, indent=2, sort_keys=True) + "\n"
        error_mev = (point.mitigated - point.exact) * HARTREE_TO_MEV
        print(f"{point.name}: E = {point.mitigated:.10f} Ha, error {error_mev:.3f} meV")
    outputs = {"pec.csv": buffer.getvalue()} | outputs

    digests = {f"hamiltonian:{h.name}": hamiltonian_digest(h) for h in hamiltonians}
    if args.noise not in ("none", "default"):
        digests["noise"] = _sha256(Path(args.noise).read_text(encoding="utf-8"))
    parameters = _adapt_parameters(args) | {
        "noise": args.noise if noise is None else noise.to_file(),
        "shots": args.shots,
        "lambdas": list(args.lambdas),
        "tiles": args.tiles,
        "mem": args.mem,
        "dd": args.dd,
        "fit": args.fit,
        "bundled": list(ids),
    }
    _write_outputs(args.output_dir, outputs, RunManifest("pec", parameters, args.seed, digests))
    return 0


def cmd_degeneracy(args: argparse.Namespace) -> int:
    """Flag near-degenerate adjacent levels in a level CSV"""
    sweep = read_level_sets(args.levels)
    flagged = scan_degeneracies(sweep, args.delta, args.threshold)
    print(f"{len(flagged)} near-degenerate pairs across {len(sweep)} bond lengths")
    text = Path(args.levels).read_text(encoding="utf-8")
    manifest = RunManifest(
        "degeneracy", {"delta": args.delta, "threshold": args.threshold}, None, {"levels": _sha256(text)}
    )
    _write_outputs(args.output_dir, {"degeneracies.csv": format_flagged_pairs(flagged)}, manifest)
    return 0


def _add_source(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--bundled", choices=bundled_ids(), help="bundled N2 Hamiltonian id")
    group.add_argument("--hamiltonian", type=Path, metavar="PATH", help="Hamiltonian file")


def _add_adapt_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--topology", default="none", help="falcon27, eagle127, a topology JSON file or none")
    parser.add_argument("--bias", type=float, default=DEFAULT_BIAS, help="bias exponent b, inf = hard constraint")
    parser.add_argument("--depth", type=int, default=DEFAULT_MAX_DEPTH, help="maximum deleted-node collection size")
    parser.add_argument("--single-count", action="store_true", help="count edges shared by deleted nodes once")
    parser.add_argument("--df", type=float, default=DEFAULT_DELTA_F, help="score tolerance")
    parser.add_argument("--dc", type=float, default=DEFAULT_DELTA_C, help="energy convergence threshold (Ha)")
    parser.add_argument("--nmax", type=int, default=DEFAULT_N_MAX, help="maximum number of ADAPT iterations")
    parser.add_argument(
        "--gradient", choices=[m.value for m in GradientMethod], default=GradientMethod.ADJOINT.value
    )
    parser.add_argument("--seed", type=int, default=0, help="random seed")


def parse_args(args: Sequence[str]) -> argparse.Namespace:
    """Parse command line parameters"""
    parser = argparse.ArgumentParser(prog="libcsvqe", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument(
        "--version", action="version", version=f"libcsvqe {__version__} (data sha256 {data_digest()})"
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="log INFO messages, twice for DEBUG"
    )
    parser.add_argument("--output-dir", type=Path, default=Path("."), help="where output files are written")
    commands = parser.add_subparsers(dest="command", required=True)

    exact = commands.add_parser("exact", help="dense ground-state energy")
    _add_source(exact)
    exact.set_defaults(handler=cmd_exact)

    adapt = commands.add_parser("adapt", help="run (hardware-aware) qubit-ADAPT-VQE")
    _add_source(adapt)
    adapt.add_argument("--reference", help="reference occupation, qubit n-1 leftmost")
    adapt.add_argument("--compare", action="store_true", help="also run the unbiased variant")
    _add_adapt_options(adapt)
    adapt.set_defaults(handler=cmd_adapt)

    pec = commands.add_parser("pec", help="potential energy curve over the bundled bond lengths")
    pec.add_argument("--bundled", action="append", choices=bundled_ids(), help="restrict to these ids")
    pec.add_argument("--noise", default="none", help="none, default or a noise model JSON file")
    pec.add_argument("--shots", type=int, default=DEFAULT_SHOTS, help="shots per clique per tile")
    pec.add_argument("--lambdas", type=_parse_lambdas, default=DEFAULT_LAMBDAS, help="noise scales, e.g. 1,2,3")
    pec.add_argument("--tiles", default="none", help="topology to tile the ansatz across, or none")
    pec.add_argument("--mem", action=argparse.BooleanOptionalAction, default=True, help="readout mitigation")
    pec.add_argument("--dd", action=argparse.BooleanOptionalAction, default=False, help="dynamical decoupling")
    pec.add_argument("--fit", choices=[kind.value for kind in FitKind], default=FitKind.LINEAR.value)
    _add_adapt_options(pec)
    pec.set_defaults(handler=cmd_pec)

    degeneracy = commands.add_parser("degeneracy", help="flag near-degenerate orbital levels")
    degeneracy.add_argument("levels", type=Path, help="CSV of bond_length, e0, e1, ...")
    degeneracy.add_argument("--delta", type=float, default=1.0, help="filtering parameter")
    degeneracy.add_argument("--threshold", type=float, default=0.5, help="minimum score to report")
    degeneracy.set_defaults(handler=cmd_degeneracy)

    return parser.parse_args(args)


def setup_logging(verbosity: int) -> None:
    """Setup basic logging on stderr"""
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logformat = "[%(asctime)s] %(levelname)s:%(name)s:%(message)s"
    logging.basicConfig(level=level, stream=sys.stderr, format=logformat, datefmt="%Y-%m-%d %H:%M:%S")


def main(args: Sequence[str]) -> int:
    """Entry point with a list of arguments, returns the exit status"""
    parsed = parse_args(args)
    setup_logging(parsed.verbose)
    try:
        status: int = parsed.handler(parsed)
    except Exception as err:
        _LOGGER.debug("Command failed", exc_info=True)
        print(f"libcsvqe: error: {err}", file=sys.stderr)
        return 1
    return status


def run() -> None:
    """Calls :func:`main` passing the CLI arguments extracted from :obj:`sys.argv`"""
    sys.exit(main(sys.argv[1:]))


class UsageError(ValueError):
    """Error to indicate a flag combination that cannot run"""


if __name__ == "__main__":
    run()
