"""Hardware coupling topologies, subgraph matching, hardware-aware biasing and circuit tiling"""

import heapq
import json
import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from importlib.resources import files
from itertools import combinations
from pathlib import Path

import networkx as nx
import numpy as np
from networkx.algorithms.isomorphism import GraphMatcher
from scipy.optimize import Bounds, LinearConstraint, milp

from .circuit import Circuit, CouplingGraph, compile_exponential, coupling_graph, slot_name
from .const import (
    BUNDLED_TOPOLOGIES,
    COLLECTION_BUDGET,
    DEFAULT_BIAS,
    DEFAULT_MAX_DEPTH,
    EXACT_TILING_MAX_CANDIDATES,
    EXACT_TILING_TIME_LIMIT,
)
from .pauli import PauliString
from .types import TopologyFile

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class HardwareTopology:
    """A named, connected device coupling graph"""

    name: str
    graph: CouplingGraph

    def __post_init__(self) -> None:
        if not self.graph.nodes:
            raise TopologyFormatError(f"topology {self.name} has no qubits")
        if not nx.is_connected(self.graph.to_networkx()):
            raise TopologyFormatError(f"topology {self.name} is not connected")

    @property
    def n_qubits(self) -> int:
        return len(self.graph.nodes)

    def to_networkx(self) -> nx.Graph:
        return self.graph.to_networkx()

    def to_file(self) -> TopologyFile:
        return {"name": self.name, "nodes": list(self.graph.nodes), "edges": [list(edge) for edge in self.graph.edges]}


def topology_from_json(text: str, source: str = "<string>") -> HardwareTopology:
    """Parse the name/nodes/edges JSON layout"""
    try:
        raw: TopologyFile = json.loads(text)
        name = str(raw["name"])
        nodes = [int(node) for node in raw["nodes"]]
        edges = [(int(u), int(v)) for u, v in raw["edges"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
        raise TopologyFormatError(f"{source}: expected name, nodes and edges: {err}") from err
    try:
        graph = CouplingGraph.from_edges(nodes, edges)
    except ValueError as err:
        raise TopologyFormatError(f"{source}: {err}") from err
    return HardwareTopology(name, graph)


def load_topology(name_or_path: str | Path) -> HardwareTopology:
    """Load falcon27, eagle127 or a topology JSON file"""
    if isinstance(name_or_path, str) and name_or_path in BUNDLED_TOPOLOGIES:
        resource = files("libcsvqe").joinpath("data", "topologies", f"{name_or_path}.json")
        return topology_from_json(resource.read_text(encoding="utf-8"), name_or_path)
    path = Path(name_or_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise TopologyFormatError(f"cannot read topology {name_or_path}: {err}") from err
    return topology_from_json(text, str(path))


def _without_isolated(graph: nx.Graph) -> nx.Graph:
    return graph.subgraph([node for node in graph.nodes if graph.degree(node) > 0])


def _find_monomorphism(pattern: nx.Graph, target: nx.Graph) -> dict[int, int] | None:
    """Pattern node -> target node map preserving pattern edges, isolated pattern nodes placed last"""
    if pattern.number_of_nodes() > target.number_of_nodes():
        return None
    core = _without_isolated(pattern)
    matcher = GraphMatcher(target, core)
    if not matcher.subgraph_is_monomorphic():
        return None
    witness = {pattern_node: target_node for target_node, pattern_node in matcher.mapping.items()}
    free = sorted(set(target.nodes) - set(witness.values()))
    isolated = sorted(node for node in pattern.nodes if node not in witness)
    witness.update(zip(isolated, free))
    return witness


def subgraph_isomorphic(g: CouplingGraph, h: CouplingGraph) -> tuple[bool, dict[int, int] | None]:
    """Whether g embeds into h, with one witness mapping from g nodes to h nodes"""
    witness = _find_monomorphism(g.to_networkx(), h.to_networkx())
    return witness is not None, witness


@dataclass(frozen=True)
class BiasSettings:
    """Parameters of the hardware-aware bias search; b = inf scores every non-embeddable extension zero"""

    b: float = DEFAULT_BIAS
    max_depth: int = DEFAULT_MAX_DEPTH
    budget: int = COLLECTION_BUDGET
    single_count: bool = False

    def __post_init__(self) -> None:
        if not self.b > 0:
            raise InvalidBiasSettingsError(f"bias exponent must be positive, got {self.b}")
        if self.max_depth < 0:
            raise InvalidBiasSettingsError(f"maximum depth must be nonnegative, got {self.max_depth}")
        if self.budget < 1:
            raise InvalidBiasSettingsError(f"collection budget must be positive, got {self.budget}")


def collection_weight(graph: CouplingGraph, collection: Iterable[int], single_count: bool = False) -> int:
    """s(n): per-node incident weights summed over the collection; single_count counts shared edges once"""
    members = set(collection)
    if single_count:
        return sum(weight for edge, weight in graph.weights.items() if not members.isdisjoint(edge))
    return sum(graph.node_weight(node) for node in members)


class IsomorphismBias:
    """Scores how far a circuit graph is from embedding into one target"""

    def __init__(self, target: HardwareTopology, settings: BiasSettings | None = None) -> None:
        self.target = target
        self.settings = settings or BiasSettings()
        self._target_graph = target.to_networkx()
        self._embeds: dict[frozenset[tuple[int, int]], bool] = {}

    def embeds(self, graph: CouplingGraph) -> bool:
        """Whether the graph, isolated nodes aside, is already embeddable"""
        key = frozenset(edge for edge, weight in graph.weights.items() if weight > 0)
        cached = self._embeds.get(key)
        if cached is None:
            pattern = nx.Graph()
            pattern.add_edges_from(key)
            cached = _find_monomorphism(pattern, self._target_graph) is not None
            self._embeds[key] = cached
        return cached

    def for_graph(self, graph: CouplingGraph) -> float:
        """1 when embeddable, else (1 - s/W)^b for the lightest deletable collection, 0 past the depth limit"""
        if self.embeds(graph):
            return 1.0
        total = graph.total_weight
        candidates = [node for node in graph.nodes if graph.node_weight(node) > 0]
        for depth in range(1, self.settings.max_depth + 1):
            collections = heapq.nsmallest(
                self.settings.budget,
                (
                    (collection_weight(graph, collection, self.settings.single_count), collection)
                    for collection in combinations(candidates, depth)
                ),
            )
            for weight, collection in collections:
                if self.embeds(graph.without(collection)):
                    _LOGGER.debug(
                        "Embeddable after deleting %s at depth %d (s=%d, W=%d)", collection, depth, weight, total
                    )
                    return max(0.0, 1.0 - weight / total) ** self.settings.b
        return 0.0

    def __call__(self, p: PauliString, circuit: Circuit) -> float:
        extended = circuit.then(compile_exponential(p, slot_name(len(circuit.parameter_slots))))
        return self.for_graph(coupling_graph(extended))


def isomorphism_bias(
    p: PauliString,
    circuit: Circuit,
    target: HardwareTopology,
    b: float = DEFAULT_BIAS,
    max_depth: int = DEFAULT_MAX_DEPTH,
    single_count: bool = False,
) -> float:
    """Hardware-aware bias of appending exp(i theta P) to the circuit"""
    return IsomorphismBias(target, BiasSettings(b, max_depth, single_count=single_count))(p, circuit)


@dataclass(frozen=True)
class TilingBlock:
    """One replica: hardware nodes and the circuit qubit to hardware qubit map"""

    nodes: frozenset[int]
    mapping: Mapping[int, int]


@dataclass(frozen=True)
class TilingPlan:
    """Disjoint circuit replicas across a device"""

    blocks: tuple[TilingBlock, ...]
    unused: frozenset[int] = field(default_factory=frozenset)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)


class _TilingSearch:
    """Greedy packing through the most constrained node, with optional one-step rollout and an exact fallback"""

    def __init__(self, pattern: nx.Graph, target: nx.Graph) -> None:
        self.pattern = pattern
        self.target = target
        self.k = pattern.number_of_nodes()

    def capacity(self, remaining: set[int]) -> int:
        return sum(len(c) // self.k for c in nx.connected_components(self.target.subgraph(remaining)))

    def _connected_subsets(self, anchor: int, remaining: set[int]) -> list[tuple[int, ...]]:
        frontier = {frozenset([anchor])}
        for _ in range(self.k - 1):
            grown = set()
            for subset in frontier:
                for node in subset:
                    for neighbor in self.target.adj[node]:
                        if neighbor in remaining and neighbor not in subset:
                            grown.add(subset | {neighbor})
            frontier = grown
        return sorted(tuple(sorted(subset)) for subset in frontier)

    def _rank(self, rest: set[int], nodes: tuple[int, ...]) -> tuple[int, int, tuple[int, ...]]:
        view = self.target.subgraph(rest)
        waste = sum(len(c) % self.k for c in nx.connected_components(view))
        leaves = sum(1 for node in rest if view.degree(node) <= 1)
        return waste, leaves, nodes

    def _candidates(self, anchor: int, remaining: set[int]) -> list[tuple[tuple[int, ...], dict[int, int]]]:
        found = []
        for nodes in self._connected_subsets(anchor, remaining):
            witness = _find_monomorphism(self.pattern, self.target.subgraph(nodes))
            if witness is not None:
                found.append((nodes, witness))
        found.sort(key=lambda item: self._rank(remaining - set(item[0]), item[0]))
        return found

    def run(self, remaining: set[int], lookahead: bool = False) -> TilingPlan:
        remaining = set(remaining)
        blocks: list[TilingBlock] = []
        unused: set[int] = set()
        while len(remaining) >= self.k:
            view = self.target.subgraph(remaining)
            anchor = min(remaining, key=lambda node: (view.degree(node), node))
            candidates = self._candidates(anchor, remaining)
            if not candidates:
                unused.add(anchor)
                remaining.discard(anchor)
                continue
            chosen = candidates[0]
            if lookahead and len(candidates) > 1:
                outcomes = [self.run(remaining - set(nodes)).n_blocks for nodes, _ in candidates]
                chosen = candidates[outcomes.index(max(outcomes))]
            nodes, witness = chosen
            blocks.append(TilingBlock(frozenset(nodes), witness))
            remaining -= set(nodes)
        unused |= remaining
        return TilingPlan(tuple(blocks), frozenset(unused))

    def exact(self, remaining: set[int]) -> TilingPlan | None:
        """Maximum set packing over every embeddable connected subset, as a 0/1 program"""
        subsets: set[tuple[int, ...]] = set()
        for anchor in sorted(remaining):
            subsets.update(self._connected_subsets(anchor, remaining))
            if len(subsets) > EXACT_TILING_MAX_CANDIDATES:
                _LOGGER.warning("Exact tiling skipped, more than %d candidate blocks", EXACT_TILING_MAX_CANDIDATES)
                return None
        candidates = []
        for nodes in sorted(subsets):
            witness = _find_monomorphism(self.pattern, self.target.subgraph(nodes))
            if witness is not None:
                candidates.append((nodes, witness))
        if not candidates:
            return TilingPlan((), frozenset(remaining))

        rows = {node: row for row, node in enumerate(sorted(remaining))}
        incidence = np.zeros((len(rows), len(candidates)))
        for column, (nodes, _) in enumerate(candidates):
            incidence[[rows[node] for node in nodes], column] = 1.0
        result = milp(
            c=-np.ones(len(candidates)),
            constraints=LinearConstraint(incidence, -np.inf, 1.0),
            integrality=np.ones(len(candidates)),
            bounds=Bounds(0.0, 1.0),
            options={"time_limit": EXACT_TILING_TIME_LIMIT},
        )
        if result.x is None:
            _LOGGER.warning("Exact tiling failed: %s", result.message)
            return None
        blocks = tuple(
            TilingBlock(frozenset(candidates[column][0]), candidates[column][1])
            for column in np.flatnonzero(result.x > 0.5)
        )
        used = {node for block in blocks for node in block.nodes}
        return TilingPlan(blocks, frozenset(remaining - used))


def plan_tiling(circuit_graph: CouplingGraph, target: HardwareTopology) -> TilingPlan:
    """Pack disjoint replicas of the circuit graph onto the target

    Greedy first, then a one-step rollout, then an exact set packing while the count
    stays below the per-component capacity bound.
    """
    pattern = circuit_graph.to_networkx()
    target_graph = target.to_networkx()
    if _find_monomorphism(pattern, target_graph) is None:
        raise NotEmbeddableError(f"the circuit graph does not embed into {target.name}")
    search = _TilingSearch(pattern, target_graph)
    everything = set(target_graph.nodes)
    plan = search.run(everything)
    bound = search.capacity(everything)
    if plan.n_blocks < bound:
        _LOGGER.debug("Greedy tiling placed %d of at most %d blocks, retrying with rollout", plan.n_blocks, bound)
        rollout = search.run(everything, lookahead=True)
        if rollout.n_blocks > plan.n_blocks:
            plan = rollout
    if plan.n_blocks < bound:
        _LOGGER.debug("Rollout placed %d of at most %d blocks, solving the exact packing", plan.n_blocks, bound)
        exact = search.exact(everything)
        if exact is not None and exact.n_blocks > plan.n_blocks:
            plan = exact
    if plan.n_blocks < bound:
        _LOGGER.warning("Tiling placed %d blocks on %s, capacity bound is %d", plan.n_blocks, target.name, bound)
    _LOGGER.debug("Tiling on %s: %d blocks, unused %s", target.name, plan.n_blocks, sorted(plan.unused))
    return plan


def validate_plan(plan: TilingPlan, circuit_graph: CouplingGraph, target: HardwareTopology) -> None:
    """Raise unless blocks are disjoint and every witness maps circuit edges onto target edges"""
    target_nodes = set(target.graph.nodes)
    target_edges = set(target.graph.weights)
    claimed: set[int] = set()
    for index, block in enumerate(plan.blocks):
        if set(block.mapping) != set(circuit_graph.nodes):
            raise InvalidTilingPlanError(f"block {index} does not map every circuit qubit")
        image = set(block.mapping.values())
        if len(image) != len(block.mapping) or image != set(block.nodes):
            raise InvalidTilingPlanError(f"block {index} mapping is not a bijection onto its nodes")
        if not image <= target_nodes:
            raise InvalidTilingPlanError(f"block {index} uses qubits outside {target.name}")
        if claimed & image:
            raise InvalidTilingPlanError(f"block {index} overlaps an earlier block")
        claimed |= image
        for u, v in circuit_graph.weights:
            a, b = block.mapping[u], block.mapping[v]
            if (min(a, b), max(a, b)) not in target_edges:
                raise InvalidTilingPlanError(f"block {index} maps edge ({u}, {v}) onto a non-edge ({a}, {b})")
    if claimed & plan.unused:
        raise InvalidTilingPlanError("a qubit is both used and unused")


class TopologyFormatError(ValueError):
    """Error to indicate a topology file cannot be read"""


class NotEmbeddableError(ValueError):
    """Error to indicate the circuit graph fits nowhere on the target"""


class InvalidBiasSettingsError(ValueError):
    """Error to indicate bias search parameters out of range"""


class InvalidTilingPlanError(ValueError):
    """Error to indicate a tiling plan with overlapping or invalid blocks"""
