import json
import math
from itertools import combinations, permutations
from pathlib import Path

import networkx as nx
import numpy as np
import pytest
from conftest import word

from libcsvqe.circuit import CouplingGraph, compile_ansatz, coupling_graph
from libcsvqe.topology import (
    BiasSettings,
    HardwareTopology,
    InvalidBiasSettingsError,
    InvalidTilingPlanError,
    IsomorphismBias,
    NotEmbeddableError,
    TilingBlock,
    TilingPlan,
    TopologyFormatError,
    collection_weight,
    isomorphism_bias,
    load_topology,
    plan_tiling,
    subgraph_isomorphic,
    topology_from_json,
    validate_plan,
)

CHAIN5 = CouplingGraph.from_edges(range(5), [(0, 1), (1, 2), (2, 3), (3, 4)])
TRIANGLE = CouplingGraph.from_edges(range(3), [(0, 1), (1, 2), (0, 2)])
STAR5 = CouplingGraph.from_edges(range(5), [(0, 1), (0, 2), (0, 3), (0, 4)])
K4 = CouplingGraph.from_edges(range(4), combinations(range(4), 2))


def _brute_force_embeds(pattern: CouplingGraph, target: CouplingGraph) -> bool:
    target_edges = set(target.weights)
    for image in permutations(target.nodes, len(pattern.nodes)):
        mapping = dict(zip(pattern.nodes, image))
        if all((min(mapping[u], mapping[v]), max(mapping[u], mapping[v])) in target_edges for u, v in pattern.weights):
            return True
    return False


def _as_coupling_graph(graph: nx.Graph) -> CouplingGraph:
    return CouplingGraph.from_edges(graph.nodes, graph.edges)


def test_bundled_topologies(falcon: HardwareTopology, eagle: HardwareTopology) -> None:
    """load_topology() should load connected heavy-hex devices"""
    assert falcon.n_qubits == 27
    assert len(falcon.graph.edges) == 28
    assert eagle.n_qubits == 127
    assert len(eagle.graph.edges) == 144
    for topology in (falcon, eagle):
        graph = topology.to_networkx()
        assert nx.is_connected(graph)
        assert max(degree for _, degree in graph.degree) == 3


def test_load_topology_from_file(tmp_path: Path) -> None:
    """load_topology() should read a JSON file and reject disconnected or malformed ones"""
    path = tmp_path / "line.json"
    path.write_text(json.dumps({"name": "line", "nodes": [0, 1, 2], "edges": [[0, 1], [1, 2]]}), encoding="utf-8")
    topology = load_topology(path)
    assert topology.name == "line"
    assert topology.graph.edges == [(0, 1), (1, 2)]

    path.write_text(json.dumps({"name": "split", "nodes": [0, 1, 2], "edges": [[0, 1]]}), encoding="utf-8")
    with pytest.raises(TopologyFormatError):
        load_topology(path)
    path.write_text(json.dumps({"name": "broken", "nodes": [0, 1]}), encoding="utf-8")
    with pytest.raises(TopologyFormatError):
        load_topology(path)
    with pytest.raises(TopologyFormatError):
        load_topology(tmp_path / "missing.json")


def test_subgraph_isomorphic_on_falcon(falcon: HardwareTopology) -> None:
    """subgraph_isomorphic() should reject triangles and degree-4 hubs on heavy-hex and return valid witnesses"""
    assert subgraph_isomorphic(TRIANGLE, falcon.graph) == (False, None)
    assert subgraph_isomorphic(STAR5, falcon.graph) == (False, None)
    found, witness = subgraph_isomorphic(CHAIN5, falcon.graph)
    assert found
    assert witness is not None
    assert len(set(witness.values())) == 5
    for u, v in CHAIN5.edges:
        a, b = witness[u], witness[v]
        assert (min(a, b), max(a, b)) in falcon.graph.weights


def test_subgraph_isomorphic_places_isolated_nodes(falcon: HardwareTopology) -> None:
    """subgraph_isomorphic() should map isolated circuit qubits onto distinct free device qubits"""
    pattern = CouplingGraph.from_edges(range(5), [(0, 1)])
    found, witness = subgraph_isomorphic(pattern, falcon.graph)
    assert found
    assert witness is not None
    assert sorted(witness) == [0, 1, 2, 3, 4]
    assert len(set(witness.values())) == 5


def test_subgraph_isomorphic_matches_brute_force() -> None:
    """subgraph_isomorphic() should agree with exhaustive enumeration on random graphs of up to 7 target nodes"""
    rng = np.random.default_rng(9)
    for case in range(500):
        n_target = int(rng.integers(2, 8))
        n_pattern = int(rng.integers(1, min(n_target, 5) + 1))
        target = _as_coupling_graph(nx.gnp_random_graph(n_target, float(rng.uniform(0.2, 0.8)), seed=2 * case))
        pattern = _as_coupling_graph(nx.gnp_random_graph(n_pattern, float(rng.uniform(0.2, 0.8)), seed=2 * case + 1))
        found, witness = subgraph_isomorphic(pattern, target)
        assert found is _brute_force_embeds(pattern, target), case
        if found:
            assert witness is not None
            assert len(set(witness.values())) == len(pattern.nodes)
            for u, v in pattern.edges:
                assert (min(witness[u], witness[v]), max(witness[u], witness[v])) in target.weights


def test_collection_weight() -> None:
    """collection_weight() should double count shared edges unless single_count is set"""
    assert collection_weight(K4, [0, 1]) == 6
    assert collection_weight(K4, [0, 1], single_count=True) == 5
    weighted = CouplingGraph((0, 1, 2), {(0, 1): 2, (1, 2): 1})
    assert collection_weight(weighted, [1]) == 3


def test_bias_is_one_when_embeddable(falcon: HardwareTopology) -> None:
    """isomorphism_bias() should return 1 when the extended circuit already fits"""
    circuit = compile_ansatz("00000", [word("IIIXY")])
    assert isomorphism_bias(word("IIXYI"), circuit, falcon) == 1.0
    assert isomorphism_bias(word("YIIII"), compile_ansatz("00000", []), falcon) == 1.0


def test_bias_of_k4(falcon: HardwareTopology) -> None:
    """IsomorphismBias for_graph() should score K4 zero, or 1/6 when shared edges count once"""
    assert IsomorphismBias(falcon).for_graph(K4) == 0.0
    single = IsomorphismBias(falcon, BiasSettings(single_count=True)).for_graph(K4)
    assert single == pytest.approx(1 / 6)
    assert IsomorphismBias(falcon, BiasSettings(max_depth=1)).for_graph(K4) == 0.0


def test_bias_of_star(falcon: HardwareTopology) -> None:
    """IsomorphismBias for_graph() should delete the lightest leaf of a degree-4 hub"""
    assert IsomorphismBias(falcon).for_graph(STAR5) == pytest.approx(0.75)
    assert IsomorphismBias(falcon, BiasSettings(b=2.0)).for_graph(STAR5) == pytest.approx(0.5625)


def test_bias_prefers_hardware_friendly_operators(falcon: HardwareTopology) -> None:
    """isomorphism_bias() should penalise an operator that closes a triangle"""
    circuit = compile_ansatz("00000", [word("IIIXY"), word("IIXYI")])
    assert coupling_graph(circuit).edges == [(0, 1), (1, 2)]
    assert isomorphism_bias(word("IIXIY"), circuit, falcon) < 1.0
    assert isomorphism_bias(word("IXYII"), circuit, falcon) == 1.0


def test_bias_settings_validation() -> None:
    """BiasSettings should reject non-positive exponents and negative depths"""
    with pytest.raises(InvalidBiasSettingsError):
        BiasSettings(b=0.0)
    with pytest.raises(InvalidBiasSettingsError):
        BiasSettings(max_depth=-1)


def test_plan_tiling_falcon_chain(falcon: HardwareTopology) -> None:
    """plan_tiling() should pack five 5-qubit chains onto Falcon, leaving two qubits unused"""
    plan = plan_tiling(CHAIN5, falcon)
    validate_plan(plan, CHAIN5, falcon)
    assert plan.n_blocks == 5
    assert plan.unused == frozenset({6, 17})
    assert {frozenset(block.nodes) for block in plan.blocks} == {
        frozenset({0, 1, 2, 3, 5}),
        frozenset({4, 7, 10, 12, 13}),
        frozenset({8, 9, 11, 14, 16}),
        frozenset({15, 18, 21, 23, 24}),
        frozenset({19, 20, 22, 25, 26}),
    }


def test_plan_tiling_single_qubit(falcon: HardwareTopology) -> None:
    """plan_tiling() should place a 1-qubit circuit on every device qubit"""
    pattern = CouplingGraph((0,), {})
    plan = plan_tiling(pattern, falcon)
    validate_plan(plan, pattern, falcon)
    assert plan.n_blocks == 27
    assert not plan.unused


def test_plan_tiling_rejects_unembeddable(falcon: HardwareTopology) -> None:
    """plan_tiling() should raise when the circuit fits nowhere"""
    with pytest.raises(NotEmbeddableError):
        plan_tiling(TRIANGLE, falcon)


@pytest.mark.slow
def test_plan_tiling_eagle_chain(eagle: HardwareTopology) -> None:
    """plan_tiling() should pack 25 5-qubit chains onto Eagle"""
    plan = plan_tiling(CHAIN5, eagle)
    validate_plan(plan, CHAIN5, eagle)
    assert plan.n_blocks >= 25
    assert plan.n_blocks * 5 + len(plan.unused) == 127


def test_validate_plan_rejects_bad_blocks(falcon: HardwareTopology) -> None:
    """validate_plan() should reject overlapping blocks and witnesses onto non-edges"""
    edge = CouplingGraph.from_edges(range(2), [(0, 1)])
    overlapping = TilingPlan(
        (TilingBlock(frozenset({0, 1}), {0: 0, 1: 1}), TilingBlock(frozenset({1, 4}), {0: 1, 1: 4}))
    )
    with pytest.raises(InvalidTilingPlanError):
        validate_plan(overlapping, edge, falcon)
    non_edge = TilingPlan((TilingBlock(frozenset({0, 2}), {0: 0, 1: 2}),))
    with pytest.raises(InvalidTilingPlanError):
        validate_plan(non_edge, edge, falcon)
    good = TilingPlan((TilingBlock(frozenset({0, 1}), {0: 0, 1: 1}),), frozenset({2}))
    validate_plan(good, edge, falcon)


def _max_packing(blocks: list[frozenset[int]]) -> int:
    if not blocks:
        return 0
    node = min(min(block) for block in blocks)
    others = [block for block in blocks if node not in block]
    best = _max_packing(others)
    for block in blocks:
        if node in block:
            best = max(best, 1 + _max_packing([other for other in others if other.isdisjoint(block)]))
    return best


def test_plan_tiling_is_maximum_on_small_graphs() -> None:
    """plan_tiling() should place as many 3-qubit chains as an exhaustive packing search"""
    chain3 = CouplingGraph.from_edges(range(3), [(0, 1), (1, 2)])
    checked = 0
    for seed in range(60):
        graph = nx.gnp_random_graph(9, 0.35, seed=seed)
        if not nx.is_connected(graph):
            continue
        paths = {
            frozenset((a, center, b)) for center in graph.nodes for a, b in combinations(sorted(graph.adj[center]), 2)
        }
        if not paths:
            continue
        topology = HardwareTopology(f"random{seed}", _as_coupling_graph(graph))
        plan = plan_tiling(chain3, topology)
        validate_plan(plan, chain3, topology)
        assert plan.n_blocks == _max_packing(sorted(paths, key=sorted)), seed
        checked += 1
    assert checked >= 10


def test_topology_file_round_trip(falcon: HardwareTopology) -> None:
    """HardwareTopology to_file() should give the JSON layout the loader reads back"""
    layout = falcon.to_file()
    assert layout["name"] == "falcon27"
    assert len(layout["edges"]) == 28
    assert topology_from_json(json.dumps(layout)) == falcon


def test_strict_bias_forbids_growth_off_device(falcon: HardwareTopology) -> None:
    """IsomorphismBias with an infinite exponent should score only embeddable graphs above zero"""
    strict = IsomorphismBias(falcon, BiasSettings(b=math.inf))
    assert strict.for_graph(STAR5) == 0.0
    assert strict.for_graph(CHAIN5) == 1.0
    with pytest.raises(InvalidBiasSettingsError):
        BiasSettings(b=math.nan)
