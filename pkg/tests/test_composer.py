import math

import numpy as np
import pytest

from brute import exact_apsp, families, path_weight
from prdo.composer import (ALL_PRESETS, PRESETS, ClusterGraph, ExactInner, _inner_builder, build_preset,
                           build_stretch_friendly_partition, compose_prdo, compose_with_partition,
                           select_params, wrap_t)
from prdo.generators import erdos_renyi, path_graph
from prdo.graph import WeightedGraph


@pytest.mark.parametrize("preset", sorted(PRESETS))
@pytest.mark.parametrize("n,k,eps", [(300, 6, 0.5), (1000, 9, 0.25), (200, 3, 0.5), (500, 5, 0.1)])
def test_select_params(preset, n, k, eps):
    p = select_params(n, k, eps, preset)
    h = p["h"]
    assert h % 2 == 0 and 2 <= h <= max(2, k - 1)
    assert p["k1"] == math.ceil(k * (1 + 2 * eps) / h - 1e-12)
    if PRESETS[preset].preserver == "v1":
        assert p["eps_preserver"] == pytest.approx(eps / 12)


def test_select_params_domain():
    with pytest.raises(ValueError):
        select_params(100, 8, 0.5)
    with pytest.raises(ValueError):
        select_params(100, 2, 0.5, strict=False)
    with pytest.raises(ValueError):
        select_params(100, 4, 0.75)
    assert select_params(100, 8, 0.5, strict=False)["h"] == 6


@pytest.mark.parametrize("preset", ["thm6.1", "row2", "row6"])
def test_composed_all_pairs(preset):
    g = erdos_renyi(160, 0.03, seed=5)
    D = exact_apsp(g)
    o = compose_prdo(g, 5, 0.5, preset=preset, seed=3)
    kinds = set()
    for u in range(g.n):
        for v in range(u + 1, g.n):
            p, ops, kind = o.query_ops(u, v)
            kinds.add(kind)
            assert path_weight(g, p, u, v, allowed=o.edges) <= o.declared_stretch * D[u, v] * (1 + 1e-9)
    assert "escape" in kinds
    assert o.size_words == sum(o.size_breakdown().values())


def test_explicit_component_choice():
    g = erdos_renyi(120, 0.04, seed=1)
    o = compose_prdo(g, 5, 0.5, emulator_kind="ap", preserver_kind="3eps", seed=0)
    assert o.preset == "ap+3eps"
    assert o.params["emulator"] == "ap" and o.params["preserver"] == "3eps"


def _partition_violations(part):
    return {k: v for k, v in part.check().items() if k in ("depth", "outgoing", "internal") and v}


@pytest.mark.parametrize("t", [1, 2, 3, 5, 9])
def test_partition_properties(t):
    for seed in range(3):
        for name, g in families(150, seed):
            part = build_stretch_friendly_partition(g, t)
            assert not _partition_violations(part), name
            assert part.count <= g.n / t
            assert part.max_depth < 3 * t or t == 1
            # roots are the only parentless vertices, one per cluster
            assert set(np.nonzero(part.parent < 0)[0].tolist()) == set(part.roots.tolist())


def test_partition_t1_is_singletons():
    g = erdos_renyi(30, 0.1, seed=0)
    part = build_stretch_friendly_partition(g, 1)
    assert part.count == 30 and part.max_depth == 0
    with pytest.raises(ValueError):
        build_stretch_friendly_partition(g, 0)


def test_cluster_graph_keeps_lightest_witness():
    g = WeightedGraph.from_edges(4, [(0, 1, 1), (2, 3, 1), (0, 2, 9), (1, 3, 4), (0, 3, 6)])
    part = build_stretch_friendly_partition(g, 2)
    assert part.count == 2
    cg = ClusterGraph.build(part)
    assert cg.graph.m == 1 and cg.graph.ew[0] == 4
    assert {int(g.eu[cg.witness[0]]), int(g.ev[cg.witness[0]])} == {1, 3}


@pytest.mark.parametrize("ultra", [False, True])
def test_wrap_answers(ultra):
    g = erdos_renyi(150, 0.03, seed=8)
    D = exact_apsp(g)
    o = compose_with_partition(g, 3, _inner_builder(4, 0.5, 0), ultra=ultra)
    for u in range(0, g.n, 2):
        for v in range(1, g.n, 3):
            if u != v:
                w = path_weight(g, o.query(u, v), u, v, allowed=o.edges)
                assert w <= o.declared_stretch * D[u, v] * (1 + 1e-9)


def test_exact_inner_and_small_cluster_graphs():
    g = path_graph(12, seed=0)
    inner = ExactInner(g)
    p, ops, kind = inner.query_ops(0, 11)
    assert p.weight == pytest.approx(exact_apsp(g)[0, 11]) and kind == "direct"
    # a tiny graph falls back to the exact inner oracle
    o = compose_with_partition(g, 4, _inner_builder(4, 0.5, 0))
    assert isinstance(o.inner, ExactInner)


def test_presets_and_wrap_t():
    assert set(PRESETS) | {"thm6.3", "ultra"} == set(ALL_PRESETS)
    assert wrap_t(256, 6, "ultra") == 3
    assert wrap_t(256, 6, "thm6.3") == math.ceil(6 * 3 / 8)
    with pytest.raises(ValueError):
        build_preset(erdos_renyi(50, 0.1), 4, 0.5, "nope")


def test_disconnected_graph_wrap():
    g = WeightedGraph.from_edges(20, [(i, i + 1, 1 + i % 3) for i in range(9)] +
                                 [(i, i + 1, 2) for i in range(10, 19)])
    o = build_preset(g, 3, 0.5, "ultra", strict=False)
    assert o.query(0, 15) is None
    assert o.query(0, 9).weight == pytest.approx(exact_apsp(g)[0, 9])
