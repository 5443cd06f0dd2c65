"""
Tests for the co-membership projection, statistics and graph I/O
"""
import itertools
import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from cover import Cover
from data_loader import AffiliationDataset, DataError, GroupRecord, MembershipRecord
from network import (
    compute_stats, count_above, induced_subgraph, intra_community, load_graph, plot_weight_distribution,
    project, shared_members, stats_table, write_graph,
)


def dataset_from(members_of):
    return AffiliationDataset.build(
        [GroupRecord(gid, f"Group {gid}", description=f"About {gid}") for gid in members_of],
        [MembershipRecord(u, gid) for gid, users in members_of.items() for u in users],
    )


def test_project_small_example():
    ds = dataset_from({
        "A": {"u1", "u2", "u3"},
        "B": {"u2", "u3", "u4"},
        "C": {"u3"},
        "D": {"u9"},
    })
    g = project(ds)

    assert g.nodes == ["A", "B", "C", "D"]
    assert g.weight("A", "B") == 0.5
    assert g.weight("A", "C") == pytest.approx(1 / 3)
    assert g.weight("B", "C") == pytest.approx(1 / 3)
    assert g.weight("A", "D") == 0.0
    assert g.edge_count == 3
    assert g.graph.nodes["A"]["members"] == 3
    assert g.graph.nodes["A"]["description"] == "About A"


def test_project_matches_brute_force_jaccard():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n_groups = int(rng.integers(1, 51))
        n_users = int(rng.integers(1, 201))
        members_of = {
            f"g{i:02d}": {f"u{u}" for u in rng.choice(n_users, size=int(rng.integers(0, min(n_users, 15) + 1)), replace=False)}
            for i in range(n_groups)
        }
        g = project(dataset_from(members_of))

        expected = {}
        for a, b in itertools.combinations(sorted(members_of), 2):
            inter = len(members_of[a] & members_of[b])
            if inter:
                expected[(a, b)] = float(Fraction(inter, len(members_of[a] | members_of[b])))
        assert {(u, v): w for u, v, w in g.edges()} == expected


def test_project_ignores_input_order():
    rng = np.random.default_rng(5)
    for _ in range(20):
        members_of = {
            f"g{i:02d}": {f"u{u}" for u in rng.choice(40, size=int(rng.integers(0, 10)), replace=False)}
            for i in range(int(rng.integers(2, 25)))
        }
        ids = sorted(members_of)
        shuffled = {ids[i]: members_of[ids[i]] for i in rng.permutation(len(ids))}
        assert project(dataset_from(shuffled)) == project(dataset_from(members_of))


def test_project_unchanged_when_every_user_is_cloned():
    rng = np.random.default_rng(6)
    for _ in range(20):
        members_of = {
            f"g{i:02d}": {f"u{u}" for u in rng.choice(60, size=int(rng.integers(1, 12)), replace=False)}
            for i in range(int(rng.integers(2, 20)))
        }
        doubled = {gid: users | {f"{u}_twin" for u in users} for gid, users in members_of.items()}
        assert list(project(dataset_from(doubled)).edges()) == list(project(dataset_from(members_of)).edges())


def test_unit_weight_iff_equal_member_sets():
    rng = np.random.default_rng(7)
    for _ in range(50):
        pool = [frozenset(f"u{u}" for u in rng.choice(8, size=int(rng.integers(1, 5)), replace=False)) for _ in range(4)]
        members_of = {f"g{i:02d}": set(pool[int(rng.integers(0, len(pool)))]) for i in range(10)}
        g = project(dataset_from(members_of))
        for a, b in itertools.combinations(sorted(members_of), 2):
            if members_of[a] & members_of[b]:
                assert (g.weight(a, b) == 1.0) == (members_of[a] == members_of[b])


def test_project_min_weight_is_strict():
    ds = dataset_from({"A": {"u1", "u2"}, "B": {"u2", "u3"}, "C": {"u1", "u2"}})
    g = project(ds, min_weight=1 / 3)

    # A-B and B-C have weight exactly 1/3 and are dropped
    assert [(u, v) for u, v, _ in g.edges()] == [("A", "C")]
    assert g.node_count == 3


def test_project_rejects_negative_min_weight():
    with pytest.raises(DataError):
        project(dataset_from({"A": {"u1"}}), min_weight=-0.1)


def test_weights_lie_in_unit_interval(sample_graph):
    weights = sample_graph.weights()
    assert len(weights) > 0
    assert np.all((weights > 0) & (weights <= 1))


# ==================== statistics ====================

def test_compute_stats(make_graph):
    g = make_graph([("a", "b", 0.5), ("b", "c", 0.1), ("d", "e", 0.2)], nodes=["f"])
    stats = compute_stats(g, thresholds=[0.1, 0.5])

    assert stats.node_count == 6
    assert stats.edge_count_undirected == 3
    assert stats.ordered_pair_count == 6
    assert stats.density == pytest.approx(3 / 15)
    assert stats.component_count == 3
    assert stats.largest_component_size == 3
    assert stats.weight_quantiles == {0.1: pytest.approx(1 / 3), 0.5: 1.0}
    assert stats.weight_max == 0.5
    assert stats.weight_median == pytest.approx(0.2)


def test_density_matches_definition(sample_graph):
    stats = compute_stats(sample_graph)
    n = stats.node_count
    assert stats.density == pytest.approx(stats.edge_count_undirected / (n * (n - 1) / 2))


def test_ordered_pair_density_reconciliation():
    # A published edge count of 1,416,326 over 1,482 groups only fits as ordered pairs
    undirected = 1_416_326 / 2
    assert undirected <= math.comb(1482, 2)
    assert undirected / math.comb(1482, 2) == pytest.approx(0.6453, abs=0.0005)


def test_compute_stats_empty_graph(make_graph):
    stats = compute_stats(make_graph([]), thresholds=[0.5])
    assert stats.node_count == 0
    assert stats.density == 0.0
    assert stats.weight_quantiles == {0.5: 0.0}


def test_stats_table_lists_thresholds(sample_graph):
    table = stats_table(compute_stats(sample_graph, [0.1]))
    assert list(table.columns) == ["metric", "value"]
    assert "fraction weight <= 0.1" in set(table["metric"])


# ==================== subgraphs ====================

def test_induced_subgraph(make_graph):
    g = make_graph([("a", "b", 0.5), ("b", "c", 0.1), ("c", "d", 0.2)])
    sub = induced_subgraph(g, ["a", "b", "c"])

    assert sub.nodes == ["a", "b", "c"]
    assert list(sub.edges()) == [("a", "b", 0.5), ("b", "c", 0.1)]


def test_induced_subgraph_unknown_node(make_graph):
    g = make_graph([("a", "b", 0.5)])
    with pytest.raises(DataError, match="zzz"):
        induced_subgraph(g, ["a", "zzz"])


def test_intra_community_keeps_only_shared_edges(make_graph):
    g = make_graph([("a", "b", 0.5), ("b", "c", 0.1), ("c", "d", 0.2), ("a", "d", 0.3)])
    cover = Cover([frozenset({"a", "b"}), frozenset({"b", "c", "d"})], [1, 1], frozenset(g.nodes))
    kept = intra_community(g, cover)

    assert kept.nodes == g.nodes
    assert {(u, v) for u, v, _ in kept.edges()} == {("a", "b"), ("b", "c"), ("c", "d")}


def test_shared_members():
    ds = dataset_from({
        "A": {"u1", "u2", "u3", "u4"},
        "B": {"u1", "u2"},
        "C": {"u3"},
        "D": {"u9"},
    })
    shares = shared_members(ds, "A")

    assert shares == [("B", 0.5), ("C", 0.25)]
    assert shared_members(ds, "A", k=1) == [("B", 0.5)]
    assert count_above(shares, 0.3) == 1
    with pytest.raises(DataError):
        shared_members(ds, "Z")


# ==================== I/O ====================

def test_json_round_trip(tmp_path, sample_graph):
    path = tmp_path / "graph.json"
    write_graph(sample_graph, str(path), "json")
    assert load_graph(str(path)) == sample_graph


def test_graphml_export_carries_cover_attributes(tmp_path, make_graph):
    g = make_graph([("a", "b", 0.5), ("b", "c", 0.25)])
    cover = Cover([frozenset({"a", "b"}), frozenset({"b", "c"})], [2, 2], frozenset(g.nodes))
    path = tmp_path / "graph.graphml"
    write_graph(g, str(path), "graphml", cover)

    loaded = nx.read_graphml(str(path))
    assert loaded.nodes["b"]["communities"] == "1;2"
    assert loaded.nodes["b"]["overlapping"] is True
    assert loaded.nodes["a"]["overlapping"] is False
    assert loaded.edges["a", "b"]["weight"] == 0.5


def test_gexf_export(tmp_path, make_graph):
    g = make_graph([("a", "b", 0.5)])
    path = tmp_path / "graph.gexf"
    write_graph(g, str(path), "gexf")
    assert nx.read_gexf(str(path)).number_of_edges() == 1


def test_write_graph_rejects_unknown_format(tmp_path, make_graph):
    with pytest.raises(ValueError):
        write_graph(make_graph([("a", "b", 0.5)]), str(tmp_path / "g.dot"), "dot")


def test_plot_weight_distribution(tmp_path, sample_graph):
    path = tmp_path / "weights.png"
    plot_weight_distribution(sample_graph, save_path=str(path))
    assert path.stat().st_size > 0
