"""
Shared fixtures: small hand-built graphs and a synthetic sample city
"""
import itertools
from typing import Iterable, Optional, Tuple

import networkx as nx
import pytest

from data_loader import DataLoader
from network import CoMembershipGraph, project


def build_graph(edges: Iterable[Tuple[str, str, float]], nodes: Optional[Iterable[str]] = None) -> CoMembershipGraph:
    graph = nx.Graph()
    for node in nodes or []:
        graph.add_node(node, name=f"Group {node}", description="", members=0)
    for u, v, w in edges:
        for node in (u, v):
            if node not in graph:
                graph.add_node(node, name=f"Group {node}", description="", members=0)
        graph.add_edge(u, v, weight=w)
    return CoMembershipGraph(graph)


def clique(prefix: str, size: int, weight: float = 1.0):
    names = [f"{prefix}{i}" for i in range(size)]
    return [(u, v, weight) for u, v in itertools.combinations(names, 2)]


@pytest.fixture
def make_graph():
    """Factory: make_graph(edges, nodes=None) -> CoMembershipGraph"""
    return build_graph


@pytest.fixture
def two_cliques():
    """Two 10-cliques (weight 1) joined by a single 0.1 bridge a0-b0"""
    return build_graph(clique("a", 10) + clique("b", 10) + [("a0", "b0", 0.1)])


@pytest.fixture
def six_cliques():
    """Two 6-cliques (weight 1) joined by a single 0.01 edge a0-b0"""
    return build_graph(clique("a", 6) + clique("b", 6) + [("a0", "b0", 0.01)])


@pytest.fixture
def overlapping_cliques():
    """
    Cliques on nodes 1-8 and 7-14 sharing nodes 7 and 8, plus a weak 1-14 edge

    Node ids are zero-padded so that string order matches numeric order.
    """
    first = [f"n{i:02d}" for i in range(1, 9)]
    second = [f"n{i:02d}" for i in range(7, 15)]
    edges = {}
    for members in (first, second):
        for u, v in itertools.combinations(members, 2):
            edges[(u, v)] = 1.0
    edges[("n01", "n14")] = 0.01
    return build_graph([(u, v, w) for (u, v), w in edges.items()])


@pytest.fixture(scope="session")
def sample_dataset():
    return DataLoader.generate_sample_data(n_groups=30, n_users=400, n_topics=3, seed=7)


@pytest.fixture(scope="session")
def sample_graph(sample_dataset):
    return project(sample_dataset)


@pytest.fixture
def sample_files(tmp_path, sample_dataset):
    """Sample dataset written as groups JSON + memberships CSV"""
    groups = tmp_path / "groups.json"
    memberships = tmp_path / "memberships.csv"
    DataLoader.save_dataset(sample_dataset, str(groups), str(memberships))
    return groups, memberships
