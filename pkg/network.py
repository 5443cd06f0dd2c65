"""
Co-membership network construction and description

Groups become nodes; two groups are linked with the Jaccard index of their
member sets. The graph is stored as a networkx adjacency structure, which also
provides connectivity analysis and GraphML/GEXF serialisation.
"""
import json
import logging
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Tuple, TYPE_CHECKING

import networkx as nx
import numpy as np
import pandas as pd
from scipy import sparse

from data_loader import AffiliationDataset, DataError

if TYPE_CHECKING:
    from cover import Cover

logger = logging.getLogger(__name__)


class CoMembershipGraph:
    """
    Undirected weighted graph over groups

    Nodes carry `name`, `description` and `members`; every edge carries a
    `weight` in (0, 1]. Instances are treated as immutable once built.
    """

    def __init__(self, graph: nx.Graph):
        for u, v, w in graph.edges(data="weight"):
            if u == v:
                raise DataError(f"Self-loop on node {u!r}")
            if w is None or not (w > 0):
                raise DataError(f"Edge ({u!r}, {v!r}) has non-positive weight {w!r}")
        self.graph = graph
        self._nodes: List[str] = sorted(graph.nodes)

    @property
    def nodes(self) -> List[str]:
        """Node ids in ascending order"""
        return list(self._nodes)

    @property
    def node_count(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def edge_count(self) -> int:
        return self.graph.number_of_edges()

    def __contains__(self, node: str) -> bool:
        return node in self.graph

    def weight(self, u: str, v: str) -> float:
        """Edge weight, 0.0 when the pair is not linked"""
        data = self.graph.get_edge_data(u, v)
        return float(data["weight"]) if data else 0.0

    def name(self, node: str) -> str:
        return self.graph.nodes[node].get("name", "")

    def strength(self, node: str) -> float:
        """Weighted degree: sum of incident edge weights"""
        return float(sum(w for _, _, w in self.graph.edges(node, data="weight")))

    def edges(self) -> Iterable[Tuple[str, str, float]]:
        """Edges as (min_id, max_id, weight), sorted"""
        return sorted((min(u, v), max(u, v), float(w)) for u, v, w in self.graph.edges(data="weight"))

    def weights(self) -> np.ndarray:
        return np.array([w for _, _, w in self.graph.edges(data="weight")], dtype=float)

    def to_matrix(self, dense: bool = True):
        """
        Symmetric weighted adjacency matrix in `nodes` order

        Args:
            dense: Return a numpy array (True) or a scipy CSR matrix (False)

        Returns:
            Adjacency matrix
        """
        n = len(self._nodes)
        index = {node: i for i, node in enumerate(self._nodes)}
        rows, cols, data = [], [], []
        for u, v, w in self.graph.edges(data="weight"):
            rows += [index[u], index[v]]
            cols += [index[v], index[u]]
            data += [float(w), float(w)]
        matrix = sparse.csr_matrix((data, (rows, cols)), shape=(n, n), dtype=float)
        return matrix.toarray() if dense else matrix

    @cached_property
    def index(self) -> Dict[str, int]:
        """Node id -> row of the adjacency matrix"""
        return {node: i for i, node in enumerate(self._nodes)}

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Dense adjacency matrix, computed once"""
        matrix = self.to_matrix(dense=True)
        matrix.setflags(write=False)
        return matrix

    @cached_property
    def strengths(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoMembershipGraph):
            return NotImplemented
        if self._nodes != other._nodes or list(self.edges()) != list(other.edges()):
            return False
        return all(self.graph.nodes[n] == other.graph.nodes[n] for n in self._nodes)

    def __repr__(self) -> str:
        return f"CoMembershipGraph(nodes={self.node_count}, edges={self.edge_count})"


@dataclass
class GraphStats:
    """Descriptive statistics of a co-membership graph"""
    node_count: int
    edge_count_undirected: int
    density: float
    weight_quantiles: Dict[float, float]
    component_count: int
    largest_component_size: int
    weight_mean: float = 0.0
    weight_median: float = 0.0
    weight_max: float = 0.0

    @property
    def ordered_pair_count(self) -> int:
        """Edges counted once per direction, as some tools report them"""
        return 2 * self.edge_count_undirected

    def to_dict(self) -> Dict[str, object]:
        return {
            "node_count": self.node_count,
            "edge_count_undirected": self.edge_count_undirected,
            "ordered_pair_count": self.ordered_pair_count,
            "density": self.density,
            "weight_quantiles": {str(k): v for k, v in self.weight_quantiles.items()},
            "component_count": self.component_count,
            "largest_component_size": self.largest_component_size,
            "weight_mean": self.weight_mean,
            "weight_median": self.weight_median,
            "weight_max": self.weight_max,
        }


def project(ds: AffiliationDataset, min_weight: float = 0.0) -> CoMembershipGraph:
    """
    Build the normalised co-membership graph

    w_ij = |M_i ∩ M_j| / |M_i ∪ M_j|; an edge exists when the groups share a
    member and w_ij > min_weight. Every group becomes a node.

    Args:
        ds: Affiliation dataset
        min_weight: Weight floor (strict)

    Returns:
        CoMembershipGraph
    """
    if min_weight < 0:
        raise DataError("min_weight must be non-negative")

    group_ids = list(ds.groups)
    users = sorted({m.user_id for m in ds.memberships})
    group_index = {gid: i for i, gid in enumerate(group_ids)}
    user_index = {uid: j for j, uid in enumerate(users)}

    graph = nx.Graph()
    for gid, group in ds.groups.items():
        graph.add_node(
            gid,
            name=group.name,
            description=group.description,
            members=len(ds.members_of[gid]),
        )

    if ds.memberships and len(group_ids) > 1:
        rows = [group_index[m.group_id] for m in ds.memberships]
        cols = [user_index[m.user_id] for m in ds.memberships]
        incidence = sparse.csr_matrix(
            (np.ones(len(rows), dtype=np.int64), (rows, cols)),
            shape=(len(group_ids), len(users)),
        )
        sizes = np.asarray(incidence.sum(axis=1)).ravel()
        shared = sparse.triu(incidence @ incidence.T, k=1).tocoo()

        intersection = shared.data.astype(np.int64)
        union = sizes[shared.row] + sizes[shared.col] - intersection
        weights = intersection / union

        keep = weights > min_weight
        graph.add_weighted_edges_from(
            (group_ids[i], group_ids[j], float(w))
            for i, j, w in zip(shared.row[keep], shared.col[keep], weights[keep])
        )

    logger.info(
        "Projected %d groups into %d weighted edges (min_weight=%s)",
        graph.number_of_nodes(), graph.number_of_edges(), min_weight
    )
    return CoMembershipGraph(graph)


def compute_stats(g: CoMembershipGraph, thresholds: Optional[List[float]] = None) -> GraphStats:
    """
    Compute counts, density, weight distribution and connectivity

    Args:
        g: Graph
        thresholds: Weight thresholds for the cumulative fractions

    Returns:
        GraphStats
    """
    thresholds = sorted(thresholds or [])
    n = g.node_count
    m = g.edge_count
    possible = n * (n - 1) / 2
    density = m / possible if possible > 0 else 0.0

    weights = g.weights()
    if len(weights):
        quantiles = {t: float(np.count_nonzero(weights <= t) / len(weights)) for t in thresholds}
        mean, median, top = float(weights.mean()), float(np.median(weights)), float(weights.max())
    else:
        quantiles = {t: 0.0 for t in thresholds}
        mean = median = top = 0.0

    components = list(nx.connected_components(g.graph)) if n else []

    return GraphStats(
        node_count=n,
        edge_count_undirected=m,
        density=density,
        weight_quantiles=quantiles,
        component_count=len(components),
        largest_component_size=max((len(c) for c in components), default=0),
        weight_mean=mean,
        weight_median=median,
        weight_max=top,
    )


def induced_subgraph(g: CoMembershipGraph, nodes: Iterable[str]) -> CoMembershipGraph:
    """
    Restrict a graph to a node set, keeping every edge inside it

    Args:
        g: Graph
        nodes: Node ids, all of which must exist in g

    Returns:
        CoMembershipGraph over exactly `nodes`
    """
    nodes = set(nodes)
    for node in sorted(nodes):
        if node not in g.graph:
            raise DataError(f"Unknown node id: {node!r}")
    return CoMembershipGraph(g.graph.subgraph(nodes).copy())


def intra_community(g: CoMembershipGraph, cover: "Cover") -> CoMembershipGraph:
    """
    Keep every node but only edges whose endpoints share a community

    Args:
        g: Graph
        cover: Community cover over g

    Returns:
        CoMembershipGraph
    """
    memberships = cover.memberships()
    kept = nx.Graph()
    kept.add_nodes_from(g.graph.nodes(data=True))
    kept.add_edges_from(
        (u, v, data) for u, v, data in g.graph.edges(data=True)
        if memberships.get(u, set()) & memberships.get(v, set())
    )
    return CoMembershipGraph(kept)


def shared_members(ds: AffiliationDataset, group_id: str, k: Optional[int] = None) -> List[Tuple[str, float]]:
    """
    Share of a group's members that are also registered in each other group

    Args:
        ds: Affiliation dataset
        group_id: Group to inspect
        k: Keep only the top k partners (all if None)

    Returns:
        List of (other group id, |M_i ∩ M_j| / |M_i|), descending, ties by id
    """
    if group_id not in ds.groups:
        raise DataError(f"Unknown group id: {group_id!r}")
    own = ds.members_of[group_id]
    if not own:
        return []

    shares = [
        (other, len(own & members) / len(own))
        for other, members in ds.members_of.items()
        if other != group_id and own & members
    ]
    shares.sort(key=lambda item: (-item[1], item[0]))
    return shares[:k] if k is not None else shares


def count_above(shares: List[Tuple[str, float]], threshold: float) -> int:
    """Number of partner groups whose share exceeds `threshold`"""
    return sum(1 for _, share in shares if share > threshold)


# ==================== EXPORT / IMPORT ====================

def _annotated(g: CoMembershipGraph, cover: Optional["Cover"]) -> nx.Graph:
    graph = g.graph.copy()
    for node, data in graph.nodes(data=True):
        data["name"] = str(data.get("name", ""))
        data["description"] = str(data.get("description", ""))
        data["members"] = int(data.get("members", 0))
    if cover is not None:
        memberships = cover.memberships()
        for node, data in graph.nodes(data=True):
            ids = sorted(memberships.get(node, set()))
            data["communities"] = ";".join(str(i) for i in ids)
            data["overlapping"] = len(ids) > 1
    return graph


def write_graph(g: CoMembershipGraph, path: str, fmt: str, cover: Optional["Cover"] = None):
    """
    Write a graph as GraphML, GEXF or JSON edge list

    Args:
        g: Graph
        path: Output file
        fmt: 'graphml', 'gexf' or 'json'
        cover: Optional cover; adds `communities` and `overlapping` node attributes
    """
    fmt = fmt.lower()
    if fmt == "graphml":
        nx.write_graphml(_annotated(g, cover), path)
    elif fmt == "gexf":
        nx.write_gexf(_annotated(g, cover), path)
    elif fmt == "json":
        with open(path, "w", encoding="utf-8") as f:
            json.dump(graph_to_dict(g), f, ensure_ascii=False, indent=1)
    else:
        raise ValueError(f"Unsupported graph format: {fmt!r}")
    logger.info("Graph written to: %s", path)


def graph_to_dict(g: CoMembershipGraph) -> Dict[str, object]:
    nodes = [
        {
            "id": node,
            "name": g.graph.nodes[node].get("name", ""),
            "description": g.graph.nodes[node].get("description", ""),
            "members": int(g.graph.nodes[node].get("members", 0)),
        }
        for node in g.nodes
    ]
    edges = [{"source": u, "target": v, "weight": w} for u, v, w in g.edges()]
    return {"nodes": nodes, "edges": edges}


def graph_from_dict(payload: Dict[str, object]) -> CoMembershipGraph:
    graph = nx.Graph()
    try:
        for node in payload["nodes"]:
            graph.add_node(
                str(node["id"]),
                name=node.get("name", ""),
                description=node.get("description", ""),
                members=int(node.get("members", 0)),
            )
        for edge in payload["edges"]:
            u, v = str(edge["source"]), str(edge["target"])
            if u not in graph or v not in graph:
                raise DataError(f"Edge ({u!r}, {v!r}) references an unknown node")
            graph.add_edge(u, v, weight=float(edge["weight"]))
    except (KeyError, TypeError) as e:
        raise DataError(f"Malformed graph JSON: {e}") from e
    return CoMembershipGraph(graph)


def load_graph(path: str) -> CoMembershipGraph:
    """Read the JSON edge-list form written by write_graph"""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Graph file not found: {path}")
    with open(path, encoding="utf-8") as f:
        return graph_from_dict(json.load(f))


def stats_table(stats: GraphStats) -> pd.DataFrame:
    """Two-column (metric, value) rendering of GraphStats"""
    rows = [
        ("nodes", stats.node_count),
        ("edges (undirected)", stats.edge_count_undirected),
        ("edges (ordered pairs)", stats.ordered_pair_count),
        ("density", round(stats.density, 6)),
        ("components", stats.component_count),
        ("largest component", stats.largest_component_size),
        ("weight mean", round(stats.weight_mean, 6)),
        ("weight median", round(stats.weight_median, 6)),
        ("weight max", round(stats.weight_max, 6)),
    ]
    rows += [(f"fraction weight <= {t}", round(frac, 6)) for t, frac in stats.weight_quantiles.items()]
    return pd.DataFrame(rows, columns=["metric", "value"])


def plot_weight_distribution(g: CoMembershipGraph, save_path: Optional[str] = None):
    """
    Histogram of edge weights on a log-count axis

    Args:
        g: Graph
        save_path: Path to save the PNG (displays the plot if None)
    """
    import matplotlib
    if save_path:
        matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import seaborn as sns

    fig, ax = plt.subplots(figsize=(8, 5))
    weights = g.weights()
    if len(weights):
        sns.histplot(weights, bins=50, ax=ax, color="steelblue")
        ax.set_yscale("log")
    ax.set_title(f"Edge weight distribution ({g.edge_count:,} edges)")
    ax.set_xlabel("Jaccard weight")
    ax.set_ylabel("Edges")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()

    if save_path:
        fig.savefig(save_path, dpi=150, bbox_inches="tight", format="png")
        logger.info("Plot saved to: %s", save_path)
    else:
        plt.show()
    plt.close(fig)
