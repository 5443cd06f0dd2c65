"""
Weighted centrality measures for co-membership graphs

- eigenvector: power iteration on the weighted adjacency matrix
- betweenness: Brandes accumulation over weighted shortest paths
- degree: node strength (sum of incident weights)
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple, TYPE_CHECKING

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.sparse.csgraph import dijkstra
from tqdm import tqdm

import config
from data_loader import DataError
from network import CoMembershipGraph, induced_subgraph

if TYPE_CHECKING:
    from cover import Cover

logger = logging.getLogger(__name__)

# Relative tolerance when comparing shortest-path lengths
PATH_RTOL = 1e-12


class Measure(Enum):
    """Centrality measure"""
    EIGENVECTOR = "eigenvector"
    BETWEENNESS = "betweenness"
    DEGREE = "degree"


class DistanceMode(Enum):
    """Edge length used for shortest paths"""
    INVERSE_WEIGHT = "inverse_weight"
    UNIT = "unit"


class ConvergenceError(RuntimeError):
    """Power iteration did not converge; `last_iterate` holds the final vector"""

    def __init__(self, message: str, last_iterate: Dict[str, float], iterations: int):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


@dataclass
class CentralityReport:
    """
    Scores for one measure plus the descending ranking

    Ranking ties are broken by node id ascending.
    """
    measure: Measure
    scores: Dict[str, float]
    ranking: List[str] = field(init=False)

    def __post_init__(self):
        self.ranking = sorted(self.scores, key=lambda node: (-self.scores[node], node))

    def to_frame(self, g: Optional[CoMembershipGraph] = None) -> pd.DataFrame:
        rows = [
            {
                "rank": rank,
                "node_id": node,
                "name": g.name(node) if g is not None else "",
                "score": self.scores[node],
            }
            for rank, node in enumerate(self.ranking, 1)
        ]
        return pd.DataFrame(rows, columns=["rank", "node_id", "name", "score"])


def eigenvector_centrality(
    g: CoMembershipGraph,
    tol: float = None,
    max_iter: int = None
) -> CentralityReport:
    """
    Dominant eigenvector of the weighted adjacency matrix

    Iterates x <- (A + c I) x from the uniform vector, normalising each
    iterate to unit Euclidean norm. The shift c is the mean node strength,
    so it scales with the weights and the iterates are identical for A and
    any positive multiple of A. The shift leaves the eigenvectors unchanged
    and keeps bipartite graphs from oscillating.

    Args:
        g: Graph
        tol: Max-norm change between iterates that counts as converged
        max_iter: Iteration limit

    Returns:
        CentralityReport with unit-norm, non-negative scores
    """
    tol = config.EIGENVECTOR_TOL if tol is None else tol
    max_iter = config.EIGENVECTOR_MAX_ITER if max_iter is None else max_iter
    if g.node_count == 0:
        raise DataError("Eigenvector centrality is undefined on an empty graph")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")

    nodes = g.nodes
    adjacency = g.to_matrix(dense=False)
    # Mean strength is a lower bound on the dominant eigenvalue
    shift = adjacency.sum() / len(nodes) or 1.0
    shifted = adjacency + shift * sparse.identity(len(nodes), format="csr")
    x = np.full(len(nodes), 1.0 / np.sqrt(len(nodes)))

    for iteration in range(1, max_iter + 1):
        nxt = shifted @ x
        nxt /= np.linalg.norm(nxt)
        if np.max(np.abs(nxt - x)) < tol:
            logger.debug("Eigenvector centrality converged after %d iterations", iteration)
            return CentralityReport(Measure.EIGENVECTOR, dict(zip(nodes, nxt.tolist())))
        x = nxt

    raise ConvergenceError(
        f"Eigenvector centrality did not converge within {max_iter} iterations",
        last_iterate=dict(zip(nodes, x.tolist())),
        iterations=max_iter,
    )


def _edge_lengths(g: CoMembershipGraph, mode: DistanceMode) -> sparse.csr_matrix:
    adjacency = g.to_matrix(dense=False)
    if adjacency.nnz and adjacency.data.min() <= 0:
        raise DataError("Betweenness requires strictly positive edge weights")
    lengths = adjacency.copy()
    if mode == DistanceMode.INVERSE_WEIGHT:
        lengths.data = 1.0 / lengths.data
    else:
        lengths.data = np.ones_like(lengths.data)
    return lengths


def _source_dependencies(sources: List[int], dist: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Brandes dependency sums for a batch of sources"""
    n = dist.shape[0]
    edge = np.isfinite(lengths)
    total = np.zeros(n)

    for s in sources:
        d = dist[s]
        with np.errstate(invalid="ignore"):
            gap = np.abs(d[:, None] + lengths - d[None, :])
            pred = edge & (gap <= PATH_RTOL * d[None, :])

        reached = np.flatnonzero(np.isfinite(d))
        order = reached[np.argsort(d[reached], kind="stable")]

        sigma = np.zeros(n)
        sigma[s] = 1.0
        for w in order[1:]:
            sigma[w] = sigma[pred[:, w]].sum()

        delta = np.zeros(n)
        for w in order[:0:-1]:
            preds = pred[:, w]
            delta[preds] += sigma[preds] / sigma[w] * (1.0 + delta[w])
            total[w] += delta[w]

    return total


def betweenness_centrality(
    g: CoMembershipGraph,
    distance_mode: str = None,
    normalized: bool = None,
    n_workers: int = 1,
    progress: bool = False
) -> CentralityReport:
    """
    Weighted betweenness centrality

    Edge length is 1/w (inverse_weight) or 1 (unit). Paths whose lengths agree
    within a relative 1e-12 count as ties and share the dependency.

    Args:
        g: Graph
        distance_mode: 'inverse_weight' or 'unit'
        normalized: Scale by 2/((n-1)(n-2)) so scores lie in [0, 1]
        n_workers: Threads used over source batches
        progress: Show a tqdm progress bar

    Returns:
        CentralityReport
    """
    mode = DistanceMode(distance_mode or config.DISTANCE_MODE)
    normalized = config.NORMALIZE_BETWEENNESS if normalized is None else normalized

    nodes = g.nodes
    n = len(nodes)
    lengths = _edge_lengths(g, mode)
    if n < 3:
        return CentralityReport(Measure.BETWEENNESS, {node: 0.0 for node in nodes})

    dist = dijkstra(lengths, directed=False)
    dense_lengths = np.full((n, n), np.inf)
    coo = lengths.tocoo()
    dense_lengths[coo.row, coo.col] = coo.data

    batch = max(1, n // max(1, 4 * n_workers))
    batches = [list(range(i, min(i + batch, n))) for i in range(0, n, batch)]

    totals = np.zeros(n)
    bar = tqdm(total=n, desc="betweenness", unit="src", disable=not progress)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_source_dependencies, b, dist, dense_lengths) for b in batches]
            for b, future in zip(batches, futures):
                totals += future.result()
                bar.update(len(b))
    else:
        for b in batches:
            totals += _source_dependencies(b, dist, dense_lengths)
            bar.update(len(b))
    bar.close()

    # Each unordered pair was visited from both ends
    scale = 1.0 / ((n - 1) * (n - 2)) if normalized else 0.5
    scores = dict(zip(nodes, (totals * scale).tolist()))
    return CentralityReport(Measure.BETWEENNESS, scores)


def degree_centrality(g: CoMembershipGraph) -> CentralityReport:
    """Weighted degree: sum of incident edge weights (0 for isolated nodes)"""
    return CentralityReport(Measure.DEGREE, {node: g.strength(node) for node in g.nodes})


def top_k(report: CentralityReport, k: int) -> List[Tuple[str, float]]:
    """
    First k entries of the ranking

    Args:
        report: Centrality report
        k: Number of entries (>= 1); larger than n returns all

    Returns:
        List of (node, score)
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    return [(node, report.scores[node]) for node in report.ranking[:k]]


def community_rankings(g: CoMembershipGraph, cover: "Cover", k: int = None) -> Dict[int, List[Tuple[str, float]]]:
    """
    Most central members of each community

    Weighted degree is computed inside the community's induced subgraph.

    Args:
        g: Graph
        cover: Cover over g
        k: Members per community

    Returns:
        Mapping community id -> top-k (node, score)
    """
    k = k or config.COMMUNITY_TOP_K
    rankings = {}
    for community_id, members in cover.items():
        sub = induced_subgraph(g, members)
        rankings[community_id] = top_k(degree_centrality(sub), k)
    return rankings


def save_report(report: CentralityReport, g: CoMembershipGraph, path: str, k: Optional[int] = None):
    """
    Write a report as TSV with columns rank, node_id, name, score

    Args:
        report: Centrality report
        g: Graph supplying node names
        path: Output path
        k: Keep only the top k rows (all if None)
    """
    df = report.to_frame(g)
    if k is not None:
        df = df.head(k)
    df.to_csv(path, sep="\t", index=False, float_format="%.4f", encoding="utf-8")
    logger.info("%s centrality written to: %s", report.measure.value.capitalize(), path)
