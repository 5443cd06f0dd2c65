"""
Overlapping community covers: storage, overlap analysis and comparison
"""
import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Set, Tuple, TYPE_CHECKING

import numpy as np
import pandas as pd

from data_loader import DataError

if TYPE_CHECKING:
    from labelling import LabelSet
    from network import CoMembershipGraph

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["community", "size", "pct_over", "top_members"]
LABEL_COLUMNS = ["name_label", "description_label"]


def jaccard(a: FrozenSet, b: FrozenSet) -> float:
    """Node-set Jaccard index (1.0 for two empty sets)"""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


@dataclass
class Cover:
    """
    A set of possibly overlapping communities over a node universe

    Community ids are 1-based positions in `communities`. Nodes may belong to
    several communities or to none.
    """
    communities: List[FrozenSet[str]]
    trial_support: List[int]
    universe: FrozenSet[str]
    params: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.communities = [frozenset(c) for c in self.communities]
        self.universe = frozenset(self.universe)
        if len(self.trial_support) != len(self.communities):
            raise DataError("trial_support must have one entry per community")
        for community_id, members in self.items():
            stray = sorted(members - self.universe)
            if stray:
                raise DataError(f"Community {community_id} references unknown node {stray[0]!r}")

    def __len__(self) -> int:
        return len(self.communities)

    def __iter__(self) -> Iterator[FrozenSet[str]]:
        return iter(self.communities)

    def items(self) -> Iterator[Tuple[int, FrozenSet[str]]]:
        return enumerate(self.communities, 1)

    def memberships(self) -> Dict[str, Set[int]]:
        """Node -> ids of the communities containing it (assigned nodes only)"""
        result: Dict[str, Set[int]] = {}
        for community_id, members in self.items():
            for node in members:
                result.setdefault(node, set()).add(community_id)
        return result


@dataclass
class OverlapStats:
    """How strongly the communities of a cover overlap"""
    multiplicity: Dict[int, int]
    percent_overlap: Dict[int, float]
    unassigned: int

    @property
    def overlapping_nodes(self) -> int:
        return sum(count for k, count in self.multiplicity.items() if k > 1)


def overlap_stats(cover: Cover, g: "CoMembershipGraph") -> OverlapStats:
    """
    Membership multiplicity histogram and per-community overlap percentage

    Args:
        cover: Cover over g
        g: Graph

    Returns:
        OverlapStats; `multiplicity` maps k >= 1 to the number of nodes in exactly
        k communities, `percent_overlap` maps community id to the percentage of
        its nodes also present in another community
    """
    if cover.universe != frozenset(g.nodes):
        raise DataError("Cover and graph have different node sets")

    memberships = cover.memberships()
    multiplicity = Counter(len(ids) for ids in memberships.values())
    percent = {
        community_id: 100.0 * sum(1 for node in members if len(memberships[node]) > 1) / len(members)
        for community_id, members in cover.items() if members
    }
    return OverlapStats(
        multiplicity=dict(sorted(multiplicity.items())),
        percent_overlap=percent,
        unassigned=len(cover.universe) - len(memberships),
    )


def compare_covers(a: Cover, b: Cover) -> float:
    """
    Omega index between two covers of the same node universe

    Each node pair is classified by how many communities contain both nodes;
    the observed agreement on that count is corrected for chance.

    Args:
        a: First cover
        b: Second cover

    Returns:
        Omega index, 1.0 for identical covers
    """
    if a.universe != b.universe:
        raise DataError("Covers are defined over different node universes")

    nodes = sorted(a.universe)
    n = len(nodes)
    if n < 2:
        return 1.0

    counts_a = _pair_counts(a, nodes)
    counts_b = _pair_counts(b, nodes)
    pairs = len(counts_a)

    observed = np.count_nonzero(counts_a == counts_b) / pairs
    top = int(max(counts_a.max(), counts_b.max()))
    freq_a = np.bincount(counts_a, minlength=top + 1)
    freq_b = np.bincount(counts_b, minlength=top + 1)
    expected = float(np.dot(freq_a, freq_b)) / pairs ** 2

    if expected == 1.0:
        return 1.0
    return float((observed - expected) / (1.0 - expected))


def _pair_counts(cover: Cover, nodes: List[str]) -> np.ndarray:
    """Shared-community count for every unordered node pair"""
    index = {node: i for i, node in enumerate(nodes)}
    membership = np.zeros((len(nodes), max(1, len(cover))), dtype=np.int64)
    for community_id, members in cover.items():
        for node in members:
            membership[index[node], community_id - 1] = 1
    shared = membership @ membership.T
    upper = np.triu_indices(len(nodes), k=1)
    return shared[upper]


def community_overlap_matrix(cover: Cover) -> pd.DataFrame:
    """Shared-node counts between communities; the diagonal holds sizes"""
    ids = [community_id for community_id, _ in cover.items()]
    matrix = pd.DataFrame(0, index=ids, columns=ids, dtype=int)
    for i, a in cover.items():
        for j, b in cover.items():
            matrix.loc[i, j] = len(a & b)
    return matrix


def community_summary(
    cover: Cover,
    g: "CoMembershipGraph",
    labels: Optional["LabelSet"] = None,
    k: int = 3
) -> pd.DataFrame:
    """
    One row per community: size, overlap, most central members, labels

    Args:
        cover: Cover over g
        g: Graph
        labels: Optional labels for the cover
        k: Central members listed per community

    Returns:
        DataFrame
    """
    from centrality import community_rankings

    stats = overlap_stats(cover, g)
    rankings = community_rankings(g, cover, k)
    rows = []
    for community_id, members in cover.items():
        row = {
            "community": community_id,
            "size": len(members),
            "pct_over": round(stats.percent_overlap.get(community_id, 0.0), 1),
            "top_members": "; ".join(g.name(node) or node for node, _ in rankings[community_id]),
        }
        if labels is not None:
            row["name_label"] = ", ".join(labels.name_labels.get(community_id, []))
            row["description_label"] = ", ".join(labels.description_labels.get(community_id, []))
        rows.append(row)
    columns = SUMMARY_COLUMNS + (LABEL_COLUMNS if labels is not None else [])
    return pd.DataFrame(rows, columns=columns)


# ==================== JSON I/O ====================

def cover_to_dict(cover: Cover) -> Dict[str, object]:
    return {
        "params": cover.params,
        "universe": sorted(cover.universe),
        "communities": [
            {
                "id": community_id,
                "size": len(members),
                "nodes": sorted(members),
                "trial_support": support,
            }
            for (community_id, members), support in zip(cover.items(), cover.trial_support)
        ],
    }


def cover_from_dict(payload: Dict[str, object]) -> Cover:
    try:
        entries = sorted(payload["communities"], key=lambda entry: entry["id"])
        communities = [frozenset(str(node) for node in entry["nodes"]) for entry in entries]
        support = [int(entry.get("trial_support", 0)) for entry in entries]
        universe = payload.get("universe")
    except (KeyError, TypeError) as e:
        raise DataError(f"Malformed cover JSON: {e}") from e

    if universe is None:
        universe = set().union(*communities) if communities else set()
    return Cover(communities, support, frozenset(str(node) for node in universe), dict(payload.get("params") or {}))


def save_cover(cover: Cover, path: str):
    """Write a cover as deterministic JSON (sorted keys and node lists)"""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cover_to_dict(cover), f, ensure_ascii=False, indent=1, sort_keys=True)
        f.write("\n")
    logger.info("Cover with %d communities written to: %s", len(cover), path)


def load_cover(path: str) -> Cover:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Cover file not found: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"Invalid cover JSON in {path}: {e}") from e
    return cover_from_dict(payload)
