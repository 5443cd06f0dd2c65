"""
Overlapping community detection by statistical local expansion

A community grows from a seed node by admitting external neighbours whose
connection to it is unlikely under a strength-preserving random null. Each
trial seeds from a shuffled node order; communities found in enough trials
survive, are cleaned once more, filtered by size and de-duplicated.
"""
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np
from scipy import stats
from tqdm import tqdm

import config
from cover import Cover, jaccard
from data_loader import DataError
from network import CoMembershipGraph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectionParams:
    """Community detection settings"""
    resolution: float = config.RESOLUTION
    min_size: int = config.MIN_SIZE
    n_trials: int = config.N_TRIALS
    consensus_fraction: float = config.CONSENSUS_FRACTION
    dedup_jaccard: float = config.DEDUP_JACCARD
    rng_seed: int = config.RNG_SEED
    max_cleanup_iters: int = config.MAX_CLEANUP_ITERS
    match_jaccard: float = config.MATCH_JACCARD
    n_workers: int = config.N_WORKERS

    def __post_init__(self):
        if not 0 < self.resolution < 1:
            raise ValueError(f"resolution must lie in (0, 1), got {self.resolution}")
        if self.min_size < 1:
            raise ValueError("min_size must be at least 1")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if not 0 < self.consensus_fraction <= 1:
            raise ValueError("consensus_fraction must lie in (0, 1]")
        if not 0 < self.dedup_jaccard <= 1:
            raise ValueError("dedup_jaccard must lie in (0, 1]")
        if not 0 < self.match_jaccard <= 1:
            raise ValueError("match_jaccard must lie in (0, 1]")
        if not -2**63 <= self.rng_seed < 2**63:
            raise ValueError("rng_seed must fit in 64 bits")
        if self.max_cleanup_iters < 1:
            raise ValueError("max_cleanup_iters must be at least 1")
        if self.n_workers < 1:
            raise ValueError("n_workers must be at least 1")

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass
class SignificanceContext:
    """
    Quantities needed to score a node against a community

    Attributes:
        community: Node set C
        community_strength: Total strength of the nodes in C
        total_strength: Twice the total edge weight of the graph
        weight_in: Node -> summed edge weight into C
        strength: Node -> strength
        quantum: Weight unit converting strengths into pseudo-counts
    """
    community: FrozenSet[str]
    community_strength: float
    total_strength: float
    weight_in: Dict[str, float]
    strength: Dict[str, float]
    quantum: float

    def __post_init__(self):
        if self.quantum <= 0:
            raise ValueError(f"weight quantum must be positive, got {self.quantum}")

    @classmethod
    def build(cls, g: CoMembershipGraph, community: Iterable[str], quantum: Optional[float] = None) -> "SignificanceContext":
        """Context for community C in g; quantum defaults to weight_quantum(g)"""
        community = frozenset(community)
        unknown = sorted(community - set(g.nodes))
        if unknown:
            raise DataError(f"Unknown node id: {unknown[0]!r}")

        nodes = g.nodes
        members = np.array([g.index[node] for node in sorted(community)], dtype=int)
        weight_in = g.adjacency[:, members].sum(axis=1) if len(members) else np.zeros(len(nodes))
        strengths = g.strengths
        return cls(
            community=community,
            community_strength=float(strengths[members].sum()),
            total_strength=float(strengths.sum()),
            weight_in=dict(zip(nodes, weight_in.tolist())),
            strength=dict(zip(nodes, strengths.tolist())),
            quantum=weight_quantum(g) if quantum is None else quantum,
        )


def weight_quantum(g: CoMembershipGraph) -> float:
    """Smallest positive edge weight (1.0 for a graph without edges)"""
    weights = g.weights()
    return float(weights.min()) if len(weights) else 1.0


def _pseudo_counts(strength, weight_in, quantum: float) -> Tuple[np.ndarray, np.ndarray]:
    trials = np.rint(np.asarray(strength, dtype=float) / quantum).astype(np.int64)
    hits = np.rint(np.asarray(weight_in, dtype=float) / quantum).astype(np.int64)
    return trials, np.minimum(hits, trials)


def _tail(hits: np.ndarray, trials: np.ndarray, p) -> np.ndarray:
    """P[X >= hits] for X ~ Binomial(trials, p); 1 where hits is 0"""
    p = np.clip(p, 0.0, 1.0)
    tail = stats.binom.sf(hits - 1, trials, p)
    return np.where(hits <= 0, 1.0, tail)


def r_score(ctx: SignificanceContext, node: str) -> float:
    """
    Probability that a node links to C at least as strongly as observed

    X ~ Binomial(round(s_i / q), S_C / S_tot) and the score is
    P[X >= round(w_iC / q)]. Smaller is more significant.

    Args:
        ctx: Significance context for C
        node: Node outside C

    Returns:
        Tail probability in [0, 1]
    """
    if ctx.quantum <= 0:
        raise ValueError(f"weight quantum must be positive, got {ctx.quantum}")
    if node in ctx.community:
        raise ValueError(f"Node {node!r} already belongs to the community")

    w_in = ctx.weight_in.get(node, 0.0)
    if w_in <= 0:
        return 1.0
    p = ctx.community_strength / ctx.total_strength
    trials, hits = _pseudo_counts([ctx.strength[node]], [w_in], ctx.quantum)
    return float(_tail(hits, trials, p)[0])


class _LocalSearch:
    """Index-space state for growing and pruning one community"""

    def __init__(self, g: CoMembershipGraph, params: DetectionParams, quantum: float):
        self.adjacency = g.adjacency
        self.strengths = g.strengths
        self.total = float(self.strengths.sum())
        self.quantum = quantum
        self.params = params

    def start(self, members: Iterable[int]):
        self.mask = np.zeros(len(self.strengths), dtype=bool)
        self.mask[list(members)] = True
        self._recount()

    def _recount(self):
        self.weight_in = self.adjacency[:, self.mask].sum(axis=1)
        self.community_strength = float(self.strengths[self.mask].sum())

    def admit_one(self, rng: np.random.Generator) -> bool:
        """Admit the best candidate if the order-statistic test finds any significant one"""
        candidates = np.flatnonzero(~self.mask & (self.weight_in > 0))
        if len(candidates) == 0 or self.total <= 0:
            return False

        p = min(1.0, self.community_strength / self.total)
        trials, hits = _pseudo_counts(self.strengths[candidates], self.weight_in[candidates], self.quantum)
        above = stats.binom.sf(hits, trials, p)
        at = stats.binom.pmf(hits, trials, p)
        randomized = above + rng.random(len(candidates)) * at

        order = np.lexsort((candidates, randomized))
        ranked = randomized[order]
        m = len(ranked)
        q = np.arange(1, m + 1)
        omega = stats.beta.cdf(ranked, q, m - q + 1)
        if not np.any(omega < self.params.resolution):
            return False

        best = candidates[order[0]]
        self.mask[best] = True
        self.weight_in = self.weight_in + self.adjacency[:, best]
        self.community_strength += float(self.strengths[best])
        return True

    def expand(self, rng: np.random.Generator) -> bool:
        changed = False
        while self.admit_one(rng):
            changed = True
        return changed

    def prune_one(self) -> bool:
        """Drop the least significant member if it fails the resolution threshold"""
        members = np.flatnonzero(self.mask)
        if len(members) == 0:
            return False

        rest = (self.community_strength - self.strengths[members]) / self.total if self.total > 0 else 0.0
        trials, hits = _pseudo_counts(self.strengths[members], self.weight_in[members], self.quantum)
        scores = _tail(hits, trials, rest)
        worst = int(np.argmax(scores))
        if scores[worst] < self.params.resolution:
            return False

        self.mask[members[worst]] = False
        self._recount()
        return True

    def clean(self, rng: np.random.Generator) -> None:
        for _ in range(self.params.max_cleanup_iters):
            changed = False
            while self.prune_one():
                changed = True
            if not self.mask.any():
                return
            changed |= self.expand(rng)
            if not changed:
                return

    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


def _to_nodes(g: CoMembershipGraph, indices: Iterable[int]) -> FrozenSet[str]:
    nodes = g.nodes
    return frozenset(nodes[i] for i in indices)


def expand_seed(
    g: CoMembershipGraph,
    seed: str,
    params: DetectionParams,
    rng: np.random.Generator
) -> FrozenSet[str]:
    """
    Grow a community from a single seed node

    At each step the external neighbours are ranked by randomized r-score;
    if any rank q of m has P[Beta(q, m - q + 1) <= r_q] below the
    resolution, the top-ranked candidate joins. Stops when no rank passes.

    Args:
        g: Graph
        seed: Seed node id
        params: Detection settings
        rng: Random generator

    Returns:
        Node set containing the seed
    """
    if seed not in g:
        raise DataError(f"Unknown node id: {seed!r}")
    search = _LocalSearch(g, params, weight_quantum(g))
    search.start([g.index[seed]])
    search.expand(rng)
    return _to_nodes(g, search.members())


def clean_community(
    g: CoMembershipGraph,
    community: Iterable[str],
    params: DetectionParams,
    rng: np.random.Generator
) -> FrozenSet[str]:
    """
    Alternate pruning and re-expansion until the set stabilises

    Pruning removes the member whose r-score against the rest of the set is
    largest while that score is at least the resolution; re-expansion reuses
    the admission rule of expand_seed.

    Args:
        g: Graph
        community: Non-empty node set
        params: Detection settings
        rng: Random generator

    Returns:
        Cleaned node set, empty when nothing significant remains
    """
    community = frozenset(community)
    if not community:
        raise ValueError("Cannot clean an empty community")
    unknown = sorted(community - set(g.nodes))
    if unknown:
        raise DataError(f"Unknown node id: {unknown[0]!r}")

    search = _LocalSearch(g, params, weight_quantum(g))
    search.start(g.index[node] for node in community)
    search.clean(rng)
    return _to_nodes(g, search.members())


def _run_trial(g: CoMembershipGraph, params: DetectionParams, quantum: float, trial: int) -> List[FrozenSet[int]]:
    """One pass: seed from every node not yet covered, in shuffled order"""
    rng = np.random.default_rng(params.rng_seed + trial)
    n = g.node_count
    covered = np.zeros(n, dtype=bool)
    search = _LocalSearch(g, params, quantum)
    found: List[FrozenSet[int]] = []

    for seed in rng.permutation(n):
        if covered[seed]:
            continue
        search.start([seed])
        search.expand(rng)
        search.clean(rng)
        members = search.members()
        if len(members) == 0:
            continue
        covered[members] = True
        community = frozenset(members.tolist())
        if community not in found:
            found.append(community)

    logger.debug("Trial %d: %d communities", trial, len(found))
    return found


@dataclass
class _Match:
    representative: FrozenSet[int]
    variants: Counter
    trials: set


def _aggregate(per_trial: List[List[FrozenSet[int]]], match_jaccard: float) -> List[_Match]:
    matches: List[_Match] = []
    for trial, communities in enumerate(per_trial):
        for community in communities:
            for match in matches:
                if jaccard(match.representative, community) >= match_jaccard:
                    match.variants[community] += 1
                    match.trials.add(trial)
                    break
            else:
                matches.append(_Match(community, Counter({community: 1}), {trial}))
    return matches


def detect_cover(g: CoMembershipGraph, params: DetectionParams = None, progress: bool = False) -> Cover:
    """
    Detect overlapping communities

    Args:
        g: Graph
        params: Detection settings (defaults from config)
        progress: Show a tqdm progress bar over trials

    Returns:
        Cover, possibly with no communities
    """
    params = params or DetectionParams()
    universe = frozenset(g.nodes)
    if g.node_count == 0:
        return Cover([], [], universe, params.to_dict())

    quantum = weight_quantum(g)
    _ = g.adjacency, g.strengths  # shared arrays are built before any worker starts

    trials = range(params.n_trials)
    if params.n_workers > 1:
        with ThreadPoolExecutor(max_workers=params.n_workers) as pool:
            per_trial = list(tqdm(
                pool.map(lambda t: _run_trial(g, params, quantum, t), trials),
                total=params.n_trials, desc="trials", disable=not progress,
            ))
    else:
        per_trial = [
            _run_trial(g, params, quantum, t)
            for t in tqdm(trials, desc="trials", disable=not progress)
        ]

    matches = _aggregate(per_trial, params.match_jaccard)
    consensus = [m for m in matches if len(m.trials) / params.n_trials >= params.consensus_fraction]
    logger.info(
        "%d distinct communities across %d trials, %d reach consensus %.2f",
        len(matches), params.n_trials, len(consensus), params.consensus_fraction
    )

    # Final clean pass on a generator independent of every trial
    rng = np.random.default_rng(params.rng_seed + params.n_trials)
    search = _LocalSearch(g, params, quantum)
    candidates: List[Tuple[FrozenSet[int], int]] = []
    for match in consensus:
        # Most frequent exact variant; first seen wins ties
        representative = max(match.variants, key=lambda c: match.variants[c])
        search.start(representative)
        search.clean(rng)
        cleaned = frozenset(search.members().tolist())
        if len(cleaned) >= params.min_size:
            candidates.append((cleaned, len(match.trials)))

    candidates.sort(key=lambda item: (-item[1], -len(item[0]), sorted(item[0])))
    kept: List[Tuple[FrozenSet[int], int]] = []
    for community, support in candidates:
        if all(jaccard(community, other) < params.dedup_jaccard for other, _ in kept):
            kept.append((community, support))

    kept.sort(key=lambda item: (-len(item[0]), sorted(item[0])))
    cover = Cover(
        communities=[_to_nodes(g, community) for community, _ in kept],
        trial_support=[support for _, support in kept],
        universe=universe,
        params=params.to_dict(),
    )
    logger.info("Detected %d communities (resolution=%s)", len(cover), params.resolution)
    return cover
