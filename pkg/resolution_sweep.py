#!/usr/bin/env python3
"""
Resolution sweep for community detection

Runs detection over a grid of resolution values and tabulates how the cover
changes, to help choose a resolution by inspection.
"""
import dataclasses
import itertools
import logging
import os
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

import config
from community import DetectionParams, detect_cover
from cover import Cover, jaccard, overlap_stats
from data_loader import DataLoader
from logging_config import setup_logging
from network import CoMembershipGraph, load_graph, project

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "resolution", "communities", "mean_size", "min_size", "max_size",
    "overlapping_nodes", "mean_pairwise_jaccard",
]


class ResolutionSweep:
    """
    Detect covers across resolutions on one graph
    """

    def __init__(self, g: CoMembershipGraph, params: Optional[DetectionParams] = None, progress: bool = False):
        self.g = g
        self.params = params or DetectionParams()
        self.progress = progress
        self.covers: Dict[float, Cover] = {}

    def run(self, resolutions: List[float]) -> pd.DataFrame:
        """
        Detect a cover for each resolution

        Args:
            resolutions: Values in (0, 1)

        Returns:
            DataFrame with one row per resolution, in ascending order
        """
        rows = []
        for resolution in tqdm(sorted(resolutions), desc="resolutions", disable=not self.progress):
            params = dataclasses.replace(self.params, resolution=resolution)
            cover = detect_cover(self.g, params)
            self.covers[resolution] = cover
            rows.append(self._describe(resolution, cover))
            logger.info("Resolution %s: %d communities", resolution, len(cover))
        return pd.DataFrame(rows, columns=SWEEP_COLUMNS)

    def _describe(self, resolution: float, cover: Cover) -> Dict[str, object]:
        sizes = [len(c) for c in cover]
        pairs = [jaccard(a, b) for a, b in itertools.combinations(cover.communities, 2)]
        return {
            "resolution": resolution,
            "communities": len(cover),
            "mean_size": float(np.mean(sizes)) if sizes else 0.0,
            "min_size": min(sizes, default=0),
            "max_size": max(sizes, default=0),
            "overlapping_nodes": overlap_stats(cover, self.g).overlapping_nodes,
            "mean_pairwise_jaccard": float(np.mean(pairs)) if pairs else 0.0,
        }


def sweep(g: CoMembershipGraph, resolutions: List[float], params: Optional[DetectionParams] = None) -> pd.DataFrame:
    """Tabulate community structure for each resolution"""
    return ResolutionSweep(g, params).run(resolutions)


def main():
    """Run a resolution sweep"""
    setup_logging(log_to_file=False)

    print("=" * 70)
    print("COMMUNITY RESOLUTION SWEEP")
    print("=" * 70)
    print()

    graph_path = os.path.join(config.OUTPUT_DIR, "graph.json")
    if os.path.exists(graph_path):
        print(f"Loading graph from {graph_path}")
        g = load_graph(graph_path)
    else:
        print("No projected graph found - using generated sample data...")
        g = project(DataLoader.generate_sample_data(seed=config.RNG_SEED))

    print(f"Graph: {g.node_count} nodes, {g.edge_count} edges")
    print(f"Resolutions: {config.SWEEP_RESOLUTIONS}")
    print()

    results_df = sweep(g, config.SWEEP_RESOLUTIONS)

    print("\n" + "=" * 70)
    print("SWEEP COMPLETED")
    print("=" * 70)
    print(results_df.to_string(index=False))

    os.makedirs(config.OUTPUT_DIR, exist_ok=True)
    out_path = os.path.join(config.OUTPUT_DIR, "sweep.tsv")
    results_df.to_csv(out_path, sep="\t", index=False)
    print(f"\nResults saved to: {out_path}")


if __name__ == "__main__":
    main()
