"""
Pipeline engine: ingest -> stats -> centrality -> communities -> label -> export

Every stage reads its inputs from the output directory, so stages can run one
at a time from the command line or all together through PipelineEngine.run().
"""
import copy
import json
import logging
import os
import platform
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from typing import Dict, List, Optional

import networkx as nx
import numpy as np
import pandas as pd
import scipy
import sklearn
from dotenv import dotenv_values

import config
from centrality import (
    CentralityReport, DistanceMode, Measure, betweenness_centrality,
    degree_centrality, eigenvector_centrality, save_report, top_k,
)
from community import DetectionParams, detect_cover
from cover import Cover, community_overlap_matrix, community_summary, load_cover, overlap_stats, save_cover
from data_loader import AffiliationDataset, DataLoader
from labelling import (
    LabelSet, build_term_matrix, label_communities, load_stopwords, save_labels, tfidf_normalize,
)
from network import (
    CoMembershipGraph, GraphStats, compute_stats, intra_community, load_graph,
    plot_weight_distribution, project, stats_table, write_graph,
)
from resolution_sweep import ResolutionSweep

logger = logging.getLogger(__name__)

EXPORT_FORMATS = ("graphml", "gexf", "json", "tsv")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
TRUE_VALUES = {"1", "true", "yes", "on"}
FALSE_VALUES = {"0", "false", "no", "off"}

# Artifact file names inside the output directory
GROUPS_FILE = "groups.json"
MEMBERSHIPS_FILE = "memberships.csv"
GRAPH_FILE = "graph.json"
STATS_FILE = "stats.json"
STATS_TABLE_FILE = "stats.tsv"
WEIGHT_PLOT_FILE = "weight_distribution.png"
COVER_FILE = "cover.json"
OVERLAP_FILE = "overlap.json"
OVERLAP_MATRIX_FILE = "overlap_matrix.tsv"
LABELS_FILE = "labels.json"
LABELS_TABLE_FILE = "labels.tsv"
SUMMARY_FILE = "communities.tsv"
SWEEP_FILE = "sweep.tsv"
MANIFEST_FILE = "manifest.json"


class ConfigError(ValueError):
    """Invalid configuration value, unknown key or missing input path"""


class MissingArtifactError(FileNotFoundError):
    """An upstream stage has not produced its artifact yet"""


class StageError(RuntimeError):
    """A stage failed; `cause` keeps the original exception"""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"Stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def _default(name: str):
    return field(default_factory=lambda: copy.copy(getattr(config, name)))


@dataclass
class PipelineConfig:
    """
    All pipeline settings; field names are the lowercase config.py constants

    Precedence: config.py defaults < config file < explicit overrides.
    """
    # Input
    groups_path: str = _default("GROUPS_PATH")
    memberships_path: str = _default("MEMBERSHIPS_PATH")
    # Filters
    city: str = _default("CITY")
    public_only: bool = _default("PUBLIC_ONLY")
    min_members: int = _default("MIN_MEMBERS")
    # Projection
    min_weight: float = _default("MIN_WEIGHT")
    weight_thresholds: List[float] = _default("WEIGHT_THRESHOLDS")
    # Centrality
    eigenvector_tol: float = _default("EIGENVECTOR_TOL")
    eigenvector_max_iter: int = _default("EIGENVECTOR_MAX_ITER")
    distance_mode: str = _default("DISTANCE_MODE")
    normalize_betweenness: bool = _default("NORMALIZE_BETWEENNESS")
    top_k: int = _default("TOP_K")
    community_top_k: int = _default("COMMUNITY_TOP_K")
    # Detection
    resolution: float = _default("RESOLUTION")
    min_size: int = _default("MIN_SIZE")
    n_trials: int = _default("N_TRIALS")
    consensus_fraction: float = _default("CONSENSUS_FRACTION")
    match_jaccard: float = _default("MATCH_JACCARD")
    dedup_jaccard: float = _default("DEDUP_JACCARD")
    rng_seed: int = _default("RNG_SEED")
    max_cleanup_iters: int = _default("MAX_CLEANUP_ITERS")
    n_workers: int = _default("N_WORKERS")
    sweep_resolutions: List[float] = _default("SWEEP_RESOLUTIONS")
    # Labelling
    label_terms: int = _default("LABEL_TERMS")
    stopwords_path: str = _default("STOPWORDS_PATH")
    extra_stopwords: str = _default("EXTRA_STOPWORDS")
    min_term_length: int = _default("MIN_TERM_LENGTH")
    # Output
    output_dir: str = _default("OUTPUT_DIR")
    export_formats: List[str] = _default("EXPORT_FORMATS")
    intra_community_only: bool = _default("INTRA_COMMUNITY_ONLY")
    plot_stats: bool = _default("PLOT_STATS")
    # Logging
    log_level: str = _default("LOG_LEVEL")
    log_to_file: bool = _default("LOG_TO_FILE")
    log_file: str = _default("LOG_FILE")
    show_progress: bool = _default("SHOW_PROGRESS")

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Optional[Dict[str, object]] = None) -> "PipelineConfig":
        """
        Build a config from defaults, an optional KEY=VALUE file and overrides

        Args:
            path: dotenv-style file using config.py key names
            overrides: field name -> value; None values are ignored

        Returns:
            PipelineConfig (not yet validated)
        """
        cfg = cls()
        names = {f.name for f in fields(cls)}

        if path:
            if not os.path.exists(path):
                raise ConfigError(f"Config file not found: {path}")
            for key, raw in dotenv_values(path).items():
                name = key.strip().lower()
                if name not in names:
                    raise ConfigError(f"Unknown config key: {key}")
                setattr(cfg, name, _coerce(key, raw, getattr(cfg, name)))

        for name, value in (overrides or {}).items():
            if value is None:
                continue
            if name not in names:
                raise ConfigError(f"Unknown config key: {name.upper()}")
            setattr(cfg, name, value)
        return cfg

    def detection_params(self, resolution: Optional[float] = None) -> DetectionParams:
        try:
            return DetectionParams(
                resolution=self.resolution if resolution is None else resolution,
                min_size=self.min_size,
                n_trials=self.n_trials,
                consensus_fraction=self.consensus_fraction,
                dedup_jaccard=self.dedup_jaccard,
                rng_seed=self.rng_seed,
                max_cleanup_iters=self.max_cleanup_iters,
                match_jaccard=self.match_jaccard,
                n_workers=self.n_workers,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def validate(self, check_inputs: bool = False):
        """
        Check every bound; optionally check that the input files exist

        Raises:
            ConfigError: On the first violated constraint
        """
        def require(ok: bool, message: str):
            if not ok:
                raise ConfigError(message)

        require(self.min_members >= 0, "MIN_MEMBERS must be non-negative")
        require(0 <= self.min_weight < 1, "MIN_WEIGHT must lie in [0, 1)")
        require(all(0 <= t <= 1 for t in self.weight_thresholds), "WEIGHT_THRESHOLDS must lie in [0, 1]")
        require(self.eigenvector_tol > 0, "EIGENVECTOR_TOL must be positive")
        require(self.eigenvector_max_iter >= 1, "EIGENVECTOR_MAX_ITER must be at least 1")
        require(self.distance_mode in {m.value for m in DistanceMode},
                f"DISTANCE_MODE must be one of {[m.value for m in DistanceMode]}")
        require(self.top_k >= 1, "TOP_K must be at least 1")
        require(self.community_top_k >= 1, "COMMUNITY_TOP_K must be at least 1")
        self.detection_params()
        require(all(0 < r < 1 for r in self.sweep_resolutions), "SWEEP_RESOLUTIONS must lie in (0, 1)")
        require(self.label_terms >= 1, "LABEL_TERMS must be at least 1")
        require(self.min_term_length >= 1, "MIN_TERM_LENGTH must be at least 1")
        unknown = [f for f in self.export_formats if f not in EXPORT_FORMATS]
        require(not unknown, f"Unsupported export format(s): {unknown}")
        require(self.log_level.upper() in LOG_LEVELS, f"LOG_LEVEL must be one of {list(LOG_LEVELS)}")

        if check_inputs:
            for path in (self.groups_path, self.memberships_path):
                require(os.path.exists(path), f"Input file not found: {path}")

    def to_dict(self) -> Dict[str, object]:
        return {name.upper(): value for name, value in asdict(self).items()}


def _coerce(key: str, raw: Optional[str], default: object) -> object:
    """Convert a config-file string to the type of the default value"""
    text = "" if raw is None else raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in TRUE_VALUES:
                return True
            if lowered in FALSE_VALUES:
                return False
            raise ValueError(f"expected a boolean, got {text!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, list):
            items = [item.strip() for item in text.split(",") if item.strip()]
            if default and isinstance(default[0], float):
                return [float(item) for item in items]
            return items
        return text
    except ValueError as e:
        raise ConfigError(f"Invalid value for {key}: {e}") from None


@contextmanager
def atomic_path(path: str):
    """Yield `<path>.partial`; rename it to `path` when the block succeeds"""
    partial = path + ".partial"
    yield partial
    os.replace(partial, path)


class PipelineEngine:
    """
    Runs the analysis stages against one output directory

    Features:
    - each stage reloads its inputs from upstream artifacts
    - artifacts are written as .partial files and renamed on success
    - a manifest records the configuration, seed and library versions
    """

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.output_dir = cfg.output_dir
        self.completed: List[str] = []
        os.makedirs(self.output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _require(self, name: str, producer: str) -> str:
        path = self.path(name)
        if not os.path.exists(path):
            raise MissingArtifactError(
                f"Missing artifact {path}; run the '{producer}' subcommand first"
            )
        return path

    @contextmanager
    def _stage(self, name: str):
        logger.info("Stage '%s' started", name)
        try:
            yield
        except StageError:
            raise
        except Exception as e:
            logger.error("Stage '%s' failed: %s", name, e)
            raise StageError(name, e) from e
        self.completed.append(name)
        logger.info("Stage '%s' finished", name)

    # ==================== STAGES ====================

    def ingest(self) -> AffiliationDataset:
        """Load, filter and store the affiliation dataset"""
        with self._stage("ingest"):
            for path in (self.cfg.groups_path, self.cfg.memberships_path):
                if not os.path.exists(path):
                    raise ConfigError(f"Input file not found: {path}")
            ds = DataLoader.load_dataset(self.cfg.groups_path, self.cfg.memberships_path)
            ds = DataLoader.filter_dataset(
                ds,
                city=self.cfg.city or None,
                public_only=self.cfg.public_only,
                min_members=self.cfg.min_members,
            )
            with atomic_path(self.path(GROUPS_FILE)) as groups_tmp, \
                    atomic_path(self.path(MEMBERSHIPS_FILE)) as members_tmp:
                DataLoader.save_dataset(ds, groups_tmp, members_tmp)
        return ds

    def load_dataset(self) -> AffiliationDataset:
        return DataLoader.load_dataset(
            self._require(GROUPS_FILE, "ingest"), self._require(MEMBERSHIPS_FILE, "ingest")
        )

    def stats(self) -> GraphStats:
        """Project the dataset, store the graph and its statistics"""
        with self._stage("stats"):
            ds = self.load_dataset()
            g = project(ds, self.cfg.min_weight)
            stats = compute_stats(g, self.cfg.weight_thresholds)

            with atomic_path(self.path(GRAPH_FILE)) as tmp:
                write_graph(g, tmp, "json")
            with atomic_path(self.path(STATS_FILE)) as tmp:
                with open(tmp, "w", encoding="utf-8") as f:
                    json.dump(stats.to_dict(), f, indent=1, sort_keys=True)
            with atomic_path(self.path(STATS_TABLE_FILE)) as tmp:
                stats_table(stats).to_csv(tmp, sep="\t", index=False)
            if self.cfg.plot_stats:
                with atomic_path(self.path(WEIGHT_PLOT_FILE)) as tmp:
                    plot_weight_distribution(g, save_path=tmp)
        return stats

    def load_graph(self) -> CoMembershipGraph:
        return load_graph(self._require(GRAPH_FILE, "stats"))

    def centrality(self, measures: Optional[List[str]] = None, top: Optional[int] = None) -> Dict[Measure, CentralityReport]:
        """
        Compute and store centrality rankings

        Args:
            measures: Subset of eigenvector, betweenness, degree (all if None)
            top: Rows kept in each TSV (all if None)

        Returns:
            Mapping measure -> report
        """
        wanted = [Measure(m) for m in (measures or [m.value for m in Measure])]
        reports: Dict[Measure, CentralityReport] = {}
        with self._stage("centrality"):
            g = self.load_graph()
            for measure in wanted:
                if measure == Measure.EIGENVECTOR:
                    report = eigenvector_centrality(g, self.cfg.eigenvector_tol, self.cfg.eigenvector_max_iter)
                elif measure == Measure.BETWEENNESS:
                    report = betweenness_centrality(
                        g,
                        distance_mode=self.cfg.distance_mode,
                        normalized=self.cfg.normalize_betweenness,
                        n_workers=self.cfg.n_workers,
                        progress=self.cfg.show_progress,
                    )
                else:
                    report = degree_centrality(g)
                with atomic_path(self.path(f"centrality_{measure.value}.tsv")) as tmp:
                    save_report(report, g, tmp, top)
                reports[measure] = report
        return reports

    def communities(self, resolution: Optional[float] = None) -> Cover:
        """Detect the cover and store it with its overlap statistics"""
        with self._stage("communities"):
            g = self.load_graph()
            cover = detect_cover(g, self.cfg.detection_params(resolution), progress=self.cfg.show_progress)
            stats = overlap_stats(cover, g)

            with atomic_path(self.path(COVER_FILE)) as tmp:
                save_cover(cover, tmp)
            with atomic_path(self.path(OVERLAP_FILE)) as tmp:
                with open(tmp, "w", encoding="utf-8") as f:
                    json.dump({
                        "multiplicity": {str(k): v for k, v in stats.multiplicity.items()},
                        "percent_overlap": {str(k): v for k, v in stats.percent_overlap.items()},
                        "overlapping_nodes": stats.overlapping_nodes,
                        "unassigned": stats.unassigned,
                    }, f, indent=1, sort_keys=True)
            with atomic_path(self.path(OVERLAP_MATRIX_FILE)) as tmp:
                community_overlap_matrix(cover).to_csv(tmp, sep="\t")
        return cover

    def load_cover(self) -> Cover:
        return load_cover(self._require(COVER_FILE, "communities"))

    def label(self) -> LabelSet:
        """Label every community from group names and descriptions"""
        with self._stage("label"):
            g = self.load_graph()
            cover = self.load_cover()
            extra = [w for w in self.cfg.extra_stopwords.split(",") if w.strip()]
            stopwords = load_stopwords(self.cfg.stopwords_path, extra)

            attrs = g.graph.nodes
            names = {node: attrs[node].get("name", "") for node in g.nodes}
            descriptions = {node: attrs[node].get("description", "") for node in g.nodes}
            name_matrix = tfidf_normalize(build_term_matrix(names, stopwords, self.cfg.min_term_length))
            description_matrix = tfidf_normalize(build_term_matrix(descriptions, stopwords, self.cfg.min_term_length))
            labels = label_communities(name_matrix, cover, self.cfg.label_terms, description_matrix)

            with atomic_path(self.path(LABELS_FILE)) as json_tmp, \
                    atomic_path(self.path(LABELS_TABLE_FILE)) as tsv_tmp:
                save_labels(labels, json_tmp, tsv_tmp)
            with atomic_path(self.path(SUMMARY_FILE)) as tmp:
                community_summary(cover, g, labels, self.cfg.community_top_k).to_csv(tmp, sep="\t", index=False)
        return labels

    def export(self, formats: Optional[List[str]] = None, intra_only: Optional[bool] = None) -> List[str]:
        """
        Write the graph for external tools

        Args:
            formats: Subset of graphml, gexf, json, tsv
            intra_only: Keep only edges whose endpoints share a community

        Returns:
            Written file paths
        """
        formats = formats or self.cfg.export_formats
        intra_only = self.cfg.intra_community_only if intra_only is None else intra_only
        written = []
        with self._stage("export"):
            g = self.load_graph()
            cover = None
            if intra_only:
                cover = self.load_cover()
            elif os.path.exists(self.path(COVER_FILE)):
                cover = load_cover(self.path(COVER_FILE))
            if intra_only:
                g = intra_community(g, cover)

            stem = "network_intra" if intra_only else "network"
            for fmt in formats:
                if fmt not in EXPORT_FORMATS:
                    raise ConfigError(f"Unsupported export format: {fmt}")
                target = self.path(f"{stem}.{fmt}")
                with atomic_path(target) as tmp:
                    if fmt == "tsv":
                        edges = pd.DataFrame(list(g.edges()), columns=["source", "target", "weight"])
                        edges.to_csv(tmp, sep="\t", index=False)
                    else:
                        write_graph(g, tmp, fmt, cover)
                written.append(target)
        return written

    def sweep(self, resolutions: Optional[List[float]] = None) -> pd.DataFrame:
        """Scan detection resolutions and store the comparison table"""
        with self._stage("sweep"):
            g = self.load_graph()
            sweeper = ResolutionSweep(g, self.cfg.detection_params(), progress=self.cfg.show_progress)
            table = sweeper.run(resolutions or self.cfg.sweep_resolutions)
            with atomic_path(self.path(SWEEP_FILE)) as tmp:
                table.to_csv(tmp, sep="\t", index=False)
        return table

    # ==================== FULL RUN ====================

    def run(self) -> Dict[str, object]:
        """
        Run every stage in order and write the manifest

        Returns:
            Dictionary with the stage results
        """
        dataset = self.ingest()
        stats = self.stats()
        reports = self.centrality()
        cover = self.communities()
        labels = self.label()
        exported = self.export()
        self.write_manifest()
        return {
            "dataset": dataset,
            "stats": stats,
            "centrality": reports,
            "cover": cover,
            "labels": labels,
            "exported": exported,
        }

    def write_manifest(self):
        """Record the configuration, seed, library versions and artifacts"""
        manifest = {
            "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "config": self.cfg.to_dict(),
            "rng_seed": self.cfg.rng_seed,
            "stages": self.completed,
            "versions": library_versions(),
            "artifacts": sorted(
                name for name in os.listdir(self.output_dir)
                if not name.endswith(".partial") and name != MANIFEST_FILE
            ),
        }
        with atomic_path(self.path(MANIFEST_FILE)) as tmp:
            with open(tmp, "w", encoding="utf-8") as f:
                json.dump(manifest, f, indent=1, sort_keys=True)
        logger.info("Manifest written to: %s", self.path(MANIFEST_FILE))


def library_versions() -> Dict[str, str]:
    return {
        "meetupnet": config.VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "networkx": nx.__version__,
        "scikit-learn": sklearn.__version__,
    }


def print_top(report: CentralityReport, g: CoMembershipGraph, k: int):
    """Print a ranked listing of the top k nodes"""
    print(f"\nTop {k} by {report.measure.value} centrality:")
    for rank, (node, score) in enumerate(top_k(report, k), 1):
        print(f"  {rank:>3}. {g.name(node) or node:<50} {score:.4f}")
