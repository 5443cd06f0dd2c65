#!/usr/bin/env python3
"""
Meetup co-membership network analysis

Runs the whole pipeline or one stage at a time:

    python run_pipeline.py run --config city.env
    python run_pipeline.py centrality --measure betweenness --top 10
    python run_pipeline.py communities --resolution 0.1 --min-size 5
    python run_pipeline.py export --format graphml --intra-community-only

Exit codes: 0 success, 1 usage or configuration error, 2 data error or
missing artifact, 3 non-convergence.
"""
import argparse
import os
import sys
import traceback
from typing import Dict, List, Optional

from centrality import ConvergenceError, Measure
from logging_config import setup_logging
from pipeline import (
    EXPORT_FORMATS, ConfigError, PipelineConfig, PipelineEngine, StageError, print_top,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CONVERGENCE = 3

# Flags that are not PipelineConfig fields
NON_CONFIG_ARGS = {"command", "config", "measure", "top", "format", "resolutions", "traceback"}


class UsageExitParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage-error code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def exit_code_for(error: BaseException) -> int:
    """Map an exception (or the cause of a StageError) to an exit status"""
    if isinstance(error, StageError):
        error = error.cause
    if isinstance(error, ConfigError):
        return EXIT_USAGE
    if isinstance(error, ConvergenceError):
        return EXIT_CONVERGENCE
    return EXIT_DATA


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_ingest_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("ingest")
    g.add_argument("--groups", dest="groups_path", help="groups file (.json or .csv)")
    g.add_argument("--memberships", dest="memberships_path", help="memberships file (.json or .csv)")
    g.add_argument("--city", help="keep only groups in this city (case-insensitive)")
    g.add_argument("--public-only", action=argparse.BooleanOptionalAction, default=None,
                   help="drop private groups")
    g.add_argument("--min-members", type=int, help="drop groups with fewer registered members")


def _add_stats_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("projection")
    g.add_argument("--min-weight", type=float, help="keep edges with Jaccard weight above this")
    g.add_argument("--plot", dest="plot_stats", action=argparse.BooleanOptionalAction, default=None,
                   help="write the edge weight histogram")


def _add_centrality_args(p: argparse.ArgumentParser, standalone: bool):
    g = p.add_argument_group("centrality")
    if standalone:
        g.add_argument("--measure", choices=[m.value for m in Measure] + ["all"], default="all",
                       help="measure to compute (default: all)")
        g.add_argument("--top", type=int, help="rows written to the TSV (default: all)")
        g.add_argument("--workers", dest="n_workers", type=int, help="threads for betweenness")
    g.add_argument("--distance-mode", choices=["inverse_weight", "unit"],
                   help="edge length for betweenness")
    g.add_argument("--normalize-betweenness", action=argparse.BooleanOptionalAction, default=None,
                   help="scale betweenness into [0, 1]")
    g.add_argument("--top-k", type=int, help="rows printed in listings")


def _add_detection_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("community detection")
    g.add_argument("--resolution", type=float, help="significance threshold in (0, 1)")
    g.add_argument("--min-size", type=int, help="smallest community kept")
    g.add_argument("--trials", dest="n_trials", type=int, help="independent detection passes")
    g.add_argument("--consensus", dest="consensus_fraction", type=float,
                   help="share of trials a community must appear in")
    g.add_argument("--dedup-jaccard", type=float, help="near-duplicate collapse threshold")
    g.add_argument("--seed", dest="rng_seed", type=int, help="random seed")
    g.add_argument("--workers", dest="n_workers", type=int, help="threads for trials and betweenness")


def _add_label_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("labelling")
    g.add_argument("--terms", dest="label_terms", type=int, help="terms per label")
    g.add_argument("--stopwords", dest="stopwords_path", help="stopword file")
    g.add_argument("--extra-stopwords", help="comma-separated extra stopwords, e.g. dublin")
    g.add_argument("--min-term-length", type=int, help="shortest term kept")


def _add_export_args(p: argparse.ArgumentParser, standalone: bool):
    g = p.add_argument_group("export")
    if standalone:
        g.add_argument("--format", action="append", choices=EXPORT_FORMATS,
                       help="output format, repeatable (default: EXPORT_FORMATS)")
    g.add_argument("--intra-community-only", action=argparse.BooleanOptionalAction, default=None,
                   help="keep only edges inside a community")


def build_parser() -> argparse.ArgumentParser:
    common = UsageExitParser(add_help=False)
    common.add_argument("--config", help="KEY=VALUE file overriding config.py defaults")
    common.add_argument("--output-dir", help="directory for every artifact")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--progress", dest="show_progress", action=argparse.BooleanOptionalAction,
                        default=None, help="show progress bars")
    common.add_argument("--traceback", action="store_true", help="print the traceback on failure")

    parser = UsageExitParser(
        description="Meetup co-membership network analysis",
        epilog="Exit codes: 0 success, 1 usage/config error, 2 data error, 3 non-convergence",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", parents=[common], help="load and filter the affiliation data")
    _add_ingest_args(p)

    p = sub.add_parser("stats", parents=[common], help="project the co-membership graph and describe it")
    _add_stats_args(p)

    p = sub.add_parser("centrality", parents=[common], help="rank groups by centrality")
    _add_centrality_args(p, standalone=True)

    p = sub.add_parser("communities", parents=[common], help="detect overlapping communities")
    _add_detection_args(p)

    p = sub.add_parser("label", parents=[common], help="label communities from names and descriptions")
    _add_label_args(p)

    p = sub.add_parser("export", parents=[common], help="write the graph for external tools")
    _add_export_args(p, standalone=True)

    p = sub.add_parser("run", parents=[common], help="run every stage")
    _add_ingest_args(p)
    _add_stats_args(p)
    _add_centrality_args(p, standalone=False)
    _add_detection_args(p)
    _add_label_args(p)
    _add_export_args(p, standalone=False)

    p = sub.add_parser("sweep", parents=[common], help="compare covers across resolutions")
    _add_detection_args(p)
    p.add_argument("--resolutions", type=_float_list, help="comma-separated resolutions")

    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, object]:
    return {k: v for k, v in vars(args).items() if k not in NON_CONFIG_ARGS and v is not None}


def _run_command(engine: PipelineEngine, args: argparse.Namespace):
    cfg = engine.cfg
    command = args.command

    if command == "ingest":
        ds = engine.ingest()
        print(f"Groups: {len(ds.groups)} | Users: {ds.user_count} | Memberships: {len(ds.memberships)}")

    elif command == "stats":
        stats = engine.stats()
        print(f"Nodes: {stats.node_count:,} | Edges: {stats.edge_count_undirected:,} "
              f"({stats.ordered_pair_count:,} ordered pairs)")
        print(f"Density: {stats.density:.4f} | Components: {stats.component_count} "
              f"(largest {stats.largest_component_size})")

    elif command == "centrality":
        measures = None if args.measure == "all" else [args.measure]
        reports = engine.centrality(measures, args.top)
        g = engine.load_graph()
        for report in reports.values():
            print_top(report, g, args.top or cfg.top_k)

    elif command == "communities":
        cover = engine.communities()
        sizes = sorted((len(c) for c in cover), reverse=True)
        print(f"Communities: {len(cover)}" + (f" | sizes {sizes[-1]}-{sizes[0]}" if sizes else ""))

    elif command == "label":
        labels = engine.label()
        for community_id, terms in labels.name_labels.items():
            print(f"  {community_id:>3}: {', '.join(terms)}")

    elif command == "export":
        for path in engine.export(args.format, cfg.intra_community_only):
            print(f"Written: {path}")

    elif command == "sweep":
        table = engine.sweep(args.resolutions)
        print(table.to_string(index=False))

    elif command == "run":
        results = engine.run()
        stats = results["stats"]
        cover = results["cover"]
        print(f"Nodes: {stats.node_count:,} | Edges: {stats.edge_count_undirected:,} | "
              f"Density: {stats.density:.4f}")
        g = engine.load_graph()
        for report in results["centrality"].values():
            print_top(report, g, cfg.top_k)
        print(f"\nCommunities: {len(cover)}")
        for community_id, terms in results["labels"].name_labels.items():
            print(f"  {community_id:>3}: {', '.join(terms)}")
        print(f"\nArtifacts written to: {engine.output_dir}")


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the requested stage and return the exit status"""
    args = build_parser().parse_args(argv)

    try:
        cfg = PipelineConfig.load(args.config, _overrides(args))
        cfg.validate(check_inputs=args.command in ("ingest", "run"))
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE

    setup_logging(cfg.log_level, os.path.join(cfg.output_dir, cfg.log_file), cfg.log_to_file)

    print("=" * 70)
    print(f"MEETUP NETWORK ANALYSIS - {args.command.upper()}")
    print("=" * 70)

    try:
        _run_command(PipelineEngine(cfg), args)
    except Exception as e:
        stage = f" [{e.stage}]" if isinstance(e, StageError) else ""
        cause = e.cause if isinstance(e, StageError) else e
        print(f"\nError{stage}: {cause}", file=sys.stderr)
        if args.traceback:
            traceback.print_exc()
        return exit_code_for(e)

    return EXIT_OK


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\nInterrupted by user")
        sys.exit(130)
