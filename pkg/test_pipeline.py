"""
End-to-end tests for the pipeline engine and the command-line entry point
"""
import json
import os

import networkx as nx
import pandas as pd
import pytest

from centrality import ConvergenceError
from data_loader import DataLoader
from pipeline import ConfigError, PipelineConfig, StageError
from resolution_sweep import SWEEP_COLUMNS
from run_pipeline import EXIT_CONVERGENCE, EXIT_DATA, EXIT_OK, EXIT_USAGE, exit_code_for, main

RUN_ARTIFACTS = [
    "groups.json", "memberships.csv", "graph.json", "stats.json", "stats.tsv",
    "centrality_eigenvector.tsv", "centrality_betweenness.tsv", "centrality_degree.tsv",
    "cover.json", "overlap.json", "overlap_matrix.tsv",
    "labels.json", "labels.tsv", "communities.tsv",
    "network.graphml", "network.json", "network.tsv", "manifest.json",
]


def input_args(sample_files):
    groups, memberships = sample_files
    return ["--groups", str(groups), "--memberships", str(memberships)]


@pytest.fixture
def staged(tmp_path, sample_files):
    """Output directory after ingest and stats"""
    out = str(tmp_path / "out")
    assert main(["ingest", *input_args(sample_files), "--output-dir", out]) == EXIT_OK
    assert main(["stats", "--output-dir", out]) == EXIT_OK
    return out


# ==================== full run ====================

def test_run_writes_every_artifact(tmp_path, sample_files):
    out = tmp_path / "out"
    code = main(["run", *input_args(sample_files), "--output-dir", str(out), "--trials", "3"])
    assert code == EXIT_OK

    for name in RUN_ARTIFACTS:
        assert (out / name).exists(), name
    assert not list(out.glob("*.partial"))

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["stages"] == ["ingest", "stats", "centrality", "communities", "label", "export"]
    assert manifest["rng_seed"] == 42
    assert manifest["config"]["N_TRIALS"] == 3
    assert "networkx" in manifest["versions"]
    assert "cover.json" in manifest["artifacts"]


def test_run_is_byte_reproducible(tmp_path, sample_files):
    covers = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(["run", *input_args(sample_files), "--output-dir", str(out), "--trials", "3"]) == EXIT_OK
        covers.append((out / "cover.json").read_bytes())
    assert covers[0] == covers[1]


def test_missing_input_is_usage_error(tmp_path, sample_files, capsys):
    _, memberships = sample_files
    missing = tmp_path / "nope.json"
    code = main(["run", "--groups", str(missing), "--memberships", str(memberships),
                 "--output-dir", str(tmp_path / "out")])

    assert code == EXIT_USAGE
    assert "nope.json" in capsys.readouterr().err


# ==================== single stages ====================

def test_missing_upstream_artifact(tmp_path, capsys):
    code = main(["communities", "--output-dir", str(tmp_path / "empty")])
    assert code == EXIT_DATA
    assert "'stats'" in capsys.readouterr().err


def test_ingest_applies_filters(tmp_path, sample_files):
    out = tmp_path / "out"
    code = main(["ingest", *input_args(sample_files), "--output-dir", str(out), "--min-members", "45"])
    assert code == EXIT_OK

    ds = DataLoader.load_dataset(str(out / "groups.json"), str(out / "memberships.csv"))
    assert all(len(members) >= 45 for members in ds.members_of.values())


def test_communities_min_size(staged):
    code = main(["communities", "--output-dir", staged, "--min-size", "3", "--trials", "2"])
    assert code == EXIT_OK

    payload = json.loads(open(os.path.join(staged, "cover.json")).read())
    assert payload["params"]["min_size"] == 3
    assert payload["params"]["n_trials"] == 2
    assert all(entry["size"] >= 3 for entry in payload["communities"])
    assert os.path.exists(os.path.join(staged, "overlap.json"))


def test_export_intra_community_graphml(staged):
    assert main(["communities", "--output-dir", staged, "--trials", "2"]) == EXIT_OK
    code = main(["export", "--output-dir", staged, "--format", "graphml", "--intra-community-only"])
    assert code == EXIT_OK

    g = nx.read_graphml(os.path.join(staged, "network_intra.graphml"))
    for u, v in g.edges():
        shared = set(g.nodes[u]["communities"].split(";")) & set(g.nodes[v]["communities"].split(";"))
        assert shared - {""}


def test_export_without_cover_needs_communities_only_when_intra(staged):
    assert main(["export", "--output-dir", staged, "--format", "gexf"]) == EXIT_OK
    assert os.path.exists(os.path.join(staged, "network.gexf"))
    assert main(["export", "--output-dir", staged, "--intra-community-only"]) == EXIT_DATA


def test_centrality_single_measure(staged):
    code = main(["centrality", "--output-dir", staged, "--measure", "betweenness", "--top", "10"])
    assert code == EXIT_OK

    table = pd.read_csv(os.path.join(staged, "centrality_betweenness.tsv"), sep="\t")
    assert len(table) == 10
    assert list(table["rank"]) == list(range(1, 11))
    assert table["score"].is_monotonic_decreasing
    assert not os.path.exists(os.path.join(staged, "centrality_eigenvector.tsv"))


def test_label_writes_summary(staged):
    assert main(["communities", "--output-dir", staged, "--trials", "2", "--min-size", "2"]) == EXIT_OK
    assert main(["label", "--output-dir", staged, "--terms", "3"]) == EXIT_OK

    summary = pd.read_csv(os.path.join(staged, "communities.tsv"), sep="\t")
    assert list(summary.columns) == [
        "community", "size", "pct_over", "top_members", "name_label", "description_label",
    ]
    labels = json.loads(open(os.path.join(staged, "labels.json")).read())
    assert all(len(entry["name_label"]) <= 3 for entry in labels.values())


def test_sweep_subcommand(staged):
    code = main(["sweep", "--output-dir", staged, "--resolutions", "0.05,0.2", "--trials", "2"])
    assert code == EXIT_OK

    table = pd.read_csv(os.path.join(staged, "sweep.tsv"), sep="\t")
    assert list(table.columns) == SWEEP_COLUMNS
    assert list(table["resolution"]) == [0.05, 0.2]


def test_non_convergence_exit_code(tmp_path, staged):
    config_file = tmp_path / "strict.env"
    config_file.write_text("EIGENVECTOR_MAX_ITER=1\nEIGENVECTOR_TOL=1e-15\n")
    code = main(["centrality", "--output-dir", staged, "--config", str(config_file), "--measure", "eigenvector"])
    assert code == EXIT_CONVERGENCE


# ==================== configuration ====================

def test_config_precedence(tmp_path):
    path = tmp_path / "city.env"
    path.write_text(
        "RESOLUTION=0.2\n"
        "MIN_SIZE=4\n"
        "PUBLIC_ONLY=no\n"
        "WEIGHT_THRESHOLDS=0.1,0.2\n"
        "EXPORT_FORMATS=json,tsv\n"
        "CITY=Dublin\n"
    )
    cfg = PipelineConfig.load(str(path), {"min_size": 6, "rng_seed": None})

    assert cfg.resolution == 0.2
    assert cfg.min_size == 6
    assert cfg.public_only is False
    assert cfg.weight_thresholds == [0.1, 0.2]
    assert cfg.export_formats == ["json", "tsv"]
    assert cfg.city == "Dublin"
    assert cfg.rng_seed == 42
    cfg.validate()


def test_config_defaults_are_independent_copies():
    a, b = PipelineConfig(), PipelineConfig()
    a.weight_thresholds.append(0.9)
    assert 0.9 not in b.weight_thresholds


def test_config_unknown_key(tmp_path):
    path = tmp_path / "bad.env"
    path.write_text("RESOLUTON=0.2\n")
    with pytest.raises(ConfigError, match="RESOLUTON"):
        PipelineConfig.load(str(path))


@pytest.mark.parametrize("line", ["RESOLUTION=1.5", "MIN_SIZE=zero", "PUBLIC_ONLY=maybe", "LOG_LEVEL=LOUD"])
def test_config_invalid_value_exits_with_usage(tmp_path, line):
    path = tmp_path / "bad.env"
    path.write_text(line + "\n")
    assert main(["stats", "--config", str(path), "--output-dir", str(tmp_path / "out")]) == EXIT_USAGE


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig.load(str(tmp_path / "missing.env"))


def test_argument_error_exits_with_usage():
    with pytest.raises(SystemExit) as info:
        main(["centrality", "--measure", "pagerank"])
    assert info.value.code == EXIT_USAGE


def test_exit_code_mapping():
    assert exit_code_for(StageError("centrality", ConvergenceError("no", {}, 5))) == EXIT_CONVERGENCE
    assert exit_code_for(StageError("ingest", ConfigError("bad"))) == EXIT_USAGE
    assert exit_code_for(StageError("stats", FileNotFoundError("graph.json"))) == EXIT_DATA


# ==================== desk scale ====================

@pytest.mark.slow
def test_desk_scale_run(tmp_path):
    ds = DataLoader.generate_sample_data(
        n_groups=1500, n_users=15000, n_topics=7, groups_per_user=(3, 12), cross_topic_prob=0.3, seed=1
    )
    groups, memberships = tmp_path / "groups.json", tmp_path / "memberships.csv"
    DataLoader.save_dataset(ds, str(groups), str(memberships))

    out = tmp_path / "out"
    code = main([
        "run", "--groups", str(groups), "--memberships", str(memberships),
        "--output-dir", str(out), "--trials", "2", "--workers", "4",
    ])
    assert code == EXIT_OK

    stats = json.loads((out / "stats.json").read_text())
    assert stats["node_count"] == 1500
    cover = json.loads((out / "cover.json").read_text())
    assert len(cover["communities"]) >= 1
