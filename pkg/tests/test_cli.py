"""End-to-end command-line pipeline tests (in-process, via cli.main)."""

import hashlib
import json
import shutil

import pytest

from sfnet import cli
from sfnet.config import (PipelineConfig, apply_overrides, config_hash,
                          format_config, load_config, parse_config)
from sfnet.errors import ConfigError
from sfnet.sfn import SpeciesFlowNetwork, calibrate_lambda


def run(*argv):
    return cli.main([str(a) for a in argv])


def write_cfg(tmp_path, **overrides):
    """Write a config file rooted in tmp_path and return its path."""
    values = {
        "voyages": tmp_path / "data" / "voyages.csv",
        "ports": tmp_path / "data" / "ports.csv",
        "adjacency": tmp_path / "data" / "ecoregion_adjacency.csv",
        "discharges": tmp_path / "data" / "discharges.csv",
        "out": tmp_path / "artifacts",
        "seed": 7,
        "restarts": 2,
    }
    values.update(overrides)
    path = tmp_path / "pipe.cfg"
    path.write_text("".join(f"{k} = {v}\n" for k, v in values.items()),
                    encoding="utf-8")
    return path


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def last_error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


# --- config file format ------------------------------------------------------

class TestConfig:
    def test_round_trip_lossless(self):
        cfg = PipelineConfig(seed=99, tau=0.25, fraction=0.35,
                             voyages="a/b.csv", regions="DoverStrait,Kiel")
        assert parse_config(format_config(cfg)) == cfg

    def test_comments_and_blanks_ignored(self):
        cfg = parse_config("# comment\n\nseed = 3\n tau = 0.5 \n")
        assert cfg.seed == 3 and cfg.tau == 0.5

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("sneaky = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("seed = 1\nseed = 2\n")

    def test_bad_value_type_rejected(self):
        with pytest.raises(ConfigError, match="cannot parse"):
            parse_config("seed = 3.5\n")

    @pytest.mark.parametrize("line", [
        "tau = 0.0", "tau = 1.5", "fraction = 1.0", "restarts = 0",
        "reference_probability = 1.0", "rho = 1.5",
    ])
    def test_out_of_domain_rejected(self, line):
        with pytest.raises(ConfigError):
            parse_config(line + "\n")

    def test_override_changes_hash(self):
        base = PipelineConfig()
        assert config_hash(base) != config_hash(apply_overrides(base, seed=1))
        # ignored None overrides leave the hash alone
        assert config_hash(base) == config_hash(apply_overrides(base, seed=None))

    def test_hash_is_sha256_of_canonical_text(self):
        cfg = PipelineConfig(seed=42)
        expected = hashlib.sha256(format_config(cfg).encode("utf-8")).hexdigest()
        assert config_hash(cfg) == expected


# --- pipeline stages ----------------------------------------------------------

@pytest.fixture
def pipeline(tmp_path):
    """Generated fixture data plus built/clustered artifacts."""
    cfg_path = write_cfg(tmp_path)
    assert run("generate", "--config", cfg_path, "--sizes", "10,8,6",
               "--vessels", "9", "--leak", "0.1") == 0
    assert run("build", "--config", cfg_path) == 0
    assert run("cluster", "--config", cfg_path) == 0
    return cfg_path, tmp_path / "artifacts"


class TestBuildCluster:
    def test_stats_match_generator_ground_truth(self, pipeline):
        cfg_path, out = pipeline
        manifest = read_json(out / "generate_manifest.json")
        stats = read_json(out / "stats.json")
        assert stats["nodes"] == manifest["n_ports"] == 24
        assert stats["edges"] == manifest["n_distinct_routes"]
        assert stats["rejected_rows"] == {"voyages": 0, "ports": 0, "discharges": 0}

    def test_config_hash_embedded_everywhere(self, pipeline):
        cfg_path, out = pipeline
        expected = config_hash(load_config(cfg_path))
        for name in ("generate_manifest.json", "stats.json",
                     "discharge_models.json", "partition_summary.json"):
            assert read_json(out / name)["config_hash"] == expected
        for name in ("edges.csv", "partition.csv", "rejections.csv"):
            first = (out / name).read_text(encoding="utf-8").splitlines()[0]
            assert first == f"# config_hash={expected}"

    def test_partition_covers_network_and_reports_restarts(self, pipeline):
        cfg_path, out = pipeline
        summary = read_json(out / "partition_summary.json")
        assert len(summary["restart_codelengths"]) == 2
        assert summary["codelength"] == min(summary["restart_codelengths"])
        n_rows = sum(1 for line in (out / "partition.csv").read_text().splitlines()
                     if line and not line.startswith(("#", "node")))
        assert n_rows == summary["n_nodes"]

    def test_rerun_byte_identical(self, pipeline):
        cfg_path, out = pipeline
        run("report", "--config", cfg_path)
        run("risk", "--config", cfg_path)
        run("scenario", "--config", cfg_path)
        snapshot = {p.name: p.read_bytes() for p in out.iterdir()}
        for command in ("build", "cluster", "report", "risk", "scenario"):
            assert run(command, "--config", cfg_path) == 0
        for name, payload in snapshot.items():
            assert (out / name).read_bytes() == payload, name

    def test_seed_override_changes_embedded_hash(self, pipeline):
        cfg_path, out = pipeline
        assert run("build", "--config", cfg_path, "--seed", "8") == 0
        stats = read_json(out / "stats.json")
        assert stats["config_hash"] == config_hash(
            apply_overrides(load_config(cfg_path), seed=8))

    def test_more_restarts_never_worse(self, pipeline):
        cfg_path, out = pipeline
        assert run("cluster", "--config", cfg_path, "--restarts", "1") == 0
        one = read_json(out / "partition_summary.json")["codelength"]
        assert run("cluster", "--config", cfg_path, "--restarts", "10") == 0
        ten = read_json(out / "partition_summary.json")["codelength"]
        assert ten <= one + 1e-12


class TestErrorContract:
    def test_missing_input_exit_2(self, tmp_path, capsys):
        cfg_path = write_cfg(tmp_path)
        assert run("build", "--config", cfg_path) == 2
        error = last_error(capsys)
        assert error["error"] == "MissingInput"
        assert "voyages" in error["message"]

    def test_missing_config_file_exit_2(self, tmp_path, capsys):
        assert run("build", "--config", tmp_path / "absent.cfg") == 2
        assert last_error(capsys)["error"] == "MissingInput"

    def test_unknown_config_key_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("volume = 3\n", encoding="utf-8")
        assert run("build", "--config", bad) == 2
        assert last_error(capsys)["error"] == "ConfigError"

    def test_cluster_on_empty_network_exit_2(self, tmp_path, capsys):
        out = tmp_path / "artifacts"
        out.mkdir()
        (out / "edges.csv").write_text("origin,dest,weight,voyage_count\n",
                                       encoding="utf-8")
        assert run("cluster", "--out", out) == 2
        assert last_error(capsys)["error"] == "EmptyNetwork"

    def test_scenario_edges_kind_needs_partition(self, pipeline, tmp_path, capsys):
        cfg_path, out = pipeline
        (out / "partition.csv").unlink()
        assert run("scenario", "--config", cfg_path, "--kind", "edges") == 2
        assert last_error(capsys)["error"] == "MissingInput"

    def test_no_subcommand_exit_2(self, capsys):
        assert run() == 2


class TestReportRiskScenario:
    def test_report_artifacts(self, pipeline):
        cfg_path, out = pipeline
        assert run("report", "--config", cfg_path) == 0
        report = read_json(out / "flow_report.json")
        total = report["total_flow"]
        recon = sum(m["intra_flow"] + m["inter_out"] for m in report["modules"])
        assert recon == pytest.approx(total, abs=1e-9)
        inter = read_json(out / "inter_cluster_edges.json")
        assert all(e["origin_module"] != e["dest_module"] for e in inter["edges"])
        vessel = read_json(out / "vessel_type_stats.json")
        manifest = read_json(out / "generate_manifest.json")
        assert vessel["total_trips"] == manifest["n_legs"]
        assert vessel["unassigned_legs"] == 0

    def test_scenario_degree_hub_removal_lengthens_paths(self, tmp_path):
        # one hub shortcutting a directed ring: dropping it (top degree)
        # forces all traffic the long way around
        out = tmp_path / "artifacts"
        out.mkdir()
        net = SpeciesFlowNetwork(lam=calibrate_lambda())
        ring = [f"R{i:02d}" for i in range(10)]
        net.graph.add_nodes_from(ring + ["HUB"])
        for a, b in zip(ring, ring[1:] + ring[:1]):
            net.graph.add_edge(a, b, weight=0.01, voyages=1)
        for r in ring:
            net.graph.add_edge(r, "HUB", weight=0.01, voyages=1)
            net.graph.add_edge("HUB", r, weight=0.01, voyages=1)
        net.write_edge_csv(out / "edges.csv")
        assert run("scenario", "--out", out, "--fraction", "0.05") == 0
        scenario = read_json(out / "scenario.json")
        assert scenario["removed_nodes"] == ["HUB"]
        assert (scenario["after"]["average_path_length"]
                > scenario["before"]["average_path_length"])
        assert scenario["after"]["unreachable_pairs"] > scenario["before"]["unreachable_pairs"]

    def test_scenario_edges_kind_reports_inter_flow(self, pipeline):
        cfg_path, out = pipeline
        assert run("scenario", "--config", cfg_path, "--kind", "edges") == 0
        scenario = read_json(out / "scenario.json")
        assert scenario["kind"] == "edges"
        assert scenario["inter_flow_after"] <= scenario["inter_flow_before"]

    def test_evolve_identical_periods_all_jaccard_one(self, pipeline, tmp_path):
        cfg_path, out = pipeline
        p1, p2 = tmp_path / "p1", tmp_path / "p2"
        for p in (p1, p2):
            p.mkdir()
            shutil.copy(out / "partition.csv", p / "partition.csv")
            shutil.copy(out / "partition_summary.json", p / "partition_summary.json")
        assert run("evolve", "--config", cfg_path, p1, p2) == 0
        evolution = read_json(out / "evolution.json")
        assert evolution["births"] == [] and evolution["deaths"] == []
        for cluster in evolution["periods"][0]["clusters"]:
            assert cluster["matches"][0]["jaccard"] == 1.0

    def test_risk_skips_environment_free_ports(self, tmp_path):
        cfg_path = write_cfg(tmp_path)
        data = tmp_path / "data"
        data.mkdir()
        (data / "ports.csv").write_text(
            "port_id,name,lat,lon,ecoregion_id,temperature_c,salinity_ppt\n"
            "P1,One,0.0,0.0,E1,,\n"
            "P2,Two,1.0,1.0,E2,,\n"
            "P3,Three,2.0,2.0,E3,,\n",
            encoding="utf-8")
        (data / "ecoregion_adjacency.csv").write_text(
            "ecoregion_a,ecoregion_b\nE1,E2\n", encoding="utf-8")
        assert run("risk", "--config", cfg_path) == 0
        out = tmp_path / "artifacts"
        summary = read_json(out / "risk_summary.json")
        assert summary["n_risk_edges"] == 0
        assert summary["coverage"]["ports_with_environment"] == 0
        assert summary["coverage"]["ports_missing_environment"] == ["P1", "P2", "P3"]
        rows = [line for line in (out / "risk_edges.csv").read_text().splitlines()
                if line and not line.startswith("#")]
        assert rows == ["port_a,port_b,risk_level,groups_at_risk_bitmask"]
        # every port still gets a singleton sub-cluster
        assert summary["n_subclusters"] == 3

    def test_risk_module_filter(self, pipeline):
        cfg_path, out = pipeline
        assert run("risk", "--config", cfg_path, "--module", "0") == 0
        summary = read_json(out / "risk_summary.json")
        assert summary["module"] == 0
        partition_rows = [line.split(",") for line
                          in (out / "partition.csv").read_text().splitlines()[2:]]
        module_size = sum(1 for _, m in partition_rows if m == "0")
        assert summary["coverage"]["ports_total"] == module_size

    def test_risk_unknown_module_exit_2(self, pipeline, capsys):
        cfg_path, out = pipeline
        assert run("risk", "--config", cfg_path, "--module", "99") == 2
        assert last_error(capsys)["error"] == "MissingInput"
