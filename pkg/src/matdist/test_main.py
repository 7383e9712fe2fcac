#!/usr/bin/env python3
"""
Pytest tests for the matdist command line.
"""

import csv
import json
import logging
import sys
from pathlib import Path

import pytest

# Add the src directory to the path
sys.path.insert(0, str(Path(__file__).parent.parent))

from matdist.main import EXIT_COMPUTATION, EXIT_CONFIG, EXIT_OK, build_parser, configure_logging, main

CONFIG_DIR = Path(__file__).parent.parent.parent / "config"

SMALL_SAMPLING = "[sampling]\nn_f = 20\nn_validation = 10\n"


def write_config(tmp_path, body, name="run.toml"):
    path = tmp_path / name
    path.write_text(body + "\n" + SMALL_SAMPLING, encoding="utf-8")
    return str(path)


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


class TestParser:
    """Test argument parsing."""

    def test_subcommands(self):
        """Test that every subcommand takes the shared options."""
        parser = build_parser()
        for command in ("dims", "classify", "isomorphism", "trace", "remodel"):
            args = parser.parse_args([command, "--config", "c.toml", "--seed", "3", "--jobs", "2"])
            assert args.command == command and args.seed == 3 and args.jobs == 2

    def test_command_required(self):
        """Test that a missing subcommand is a usage error."""
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestDims:
    """Test the dims command."""

    def test_grid_table(self, tmp_path):
        """Test a 3×3 homogeneous grid with base dimension 4 everywhere."""
        config = write_config(tmp_path, '[law]\nname = "homog_pair"')
        out = tmp_path / "out" / "nested"
        assert main(["dims", "--config", config, "--out", str(out), "--jobs", "1"]) == EXIT_OK
        rows = read_csv(out / "dims.csv")
        assert len(rows) == 9
        assert {row["dim_base"] for row in rows} == {"4"}
        document = read_json(out / "dims.json")
        assert document["status"] == "complete"
        assert document["schema_version"] == 1
        assert document["law"]["name"] == "homog_pair"
        assert document["sampling"]["n_f"] == 20

    def test_output_independent_of_jobs(self, tmp_path):
        """Test byte-identical reports for one and three workers."""
        config = write_config(tmp_path, '[law]\nname = "graded"')
        assert main(["dims", "--config", config, "--out", str(tmp_path / "a"), "--jobs", "1"]) == EXIT_OK
        assert main(["dims", "--config", config, "--out", str(tmp_path / "b"), "--jobs", "3"]) == EXIT_OK
        for name in ("dims.json", "dims.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_failed_point_exits_3(self, tmp_path):
        """Test that a point outside the domain gives an incomplete report."""
        config = write_config(tmp_path, '[law]\nname = "homog_pair"\n[grid]\nt_min = -1.0\nt_max = 0.0\nt_count = 2')
        assert main(["dims", "--config", config, "--out", str(tmp_path)]) == EXIT_COMPUTATION
        document = read_json(tmp_path / "dims.json")
        assert document["status"] == "incomplete"
        assert document["points"][0]["status"] == "failed"


class TestConfigErrors:
    """Test exit code 2."""

    def test_malformed_config(self, tmp_path, capsys):
        """Test a TOML syntax error."""
        path = tmp_path / "bad.toml"
        path.write_text("[law\nname = 1\n", encoding="utf-8")
        assert main(["dims", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "error:" in capsys.readouterr().err

    def test_unknown_law(self, tmp_path):
        """Test an unregistered law name."""
        config = write_config(tmp_path, '[law]\nname = "no_such_law"')
        assert main(["dims", "--config", config, "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_missing_config(self, tmp_path):
        """Test a config path that does not exist."""
        assert main(["classify", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG

    def test_isomorphism_needs_points(self, tmp_path):
        """Test that isomorphism without points, transitivity or symmetry is a config error."""
        config = write_config(tmp_path, '[law]\nname = "homog_pair"')
        assert main(["isomorphism", "--config", config, "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_too_few_samples_for_law(self, tmp_path, capsys):
        """Test that n_f too small for the law output is a config error."""
        path = tmp_path / "few.toml"
        path.write_text('[law]\nname = "homog_isotropic"\n[sampling]\nn_f = 5\n', encoding="utf-8")
        assert main(["dims", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_CONFIG
        assert "sampling.n_f" in capsys.readouterr().err

    def test_trace_directions_must_be_4_vectors(self, tmp_path):
        """Test that 3-vector trace directions are a config error."""
        config = write_config(tmp_path, '[law]\nname = "graded"\n[trace]\nseed = { t = 0.0, x = [0.5, 0.0, 0.0] }\n'
                                        'directions = [[0.0, 1.0, 0.0]]')
        assert main(["trace", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_CONFIG

    def test_print_config(self, tmp_path, capsys):
        """Test --print-config before running."""
        config = write_config(tmp_path, '[law]\nname = "homog_pair"\n[grid]\nt_count = 1\nx1_count = 1')
        assert main(["dims", "--config", config, "--out", str(tmp_path), "--print-config"]) == EXIT_OK
        assert "Current Configuration" in capsys.readouterr().out


class TestClassify:
    """Test the classify command."""

    def test_aging(self, tmp_path):
        """Test that the aging law is classified as smooth aging."""
        config = write_config(tmp_path, '[law]\nname = "aging_pair"\n[grid]\nt_count = 2\nx1_count = 2')
        assert main(["classify", "--config", config, "--out", str(tmp_path)]) == EXIT_OK
        verdicts = read_json(tmp_path / "classification.json")["verdicts"]
        assert verdicts["smooth_aging"]["value"] is True
        assert verdicts["uniform_aging"]["value"] is True
        assert verdicts["smooth_remodeling"]["value"] is False
        assert "proposition" in verdicts["smooth_aging"]["citation"]

    def test_homogeneous(self, tmp_path):
        """Test that the homogeneous law is a smooth uniform remodeling."""
        config = write_config(tmp_path, '[law]\nname = "homog_pair"\n[grid]\nt_count = 2\nx1_count = 2')
        assert main(["classify", "--config", config, "--out", str(tmp_path), "--seed", "5"]) == EXIT_OK
        document = read_json(tmp_path / "classification.json")
        assert document["verdicts"]["smooth_uniform_remodeling"]["value"] is True
        assert document["thresholds_used"]["seed"] == 5
        assert document["caveats"]

    def test_output_independent_of_jobs(self, tmp_path):
        """Test byte-identical classification JSON for one and three workers."""
        config = write_config(tmp_path, '[law]\nname = "graded"\n[grid]\nt_count = 2\nx1_count = 3')
        assert main(["classify", "--config", config, "--out", str(tmp_path / "a"), "--jobs", "1"]) == EXIT_OK
        assert main(["classify", "--config", config, "--out", str(tmp_path / "b"), "--jobs", "3"]) == EXIT_OK
        first = (tmp_path / "a" / "classification.json").read_bytes()
        assert first == (tmp_path / "b" / "classification.json").read_bytes()
        assert b"threshold_provenance" in first


class TestIsomorphism:
    """Test the isomorphism command."""

    def test_implant(self, tmp_path):
        """Test the shipped implant configuration."""
        config = str(CONFIG_DIR / "implant.toml")
        assert main(["isomorphism", "--config", config, "--out", str(tmp_path)]) == EXIT_OK
        document = read_json(tmp_path / "isomorphism.json")
        assert document["result"]["status"] == "found"
        assert document["result"]["residual"] <= 1e-6
        assert document["symmetry"]["dim"] == 3

    def test_aging_not_found_is_a_result(self, tmp_path):
        """Test that no isomorphism across time still exits 0."""
        config = write_config(tmp_path, '[law]\nname = "aging_pair"\n[isomorphism]\nn_starts = 2\n'
                                        'source = { t = 0.0, x = [0.0, 0.0, 0.0] }\n'
                                        'target = { t = 1.0, x = [0.0, 0.0, 0.0] }')
        assert main(["isomorphism", "--config", config, "--out", str(tmp_path)]) == EXIT_OK
        result = read_json(tmp_path / "isomorphism.json")["result"]
        assert result["status"] == "not_found"
        assert result["best_residual"] >= 1e-3

    def test_transitivity_outputs(self, tmp_path):
        """Test the transitivity report files."""
        config = write_config(tmp_path, '[law]\nname = "homog_pair"\n[grid]\nt_count = 2\nx1_count = 1\n'
                                        '[isomorphism]\nn_starts = 2\nprobe = true')
        assert main(["isomorphism", "--config", config, "--out", str(tmp_path)]) == EXIT_OK
        assert read_json(tmp_path / "transitivity.json")["orbits"] == [[0, 1]]
        assert read_csv(tmp_path / "transitivity.csv")[0]["status"] == "found"


class TestTrace:
    """Test the trace command."""

    def test_trace_csv(self, tmp_path):
        """Test a state-leaf trace of the graded law."""
        config = write_config(tmp_path, '[law]\nname = "graded"\n[trace]\nvariant = "StateT"\nsteps = 4\n'
                                        'step = 0.05\nseed = { t = 0.0, x = [0.5, 0.0, 0.0] }\n'
                                        'directions = [[0.0, 0.0, 1.0, 0.0]]')
        assert main(["trace", "--config", config, "--out", str(tmp_path)]) == EXIT_OK
        rows = read_csv(tmp_path / "trace.csv")
        assert len(rows) == 5
        assert float(rows[-1]["x2"]) == pytest.approx(0.2, abs=1e-8)
        assert read_json(tmp_path / "trace.json")["status"] == "complete"

    def test_domain_exit_writes_partial_trace(self, tmp_path):
        """Test exit 3 with the partial trace on leaving the domain."""
        config = write_config(tmp_path, '[law]\nname = "homog_pair"\n[trace]\nvariant = "BodyMaterial"\n'
                                        'steps = 3\nstep = 0.1\nseed = { t = 9.95, x = [0.0, 0.0, 0.0] }\n'
                                        'directions = [[1.0, 0.0, 0.0, 0.0]]')
        assert main(["trace", "--config", config, "--out", str(tmp_path)]) == EXIT_COMPUTATION
        document = read_json(tmp_path / "trace.json")
        assert document["status"] == "aborted"
        assert document["error"].startswith("DomainExitError")
        assert len(document["points"]) == 1

    def test_trace_requires_seed(self, tmp_path):
        """Test that a missing seed is a config error."""
        config = write_config(tmp_path, '[law]\nname = "graded"')
        assert main(["trace", "--config", config, "--out", str(tmp_path)]) == EXIT_CONFIG


class TestRemodel:
    """Test the remodel command."""

    def test_shipped_growth_process(self, tmp_path):
        """Test the exponential-growth example."""
        config = str(CONFIG_DIR / "remodel_growth.toml")
        assert main(["remodel", "--config", config, "--out", str(tmp_path)]) == EXIT_OK
        document = read_json(tmp_path / "remodel.json")
        assert set(document["growth"]["classes"]) == {"Growth"}
        assert document["mass"]["passed"] is True
        assert document["membership"] is None
        assert not (tmp_path / "remodel.csv").exists()

    def test_invalid_process_exits_2(self, tmp_path):
        """Test that a process not starting at I is a config error."""
        process = tmp_path / "p.csv"
        process.write_text("t,p11,p12,p13,p21,p22,p23,p31,p32,p33\n0,2,0,0,0,1,0,0,0,1\n1,2,0,0,0,1,0,0,0,1\n",
                           encoding="utf-8")
        config = write_config(tmp_path, '[law]\nname = "homog_pair"\n[remodel]\nprocess = "p.csv"')
        assert main(["remodel", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_CONFIG


class TestLogging:
    """Test log configuration from the environment."""

    def test_level_from_environment(self, monkeypatch):
        """Test that MATDIST_LOG sets the root level."""
        monkeypatch.setenv("MATDIST_LOG", "debug")
        configure_logging()
        assert logging.getLogger().level == logging.DEBUG

    def test_unknown_level_falls_back(self, monkeypatch):
        """Test that a bogus level name means WARNING."""
        monkeypatch.setenv("MATDIST_LOG", "chatty")
        configure_logging()
        assert logging.getLogger().level == logging.WARNING
