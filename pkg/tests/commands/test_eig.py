"""Tests for the eig command."""

import json
from unittest import mock

import pytest
from click.testing import CliRunner

from fracmem.cli import cli
from fracmem.errors import SolverError

INTERVAL = {"dim": 1, "origin": -1.25, "h": 0.125, "shape": 20, "domain": {"type": "rect", "lower": -1.0, "upper": 1.0}}


@pytest.fixture
def runner():
    """Create a CLI runner for testing."""
    return CliRunner()


@pytest.fixture
def domain_file(tmp_path):
    """Write the interval domain used by the eig tests."""
    path = tmp_path / "interval.json"
    path.write_text(json.dumps(INTERVAL))
    return path


def test_eig_writes_json_report(runner, domain_file, tmp_path):
    """Test the Dirichlet eigenvalue report of an interval."""
    stem = tmp_path / "out" / "eig"
    result = runner.invoke(cli, ["eig", "--domain", str(domain_file), "--output", str(stem)])
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "out" / "eig.json").read_text())
    assert report["provenance"]["command"] == "eig"
    assert report["result"]["lambda"] == pytest.approx(1.1578, rel=0.1)
    assert report["result"]["residual"] <= 1e-10
    assert report["result"]["n_cells"] == 16


def test_eig_prints_to_stdout(runner, domain_file):
    """Test the JSON report goes to stdout without --output."""
    result = runner.invoke(cli, ["eig", "--domain", str(domain_file), "--s", "0.3"])
    assert result.exit_code == 0
    report = json.loads(result.output)
    config = report["provenance"]["config"]
    assert config["s"] == 0.3
    assert config["near_policy"] and config["tail_policy"]
    assert config["domain"].endswith("interval.json")


def test_eig_with_potential_and_csv(runner, domain_file, tmp_path):
    """Test a potential raises the eigenvalue and the CSV lists the eigenvector."""
    shape = tmp_path / "potential.json"
    shape.write_text(json.dumps({"type": "rect", "lower": -1.0, "upper": -0.5}))
    base_stem, pot_stem = tmp_path / "base", tmp_path / "pot"
    runner.invoke(cli, ["eig", "-d", str(domain_file), "-o", str(base_stem)])
    result = runner.invoke(
        cli,
        ["eig", "-d", str(domain_file), "--potential", str(shape), "--alpha", "10", "-o", str(pot_stem), "--format", "both"],
    )
    assert result.exit_code == 0, result.output
    base = json.loads((tmp_path / "base.json").read_text())["result"]
    pot = json.loads((tmp_path / "pot.json").read_text())["result"]
    assert pot["potential_cells"] == 4
    assert base["lambda"] < pot["lambda"] < base["lambda"] + 10
    lines = (tmp_path / "pot.csv").read_text().splitlines()
    assert lines[2] == "i0,x0,u"
    assert len(lines) == 3 + 16


def test_eig_dumps_form(runner, domain_file, tmp_path):
    """Test --dump-form writes pair weights and tails."""
    dump = tmp_path / "form.csv"
    result = runner.invoke(cli, ["eig", "-d", str(domain_file), "--dump-form", str(dump), "-o", str(tmp_path / "r")])
    assert result.exit_code == 0
    lines = dump.read_text().splitlines()
    assert lines[2] == "i,j,weight"
    assert len(lines) == 3 + 16 * 15 // 2 + 16


def test_eig_rejects_invalid_order(runner, domain_file):
    """Test an order outside (0, 1) is a usage error."""
    result = runner.invoke(cli, ["eig", "-d", str(domain_file), "--s", "1.5"])
    assert result.exit_code == 2
    assert "s" in result.output


def test_eig_missing_domain_file(runner, tmp_path):
    """Test a missing domain file is rejected by the option parser."""
    result = runner.invoke(cli, ["eig", "-d", str(tmp_path / "nope.json")])
    assert result.exit_code == 2


def test_eig_solver_failure_exit_code(runner, domain_file):
    """Test solver failures exit with status 3."""
    with mock.patch("fracmem.commands.eig.smallest_eigenpair", side_effect=SolverError("stalled", 1e-4, 50)):
        result = runner.invoke(cli, ["eig", "-d", str(domain_file)])
    assert result.exit_code == 3
    assert "stalled" in result.output


def test_eig_malformed_domain_is_usage_error(runner, tmp_path):
    """Test a domain whose shape is not a mapping exits with status 2."""
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"domain": [1, 2]}))
    result = runner.invoke(cli, ["eig", "-d", str(path)])
    assert result.exit_code == 2
    assert "domain" in result.output
    assert "Traceback" not in result.output
