"""Tests for the init and config commands."""

import json

import pytest
import yaml
from click.testing import CliRunner

from fracmem.cli import cli


@pytest.fixture
def runner():
    """Create a CLI runner for testing."""
    return CliRunner()


def test_init_creates_project(runner):
    """Test init writes the settings file and example domains."""
    with runner.isolated_filesystem():
        result = runner.invoke(cli, ["init", "--dir", "lab"])
        assert result.exit_code == 0, result.output
        with open("lab/fracmem.yaml") as f:
            settings = yaml.safe_load(f)
        assert settings["s"] == 0.5
        assert "created" in settings
        with open("lab/domains/disc.json") as f:
            assert json.load(f)["domain"]["type"] == "ball"


def test_init_without_examples(runner):
    """Test --no-examples writes only the settings file."""
    with runner.isolated_filesystem():
        result = runner.invoke(cli, ["init", "--no-examples"])
        assert result.exit_code == 0
        with open("fracmem.yaml"):
            pass
        with pytest.raises(FileNotFoundError):
            open("domains/interval.json")


def test_init_refuses_existing_project(runner):
    """Test init aborts when a project already exists."""
    with runner.isolated_filesystem():
        runner.invoke(cli, ["init", "--no-examples"])
        result = runner.invoke(cli, ["init", "--no-examples"])
        assert result.exit_code == 1
        assert "already exists" in result.output


def test_config_set_and_show(runner, monkeypatch):
    """Test settings round through the project file and show their source."""
    monkeypatch.delenv("FRACMEM_THREADS", raising=False)
    with runner.isolated_filesystem():
        runner.invoke(cli, ["init", "--no-examples"])
        result = runner.invoke(cli, ["config", "set", "starts", "32"])
        assert result.exit_code == 0, result.output
        assert runner.invoke(cli, ["config", "set", "tol", "1e-8"]).exit_code == 0
        with open("fracmem.yaml") as f:
            settings = yaml.safe_load(f)
        assert settings["starts"] == 32
        assert settings["tol"] == 1e-8
        shown = runner.invoke(cli, ["config", "show"])
        assert shown.exit_code == 0
        assert "starts" in shown.output
        assert "project" in shown.output


def test_config_set_validates(runner):
    """Test unknown keys and mistyped values are rejected."""
    with runner.isolated_filesystem():
        assert runner.invoke(cli, ["config", "set", "colour", "red"]).exit_code == 2
        assert runner.invoke(cli, ["config", "set", "starts", "many"]).exit_code == 2
        assert runner.invoke(cli, ["config", "set", "tol", "small"]).exit_code == 2


def test_env_threads_override(runner, monkeypatch):
    """Test the thread count can be set from the environment."""
    monkeypatch.setenv("FRACMEM_THREADS", "3")
    with runner.isolated_filesystem():
        result = runner.invoke(cli, ["config", "show"])
        assert result.exit_code == 0
        assert "override" in result.output
