"""Test settings, input loaders and parsers."""

import json
import click
import pytest
import yaml

from fracmem.errors import ParameterError, SolverError
from fracmem.utils import (
    CONFIG_FILENAME,
    DEFAULTS,
    SolverFailure,
    cli_errors,
    find_project_root,
    load_document,
    load_domain,
    load_field,
    load_settings,
    load_subset,
    parse_numbers,
    parse_shifts,
    resolve,
)

SEGMENT = {"dim": 1, "origin": 0.0, "h": 0.25, "shape": 8, "domain": {"type": "rect", "lower": 0.0, "upper": 1.5}}


def write_json(path, data):
    path.write_text(json.dumps(data))
    return path


def test_find_project_root(tmp_path, monkeypatch):
    """Test the project root is found from a nested directory."""
    (tmp_path / CONFIG_FILENAME).write_text("s: 0.3\n")
    nested = tmp_path / "runs" / "today"
    nested.mkdir(parents=True)
    monkeypatch.chdir(nested)
    assert find_project_root() == tmp_path


def test_load_settings_layers(tmp_path, monkeypatch):
    """Test defaults, the project file and the environment are layered in order."""
    (tmp_path / CONFIG_FILENAME).write_text(yaml.dump({"s": 0.3, "threads": 2}))
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("FRACMEM_THREADS", raising=False)
    settings = load_settings()
    assert settings["s"] == 0.3
    assert settings["threads"] == 2
    assert settings["starts"] == DEFAULTS["starts"]
    monkeypatch.setenv("FRACMEM_THREADS", "4")
    assert load_settings()["threads"] == 4
    monkeypatch.setenv("FRACMEM_THREADS", "many")
    with pytest.raises(click.UsageError):
        load_settings()


def test_load_settings_from_explicit_file(tmp_path, monkeypatch):
    """Test an explicit settings file replaces the project lookup."""
    monkeypatch.delenv("FRACMEM_THREADS", raising=False)
    path = tmp_path / "other.yaml"
    path.write_text("tol: 1.0e-8\n")
    assert load_settings(path)["tol"] == 1e-8


def test_resolve_ignores_unset_options():
    """Test command-line values override settings only when given."""
    merged = resolve({"s": 0.5, "tol": 1e-10}, s=0.25, tol=None)
    assert merged == {"s": 0.25, "tol": 1e-10}


def test_load_document_errors(tmp_path):
    """Test unreadable, malformed and non-mapping documents."""
    with pytest.raises(ParameterError):
        load_document(tmp_path / "missing.json")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2\n")
    with pytest.raises(ParameterError):
        load_document(bad)
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]")
    with pytest.raises(ParameterError):
        load_document(listing)


def test_load_domain_and_subset(tmp_path):
    """Test domains are rasterized and subsets clipped to them."""
    spec, mask = load_domain(write_json(tmp_path / "d.json", SEGMENT))
    assert spec["dim"] == 1
    assert mask.count == 6
    assert load_domain(tmp_path / "d.json", 0.125)[1].count == 12
    shape = write_json(tmp_path / "p.json", {"type": "rect", "lower": 1.0, "upper": 2.0})
    subset = load_subset(shape, mask)
    assert subset.cells.ravel().tolist() == [4, 5]


def test_load_field_values_and_bump(tmp_path):
    """Test both ways of describing a field."""
    values = write_json(tmp_path / "v.json", {**SEGMENT, "values": [1, 2, 3, 4, 5, 6]})
    assert load_field(values).values.tolist() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    bump = write_json(tmp_path / "b.json", {**SEGMENT, "bump": {"center": 0.75, "radius": 0.5}})
    field = load_field(bump)
    assert field.values.max() > 0
    assert field.mask.count == 6
    broken = write_json(tmp_path / "x.json", {**SEGMENT, "bump": {"center": 0.75}})
    with pytest.raises(ParameterError):
        load_field(broken)
    with pytest.raises(ParameterError):
        load_field(write_json(tmp_path / "e.json", SEGMENT))


def test_parse_numbers_and_shifts():
    """Test list parsing, including fractions."""
    assert parse_numbers("1/4, 0.5,2") == [0.25, 0.5, 2.0]
    assert parse_shifts("0:0;1:-2") == [(0, 0), (1, -2)]
    assert parse_shifts("3") == [(3,)]
    with pytest.raises(ParameterError):
        parse_numbers("a, b")
    with pytest.raises(ParameterError):
        parse_shifts("1:x")


def test_cli_errors_maps_exceptions():
    """Test library errors become click errors with the documented exit codes."""
    with pytest.raises(click.UsageError) as usage:
        with cli_errors():
            raise ParameterError("s", "out of range")
    assert usage.value.exit_code == 2
    with pytest.raises(SolverFailure) as failure:
        with cli_errors():
            raise SolverError("stalled", 1e-3, 10)
    assert failure.value.exit_code == 3
    assert "stalled" in failure.value.message

