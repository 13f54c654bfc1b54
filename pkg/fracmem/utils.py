"""Shared helpers for fracmem commands: project settings, input files and error mapping."""

from __future__ import annotations

import os
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterator, Mapping, Optional

import click
import numpy as np
import yaml
from rich.console import Console
from rich.table import Table

from fracmem.errors import ParameterError, SolverError
from fracmem.grid import Field, Mask, domain_from_spec, mask_from_shape
from fracmem.inequalities import bump_field

CONFIG_FILENAME = "fracmem.yaml"
THREADS_ENV = "FRACMEM_THREADS"

DEFAULTS: dict[str, Any] = {
    "s": 0.5,
    "tol": 1e-10,
    "starts": 16,
    "seed": 0,
    "max_outer": 200,
    "near_policy": "hat",
    "tail_policy": "grid",
    "threads": 1,
    "format": "json",
    "fk_slack": 0.02,
}


class SolverFailure(click.ClickException):
    """Eigensolver failure surfaced on the command line."""

    exit_code = 3


@contextmanager
def cli_errors() -> Iterator[None]:
    """Translate library errors into click exceptions with their exit codes."""
    try:
        yield
    except ParameterError as exc:
        raise click.UsageError(str(exc)) from exc
    except SolverError as exc:
        raise SolverFailure(str(exc)) from exc


def find_project_root() -> Optional[Path]:
    """
    Find the fracmem project root directory.

    Searches upward from the current working directory for a directory
    containing a ``fracmem.yaml`` file.

    Returns:
        Path to the project root, or None if not found
    """
    current = Path.cwd()
    while True:
        if (current / CONFIG_FILENAME).is_file():
            return current
        if current == current.parent:
            return None
        current = current.parent


def load_project_config(root: Optional[Path]) -> dict:
    """Load ``fracmem.yaml`` from a project root; missing or unreadable files give ``{}``."""
    if root is None:
        return {}
    return _read(root / CONFIG_FILENAME)


def load_settings(config_path: Optional[Path] = None) -> dict:
    """
    Effective settings: defaults, then the project file, then environment overrides.

    Command-line options are applied on top by :func:`resolve`.
    """
    settings = dict(DEFAULTS)
    if config_path is not None:
        settings.update(_read(config_path))
    else:
        settings.update(load_project_config(find_project_root()))
    env_threads = os.environ.get(THREADS_ENV)
    if env_threads:
        try:
            settings["threads"] = max(1, int(env_threads))
        except ValueError as exc:
            raise click.UsageError(f"{THREADS_ENV} must be an integer, got {env_threads!r}") from exc
    return settings


def _read(path: Path) -> dict:
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except (yaml.YAMLError, OSError):
        return {}
    return data if isinstance(data, dict) else {}


def resolve(settings: Mapping[str, Any], **options: Any) -> dict:
    """Merge explicit command-line options (``None`` means unset) over settings."""
    merged = dict(settings)
    merged.update({key: value for key, value in options.items() if value is not None})
    return merged


def load_document(path: Path) -> dict:
    """
    Read a JSON or YAML input document.

    Raises:
        ParameterError: If the file cannot be read or is not a mapping.
    """
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except OSError as exc:
        raise ParameterError(str(path), f"cannot read file: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ParameterError(str(path), "not valid JSON or YAML") from exc
    if not isinstance(data, dict):
        raise ParameterError(str(path), "expected a mapping at the top level")
    return data


def load_domain(path: Path, h: Optional[float] = None) -> tuple[dict, Mask]:
    """Load a domain file and rasterize it, optionally at spacing ``h``."""
    spec = load_document(path)
    return spec, domain_from_spec(spec, h)


def load_subset(path: Path, domain: Mask) -> Mask:
    """Rasterize a shape file on the grid of ``domain`` and intersect it with the domain."""
    spec = load_document(path)
    shape = spec.get("domain", spec)
    if not isinstance(shape, Mapping):
        raise ParameterError("domain", f"{path}: shape must be a mapping with a 'type' key")
    raw = mask_from_shape(domain.grid, shape)
    keep = np.isin(raw.linear_indices, domain.linear_indices)
    return Mask(domain.grid, raw.cells[keep])


def load_field(path: Path) -> Field:
    """
    Load a field file.

    The file holds a domain description plus either ``values`` (in the
    domain's cell order) or a ``bump`` block with ``center``, ``radius`` and
    optionally ``kind``.
    """
    spec = load_document(path)
    mask = domain_from_spec(spec)
    if "values" in spec:
        return Field(mask, np.asarray(spec["values"], dtype=float))
    if "bump" in spec:
        bump = spec["bump"]
        try:
            return bump_field(mask, bump["center"], float(bump["radius"]), bump.get("kind", "bump"))
        except KeyError as exc:
            raise ParameterError("bump", f"missing key {exc.args[0]!r}") from exc
    raise ParameterError(str(path), "field file needs 'values' or 'bump'")


def parse_numbers(text: str) -> list[float]:
    """Parse a comma separated list of numbers; fractions like ``1/32`` are allowed."""
    try:
        return [float(Fraction(item.strip())) for item in text.split(",") if item.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise ParameterError("list", f"cannot parse {text!r} as numbers") from exc


def parse_shifts(text: str) -> list[tuple[int, ...]]:
    """Parse shifts written as ``0:0;1:0;-1:2`` (components separated by colons)."""
    try:
        return [tuple(int(v) for v in item.split(":")) for item in text.split(";") if item.strip()]
    except ValueError as exc:
        raise ParameterError("shifts", f"cannot parse {text!r}") from exc


def settings_from(ctx: click.Context) -> dict:
    """Settings stored by the CLI group, loading them when a command runs standalone."""
    if isinstance(ctx.obj, dict) and "settings" in ctx.obj:
        return ctx.obj["settings"]
    return load_settings()


def output_options(func: Any) -> Any:
    """Attach the ``--output`` and ``--format`` options shared by experiment commands."""
    func = click.option(
        "--format",
        "fmt",
        type=click.Choice(["json", "csv", "both"]),
        help="Report format (default from settings)",
    )(func)
    func = click.option(
        "--output",
        "-o",
        type=click.Path(dir_okay=False, path_type=Path),
        help="Output path stem; suffixes .json/.csv are added. Prints to stdout when omitted.",
    )(func)
    return func


def solver_options(func: Any) -> Any:
    """Attach the options controlling forms and eigensolves."""
    func = click.option("--near-policy", type=click.Choice(["hat", "midpoint"]), help="Near-field weights")(func)
    func = click.option("--tol", type=float, help="Eigensolver relative residual tolerance")(func)
    func = click.option("--s", "s", type=float, help="Fractional order in (0, 1)")(func)
    return func


def search_options(func: Any) -> Any:
    """Attach the multi-start options of the membrane optimizer."""
    func = click.option("--threads", type=int, help=f"Worker threads (env {THREADS_ENV})")(func)
    func = click.option("--seed", type=int, help="Seed of the random starts")(func)
    func = click.option("--starts", type=int, help="Number of multi-start runs")(func)
    return func


def print_summary(title: str, items: Mapping[str, Any], written: Optional[list[Path]] = None) -> None:
    """Show key results as a two-column table on stderr."""
    console = Console(stderr=True)
    table = Table(title=title, show_header=True, header_style="bold magenta")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green")
    for key, value in items.items():
        table.add_row(key, f"{value:.10g}" if isinstance(value, float) else str(value))
    console.print(table)
    for path in written or []:
        console.print(f"✅ Wrote {path}")
