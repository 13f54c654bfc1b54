"""Settings management commands for fracmem."""

from pathlib import Path

import click
import yaml
from rich.console import Console
from rich.table import Table

from fracmem.utils import CONFIG_FILENAME, DEFAULTS, find_project_root, load_project_config, settings_from


@click.group()
def config() -> None:
    """Show or change fracmem settings."""


@config.command()
@click.pass_context
def show(ctx: click.Context) -> None:
    """Show the effective settings and where they come from."""
    console = Console()
    root = find_project_root()
    project = load_project_config(root)
    settings = settings_from(ctx)

    console.print("\n[bold blue]fracmem settings[/]")
    console.print(f"Project file: {root / CONFIG_FILENAME if root else 'none (defaults)'}")
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Key", style="cyan")
    table.add_column("Value", style="green")
    table.add_column("Source", style="yellow")
    for key in sorted(settings):
        if key in project and project[key] == settings[key]:
            source = "project"
        elif key in DEFAULTS and DEFAULTS[key] == settings[key]:
            source = "default"
        else:
            source = "override"
        table.add_row(key, str(settings[key]), source)
    console.print(table)


@config.command(name="set")
@click.argument("key")
@click.argument("value")
def set_value(key: str, value: str) -> None:
    """Store KEY=VALUE in the project's fracmem.yaml (created in the current directory if absent)."""
    console = Console()
    if key not in DEFAULTS:
        raise click.UsageError(f"unknown setting {key!r}; known: {', '.join(sorted(DEFAULTS))}")
    try:
        parsed = yaml.safe_load(value)
    except yaml.YAMLError as exc:
        raise click.UsageError(f"cannot parse value {value!r}") from exc
    expected = type(DEFAULTS[key])
    if expected is float and not isinstance(parsed, bool):
        try:
            parsed = float(parsed)
        except (TypeError, ValueError):
            pass
    if not isinstance(parsed, expected) or isinstance(parsed, bool) != (expected is bool):
        raise click.UsageError(f"{key} expects a {expected.__name__}, got {value!r}")

    root = find_project_root() or Path.cwd()
    path = root / CONFIG_FILENAME
    data = load_project_config(root) if path.exists() else {}
    data[key] = parsed
    try:
        with open(path, "w") as f:
            yaml.safe_dump(data, f, default_flow_style=False, sort_keys=True)
    except OSError as e:
        click.echo(f"❌ Error writing configuration: {e}")
        raise click.Abort
    console.print(f"✅ Set {key} = {parsed!r} in {path}")
