"""Initialize a fracmem project directory."""

import json
from datetime import datetime, timezone
from pathlib import Path

import click
import yaml
from rich.console import Console

from fracmem.utils import CONFIG_FILENAME, DEFAULTS

EXAMPLES = {
    "interval.json": {
        "dim": 1,
        "origin": -1.0,
        "h": 0.03125,
        "shape": 64,
        "domain": {"type": "rect", "lower": -1.0, "upper": 1.0},
    },
    "disc.json": {
        "dim": 2,
        "origin": [-1.0, -1.0],
        "h": 0.0625,
        "shape": [32, 32],
        "domain": {"type": "ball", "center": [0.0, 0.0], "radius": 0.9},
    },
    "blob.json": {
        "dim": 2,
        "origin": [-1.0, -1.0],
        "h": 0.03125,
        "shape": [64, 64],
        "domain": {"type": "blob", "seed": 0, "fill": 0.35},
    },
}


@click.command()
@click.option(
    "--dir",
    "-d",
    type=click.Path(file_okay=False, path_type=Path),
    default=".",
    help="Directory to initialize the fracmem project in",
)
@click.option("--examples/--no-examples", default=True, show_default=True, help="Write example domain files")
def init(dir: Path, examples: bool) -> None:  # noqa: A002
    """
    Initialize a fracmem project: a settings file plus example domains.
    """
    console = Console()
    config_path = dir / CONFIG_FILENAME
    if config_path.exists():
        click.echo(f"❌ A fracmem project already exists in this directory ({CONFIG_FILENAME}).")
        click.echo("To start fresh, remove it first.")
        raise click.Abort

    dir.mkdir(parents=True, exist_ok=True)
    settings = dict(DEFAULTS)
    settings["created"] = datetime.now(timezone.utc).isoformat()
    with open(config_path, "w") as f:
        yaml.safe_dump(settings, f, default_flow_style=False, sort_keys=True)
    console.print(f"✅ Wrote {config_path}")

    if examples:
        domains = dir / "domains"
        domains.mkdir(exist_ok=True)
        for name, spec in EXAMPLES.items():
            path = domains / name
            if not path.exists():
                path.write_text(json.dumps(spec, indent=2) + "\n")
                console.print(f"✅ Wrote {path}")

    console.print("\n[bold green]Project ready.[/] Try:")
    console.print(f"  fracmem eig --domain {dir / 'domains' / 'interval.json'}")
