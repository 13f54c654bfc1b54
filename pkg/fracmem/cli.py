"""Command line interface for fracmem."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence

import click
from rich.console import Console
from rich.logging import RichHandler

from fracmem import __version__
from fracmem.commands.config import config as config_cmd
from fracmem.commands.eig import eig as eig_cmd
from fracmem.commands.faber_krahn import faber_krahn as faber_krahn_cmd
from fracmem.commands.identity import identity as identity_cmd
from fracmem.commands.init import init as init_cmd
from fracmem.commands.lieb import lieb as lieb_cmd
from fracmem.commands.optimize import optimize as optimize_cmd
from fracmem.commands.rearrange import rearrange as rearrange_cmd
from fracmem.commands.sweep import sweep as sweep_cmd
from fracmem.utils import load_settings


def _configure_logging(verbose: int) -> None:
    logger = logging.getLogger("fracmem")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    if verbose <= 0:
        logger.setLevel(logging.WARNING)
    else:
        logger.setLevel(logging.INFO if verbose == 1 else logging.DEBUG)
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.propagate = False


@click.group()
@click.version_option(version=__version__, prog_name="fracmem")
@click.option("--verbose", "-v", count=True, help="Increase log output (-v info, -vv debug)")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Settings file to use instead of the project's fracmem.yaml",
)
@click.pass_context
def cli(ctx: click.Context, verbose: int, config_path: Optional[Path]) -> None:
    """Numerical laboratory for fractional composite membranes."""
    ctx.ensure_object(dict)
    _configure_logging(verbose)
    ctx.obj["settings"] = load_settings(config_path)


cli.add_command(init_cmd, "init")
cli.add_command(config_cmd, "config")

# Eigenvalue problems
cli.add_command(eig_cmd, "eig")
cli.add_command(optimize_cmd, "optimize")
cli.add_command(sweep_cmd, "sweep")

# Inequality experiments
cli.add_command(faber_krahn_cmd, "faber-krahn")
cli.add_command(lieb_cmd, "lieb")
cli.add_command(identity_cmd, "identity")
cli.add_command(rearrange_cmd, "rearrange")


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI and return its exit code instead of exiting.

    Exit codes: 0 success, 1 aborted, 2 invalid parameters, 3 solver failure.
    """
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="fracmem", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    cli()
