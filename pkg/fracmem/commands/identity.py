"""Shift-integrated product seminorm decomposition for two fields."""

from pathlib import Path
from typing import Optional

import click

from fracmem.gagliardo import FormSpec
from fracmem.inequalities import product_identity_check
from fracmem.reports import emit, provenance
from fracmem.utils import cli_errors, load_field, output_options, print_summary, resolve, settings_from


@click.command()
@click.option(
    "--u1", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), help="First field file"
)
@click.option(
    "--u2", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Second field file"
)
@click.option("--s", "s", type=float, help="Fractional order in (0, 1)")
@click.option("--near-policy", type=click.Choice(["hat", "midpoint"]), help="Near-field weights")
@click.option("--radius", type=float, help="Pair interaction radius (default from the grids)")
@output_options
@click.pass_context
def identity(
    ctx: click.Context,
    u1: Path,
    u2: Path,
    s: Optional[float],
    near_policy: Optional[str],
    radius: Optional[float],
    output: Optional[Path],
    fmt: Optional[str],
) -> None:
    """Split the shift-integrated seminorm of u1(y) u2(y - x) into its three terms."""
    opts = resolve(settings_from(ctx), s=s, near_policy=near_policy, format=fmt)
    with cli_errors():
        f1, f2 = load_field(u1), load_field(u2)
        spec = FormSpec(s=float(opts["s"]), dim=f1.grid.dim, near_policy=opts["near_policy"])
        result = product_identity_check(f1, f2, spec, radius)

    body = result.to_dict()
    params = {**opts, "u1": u1, "u2": u2, "radius": radius}
    report = {"provenance": provenance("identity", None, params), "result": body}
    written = emit(report, [body], output, opts["format"], None)
    if output is not None:
        print_summary(
            "Product identity",
            {"J1": result.J1, "J2": result.J2, "J3": result.J3, "defect": result.defect},
            written,
        )
