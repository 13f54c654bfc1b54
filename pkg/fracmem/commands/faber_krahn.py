"""Faber–Krahn comparison between a domain and its quasi-ball."""

from pathlib import Path
from typing import Optional

import click

from fracmem.commands.optimize import measure_from
from fracmem.grid import domain_from_spec
from fracmem.inequalities import faber_krahn_batch, faber_krahn_experiment
from fracmem.reports import emit, provenance
from fracmem.utils import (
    cli_errors,
    load_document,
    output_options,
    parse_numbers,
    print_summary,
    resolve,
    search_options,
    settings_from,
    solver_options,
)

_ROW_KEYS = (
    "Lambda_omega",
    "Lambda_ball",
    "gap",
    "h",
    "alpha",
    "c",
    "passed",
    "chain_lhs",
    "chain_rhs",
    "chain_holds",
    "polya_szego_ratio",
)


@click.command()
@click.option(
    "--domain",
    "-d",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Domain file (JSON or YAML)",
)
@click.option("--alpha", type=float, required=True, help="Potential height")
@click.option("--c", "c", type=float, help="Potential measure")
@click.option("--c-fraction", type=float, help="Potential measure as a fraction of |Omega|")
@click.option("--h", type=float, help="Override the grid spacing of the domain file")
@click.option("--slack", type=float, help="Allowed relative deficit of the ball (default from settings)")
@click.option(
    "--seeds",
    help="Comma separated blob seeds; runs one comparison per seed (needs --c-fraction)",
)
@solver_options
@search_options
@output_options
@click.pass_context
def faber_krahn(
    ctx: click.Context,
    domain: Path,
    alpha: float,
    c: Optional[float],
    c_fraction: Optional[float],
    h: Optional[float],
    slack: Optional[float],
    seeds: Optional[str],
    s: Optional[float],
    tol: Optional[float],
    near_policy: Optional[str],
    starts: Optional[int],
    seed: Optional[int],
    threads: Optional[int],
    output: Optional[Path],
    fmt: Optional[str],
) -> None:
    """
    Compare the optimal value on a domain with the one on its quasi-ball.

    Also replays the rearrangement chain for the optimal pair and reports the
    Pólya–Szegő ratio and the Hardy–Littlewood pair.
    """
    opts = resolve(
        settings_from(ctx),
        s=s,
        tol=tol,
        near_policy=near_policy,
        starts=starts,
        seed=seed,
        threads=threads,
        fk_slack=slack,
        format=fmt,
    )
    common = {
        "starts": int(opts["starts"]),
        "seed": int(opts["seed"]),
        "tol": float(opts["tol"]),
        "near_policy": opts["near_policy"],
        "slack": float(opts["fk_slack"]),
    }
    with cli_errors():
        spec = load_document(domain)
        if seeds:
            if c_fraction is None:
                raise click.UsageError("--seeds needs --c-fraction")
            seed_list = [int(v) for v in parse_numbers(seeds)]
            reports = faber_krahn_batch(
                spec, seed_list, alpha, c_fraction, float(opts["s"]), h=h, threads=int(opts["threads"]), **common
            )
        else:
            mask = domain_from_spec(spec, h)
            measure = measure_from(c, c_fraction, mask.measure)
            reports = [
                faber_krahn_experiment(
                    mask, alpha, measure, float(opts["s"]), threads=int(opts["threads"]), **common
                )
            ]

    rows = [{key: getattr(rep, key) for key in _ROW_KEYS} for rep in reports]
    if seeds:
        for row, blob_seed in zip(rows, seed_list):
            row["blob_seed"] = blob_seed
    params = {**opts, "domain": domain, "alpha": alpha, "c": c, "c_fraction": c_fraction, "seeds": seeds, **common}
    body = [rep.to_dict() for rep in reports]
    report = {"provenance": provenance("faber-krahn", common["seed"], params), "result": body if seeds else body[0]}
    written = emit(report, rows, output, opts["format"], common["seed"])
    if output is not None:
        worst = min(reports, key=lambda rep: rep.gap / rep.Lambda_omega)
        print_summary(
            "Faber-Krahn",
            {
                "runs": len(reports),
                "Lambda_Omega": worst.Lambda_omega,
                "Lambda_ball": worst.Lambda_ball,
                "gap": worst.gap,
                "all passed": all(rep.passed for rep in reports),
            },
            written,
        )
