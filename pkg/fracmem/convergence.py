"""Grid refinement studies and Richardson extrapolation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from fracmem.eigensolve import DEFAULT_TOL, dirichlet_eigenvalue
from fracmem.errors import ParameterError
from fracmem.gagliardo import FormSpec, assemble_form
from fracmem.grid import Grid, grid_from_spec, mask_from_shape

logger = logging.getLogger(__name__)


def refine_grid(grid: Grid, factor: int = 2) -> Grid:
    """Same box with every cell split ``factor`` times along each axis."""
    if factor < 1:
        raise ParameterError("factor", f"must be a positive integer, got {factor}")
    return Grid(grid.dim, grid.origin, grid.h / factor, tuple(n * factor for n in grid.shape))


def richardson_extrapolate(values: Sequence[float], ratio: float = 2.0) -> tuple[float, float]:
    """
    Extrapolate the last three values of a sequence computed at spacings ``h, h/r, h/r^2``.

    Returns:
        The extrapolated limit and the observed order. When the differences do
        not contract the order is ``nan`` and the finest value is returned.
    """
    if len(values) < 3:
        raise ParameterError("values", "need at least three refinement levels")
    coarse, mid, fine = (float(v) for v in values[-3:])
    d1, d2 = mid - coarse, fine - mid
    if d1 == 0.0 or d2 == 0.0 or d1 * d2 < 0 or abs(d2) >= abs(d1):
        return fine, float("nan")
    order = math.log(abs(d1 / d2)) / math.log(ratio)
    return fine + d2 / (ratio**order - 1.0), order


@dataclass(frozen=True)
class RefinementStudy:
    """Dirichlet eigenvalues across grid spacings with their extrapolation."""

    rows: tuple[dict, ...]
    extrapolated: float
    order: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rows": list(self.rows),
            "extrapolated": self.extrapolated,
            "order": self.order,
            "config": self.config,
        }


def dirichlet_refinement_study(
    domain_spec: Mapping[str, Any],
    hs: Sequence[float],
    s: float = 0.5,
    *,
    near_policy: str = "hat",
    tol: float = DEFAULT_TOL,
) -> RefinementStudy:
    """
    First Dirichlet eigenvalue of one domain rasterized at several spacings.

    Args:
        domain_spec: Domain description (grid keys plus a ``domain`` shape).
        hs: Spacings, coarse to fine; each must divide the box length.
        s: Fractional order.
    """
    if len(hs) == 0:
        raise ParameterError("hs", "need at least one spacing")
    base = grid_from_spec(domain_spec)
    rows = []
    for h in hs:
        grid = base.with_spacing(float(h))
        mask = mask_from_shape(grid, domain_spec["domain"])
        form = assemble_form(grid, mask, FormSpec(s=s, dim=grid.dim, near_policy=near_policy))
        lam = dirichlet_eigenvalue(form, tol)
        logger.info("Refinement h=%.6g cells=%d lambda=%.10g", grid.h, mask.count, lam)
        rows.append({"h": grid.h, "n_cells": mask.count, "lambda": lam})
    values = [row["lambda"] for row in rows]
    if len(values) >= 3:
        ratio = rows[-2]["h"] / rows[-1]["h"]
        extrapolated, order = richardson_extrapolate(values, ratio)
    else:
        extrapolated, order = values[-1], float("nan")
    for row in rows:
        row.update(extrapolated=extrapolated, observed_order=order)
    return RefinementStudy(
        tuple(rows), extrapolated, order, {"s": s, "near_policy": near_policy, "tol": tol}
    )
