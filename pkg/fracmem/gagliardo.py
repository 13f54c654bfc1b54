"""
Discrete fractional Gagliardo quadratic form on a grid mask.

The form is assembled for nodal values of tensor-product hat functions placed
at cell centres. Its pair weights depend only on the lattice offset between
two cells, so a single stencil serves every mask of a grid, and the diagonal
is one constant: the row sum of the whole-lattice stencil inside the tail
radius plus an analytic far-field term. Writing ``A = D0 I - 2 W`` for the
matrix of the form on a mask, the energy splits into

    Q(u) = sum_{i<j} 2 w_ij (u_i - u_j)^2 + sum_i t_i u_i^2,

with nonnegative tails ``t_i = D0 - 2 sum_j w_ij``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
from typing import Iterator, Sequence

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gamma, roots_jacobi, roots_legendre

from fracmem.errors import EmptyMaskError, ParameterError
from fracmem.grid import Field, Grid, Mask, _same_grid

logger = logging.getLogger(__name__)

NEAR_POLICIES = ("hat", "midpoint")
TAIL_POLICIES = ("grid", "domain", "fixed")

# Offsets with |m|_inf <= QUAD_BAND get quadrature weights under the "hat" policy.
QUAD_BAND = 4
JACOBI_ORDER = 8
LEGENDRE_ORDER = 8
ANGULAR_ORDER = 16

DENSE_MATVEC_LIMIT = 2048
_ROW_BLOCK = 512


def unit_ball_volume(dim: int) -> float:
    """Volume of the unit ball in ``dim`` dimensions."""
    return math.pi ** (dim / 2) / gamma(dim / 2 + 1)


def normalization_constant(dim: int, s: float) -> float:
    """
    Constant making the form match the Fourier symbol ``|xi|^(2s)``.

    Args:
        dim: Spatial dimension.
        s: Fractional order in (0, 1).

    Returns:
        ``s 4^s Gamma((dim + 2s)/2) / (pi^(dim/2) Gamma(1 - s))``.
    """
    return float(s * 4.0**s * gamma((dim + 2 * s) / 2) / (math.pi ** (dim / 2) * gamma(1 - s)))


@dataclass(frozen=True)
class FormSpec:
    """
    Kernel and discretization choices of a Gagliardo form.

    Attributes:
        s: Fractional order in (0, 1).
        dim: Spatial dimension, 1 or 2.
        near_policy: ``"hat"`` (quadrature weights near the diagonal) or
            ``"midpoint"`` (kernel sampled at offsets everywhere).
        tail_policy: How the tail radius is chosen: from the grid box, from the
            domain bounding box, or ``"fixed"`` to ``tail_radius``.
        tail_radius: Radius used by the ``"fixed"`` policy.
    """

    s: float
    dim: int
    near_policy: str = "hat"
    tail_policy: str = "grid"
    tail_radius: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.s < 1.0:
            raise ParameterError("s", f"must lie in (0, 1), got {self.s}")
        if self.dim not in (1, 2):
            raise ParameterError("dim", f"must be 1 or 2, got {self.dim}")
        if self.near_policy not in NEAR_POLICIES:
            raise ParameterError("near_policy", f"expected one of {NEAR_POLICIES}, got {self.near_policy!r}")
        if self.tail_policy not in TAIL_POLICIES:
            raise ParameterError("tail_policy", f"expected one of {TAIL_POLICIES}, got {self.tail_policy!r}")
        if self.tail_policy == "fixed" and not (self.tail_radius and self.tail_radius > 0):
            raise ParameterError("tail_radius", "a positive radius is required by the fixed policy")

    @property
    def C_Ns(self) -> float:
        return normalization_constant(self.dim, self.s)

    def with_fixed_radius(self, radius: float) -> "FormSpec":
        return replace(self, tail_policy="fixed", tail_radius=float(radius))


def _bspline(t: np.ndarray) -> np.ndarray:
    """Centred cubic B-spline, the self-correlation of the unit hat."""
    a = np.abs(t)
    inner = 2.0 / 3.0 - a**2 + 0.5 * a**3
    outer = np.clip(2.0 - a, 0.0, None) ** 3 / 6.0
    return np.where(a <= 1.0, inner, outer)


def _defect(offset: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Second difference ``P(m) - (P(m + z) + P(m - z)) / 2`` of the hat overlap profile."""
    centre = float(np.prod(_bspline(offset)))
    plus = np.prod(_bspline(offset + points), axis=-1)
    minus = np.prod(_bspline(offset - points), axis=-1)
    return centre - 0.5 * (plus + minus)


def _interaction_1d(offset: np.ndarray, s: float) -> float:
    beta = 1.0 - 2.0 * s
    reach = int(abs(offset[0])) + 2
    x, w = roots_jacobi(JACOBI_ORDER, 0.0, beta)
    z = 0.5 * (1.0 + x)
    total = 2.0 ** (-beta - 1.0) * np.sum(w * _defect(offset, z[:, None]) / z**2)
    xl, wl = roots_legendre(LEGENDRE_ORDER)
    for j in range(1, reach):
        z = j + 0.5 * (1.0 + xl)
        total += 0.5 * np.sum(wl * z ** (-1.0 - 2.0 * s) * _defect(offset, z[:, None]))
    total += float(_bspline(offset[0])) * reach ** (-2.0 * s) / (2.0 * s)
    return float(2.0 * total)


def _interaction_2d(offset: np.ndarray, s: float) -> float:
    beta = 1.0 - 2.0 * s
    power = 2.0 + 2.0 * s
    reach = int(np.max(np.abs(offset))) + 2
    total = 0.0

    # unit square around the singularity, polar coordinates per octant
    xj, wj = roots_jacobi(JACOBI_ORDER, 0.0, beta)
    xt, wt = roots_legendre(ANGULAR_ORDER)
    for k in range(8):
        lo, hi = k * math.pi / 4, (k + 1) * math.pi / 4
        theta = lo + 0.5 * (hi - lo) * (1.0 + xt)
        rho = 1.0 / np.maximum(np.abs(np.cos(theta)), np.abs(np.sin(theta)))
        r = rho[:, None] * 0.5 * (1.0 + xj[None, :])
        pts = np.stack([r * np.cos(theta)[:, None], r * np.sin(theta)[:, None]], axis=-1)
        radial = 2.0 ** (-beta - 1.0) * np.sum(wj * _defect(offset, pts) / r**2, axis=1)
        total += 0.5 * (hi - lo) * np.sum(wt * rho ** (2.0 - 2.0 * s) * radial)

    # remaining unit squares of [-reach, reach]^2, tensor Gauss-Legendre
    xl, wl = roots_legendre(LEGENDRE_ORDER)
    nodes = 0.5 * (1.0 + xl)
    weights = 0.25 * np.outer(wl, wl)
    corners = np.array(
        [(a, b) for a in range(-reach, reach) for b in range(-reach, reach) if not (a in (-1, 0) and b in (-1, 0))],
        dtype=float,
    )
    gx, gy = np.meshgrid(nodes, nodes, indexing="ij")
    local = np.stack([gx, gy], axis=-1)
    pts = corners[:, None, None, :] + local[None, :, :, :]
    dist = np.sqrt(np.sum(pts**2, axis=-1))
    total += float(np.sum(weights[None] * dist ** (-power) * _defect(offset, pts)))

    # exterior of the box: only the constant part of the defect survives
    xa, wa = roots_legendre(ANGULAR_ORDER)
    phi = math.pi / 8 * (1.0 + xa)
    angular = 8.0 * math.pi / 8 * np.sum(wa * np.cos(phi) ** (2.0 * s))
    total += float(np.prod(_bspline(offset))) * reach ** (-2.0 * s) / (2.0 * s) * angular
    return float(total)


def hat_interaction(offset: Sequence[int], s: float) -> float:
    """
    Dimensionless interaction integral of two hat functions at a lattice offset.

    Computes ``I(m) = integral |z|^(-dim-2s) [P(m) - (P(m+z) + P(m-z))/2] dz``
    where ``P`` is the overlap profile of two unit hats. The Galerkin matrix
    entry of the form at offset ``m`` is ``2 h^(dim-2s) I(m)``.

    Args:
        offset: Integer lattice offset with 1 or 2 components.
        s: Fractional order in (0, 1).
    """
    m = np.asarray(offset, dtype=float).reshape(-1)
    if m.size == 1:
        return _interaction_1d(m, s)
    if m.size == 2:
        return _interaction_2d(m, s)
    raise ParameterError("dim", f"must be 1 or 2, got {m.size}")


def _offset_norms(dim: int, extent: int) -> np.ndarray:
    axis = np.arange(-extent, extent + 1, dtype=float)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.sqrt(sum(m**2 for m in mesh))


# (dim, s, near_policy) combinations whose clipping has been logged
_CLIPPED: set[tuple[int, float, str]] = set()


@lru_cache(maxsize=16)
def _unit_weights(dim: int, s: float, near_policy: str, extent: int) -> np.ndarray:
    """Dimensionless pair weights on the offset box [-extent, extent]^dim, zero at the centre."""
    dist = _offset_norms(dim, extent)
    table = np.zeros_like(dist)
    nonzero = dist > 0
    table[nonzero] = dist[nonzero] ** (-(dim + 2.0 * s))
    if near_policy == "hat":
        band = min(QUAD_BAND, extent)
        for offset in itertools.product(range(band + 1), repeat=dim):
            if not any(offset) or (dim == 2 and offset[0] < offset[1]):
                continue
            value = -hat_interaction(offset, s)
            for perm in set(itertools.permutations(offset)):
                for signs in itertools.product((1, -1), repeat=dim):
                    index = tuple(extent + sg * o for sg, o in zip(signs, perm))
                    table[index] = value
    negative = table < 0
    if negative.any():
        key = (dim, s, near_policy)
        if key not in _CLIPPED:
            _CLIPPED.add(key)
            logger.info(
                "Clipping %d negative pair weights (s=%.3g, dim=%d, %s) to zero",
                int(negative.sum()),
                s,
                dim,
                near_policy,
            )
        table[negative] = 0.0
    table.flags.writeable = False
    return table


def tail_radius(grid: Grid, domain: Mask, spec: FormSpec) -> float:
    """
    Radius beyond which pair interactions are lumped into the diagonal.

    Raises:
        ParameterError: If a fixed radius does not exceed the domain extent.
    """
    lo = domain.cells.min(axis=0)
    hi = domain.cells.max(axis=0) + 1
    domain_extent = float(grid.h * np.sqrt(np.sum((hi - lo) ** 2.0)))
    if spec.tail_policy == "fixed":
        radius = float(spec.tail_radius)
        if radius <= domain_extent:
            raise ParameterError(
                "tail_radius", f"{radius} must exceed the domain extent {domain_extent:.6g}"
            )
        return radius
    diam = grid.diameter if spec.tail_policy == "grid" else domain_extent
    return diam + max(4.0 * grid.h, 0.5 * diam)


def _far_field(dim: int, s: float, n_ball: int) -> float:
    """Analytic kernel mass outside the volume-matched lattice ball, per cell."""
    omega = unit_ball_volume(dim)
    r_eff = (n_ball / omega) ** (1.0 / dim)
    return dim * omega * r_eff ** (-2.0 * s) / (2.0 * s)


def lattice_weights(spec: FormSpec, h: float, radius: float, extent: int | None = None) -> np.ndarray:
    """
    Physical pair weights ``w(m)`` on [-E, E]^dim, zero at the centre and for ``|m| h >= radius``.

    Args:
        spec: Form specification.
        h: Grid spacing.
        radius: Tail radius.
        extent: Half width E of the table; defaults to ``ceil(radius / h)``.
    """
    rho = radius / h
    need = int(math.ceil(rho))
    extent = need if extent is None else int(extent)
    table = _unit_weights(spec.dim, float(spec.s), spec.near_policy, max(extent, need))
    full = max(extent, need)
    crop = tuple(slice(full - extent, full + extent + 1) for _ in range(spec.dim))
    weights = np.array(table[crop]) * h ** (spec.dim - 2.0 * spec.s)
    weights[_offset_norms(spec.dim, extent) >= rho] = 0.0
    return weights


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """
    Assembled Gagliardo form on a mask.

    Attributes:
        spec: Kernel choices the form was built with.
        domain: Mask the form acts on.
        stencil: Pair weights ``w(m)`` for offsets spanning the grid box.
        diagonal: Constant diagonal ``D0``.
        far_diagonal: Part of ``D0`` coming from interactions beyond the tail radius.
        tail_radius: Radius separating explicit pairs from the far field.
    """

    spec: FormSpec
    domain: Mask
    stencil: np.ndarray
    diagonal: float
    far_diagonal: float
    tail_radius: float

    @property
    def grid(self) -> Grid:
        return self.domain.grid

    @property
    def n(self) -> int:
        return self.domain.count

    @property
    def C_Ns(self) -> float:
        return self.spec.C_Ns

    def _pair_rows(self, rows: slice) -> np.ndarray:
        cells = self.domain.cells
        centre = np.asarray(self.grid.shape) - 1
        diff = cells[rows, None, :] - cells[None, :, :] + centre
        return self.stencil[tuple(diff[..., a] for a in range(self.grid.dim))]

    @cached_property
    def pair_matrix(self) -> np.ndarray:
        """Dense symmetric matrix of pair weights ``w_ij`` with zero diagonal."""
        out = np.empty((self.n, self.n))
        for start in range(0, self.n, _ROW_BLOCK):
            block = slice(start, min(start + _ROW_BLOCK, self.n))
            out[block] = self._pair_rows(block)
        return out

    @cached_property
    def tails(self) -> np.ndarray:
        """Per-cell tail ``t_i = D0 - 2 sum_j w_ij``."""
        return self.diagonal - 2.0 * self.pair_matrix.sum(axis=1)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense matrix ``A`` with ``Q(u) = u^T A u``."""
        a = -2.0 * self.pair_matrix
        a[np.diag_indices(self.n)] = self.diagonal
        return a

    def _pair_apply(self, x: np.ndarray) -> np.ndarray:
        shape = self.grid.shape
        box = np.zeros(shape)
        idx = tuple(self.domain.cells.T)
        box[idx] = x
        conv = fftconvolve(box, self.stencil, mode="full")
        conv = conv[tuple(slice(n - 1, 2 * n - 1) for n in shape)]
        return conv[idx]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply ``A`` to nodal values in mask order."""
        x = np.asarray(x, dtype=float)
        if self.n <= DENSE_MATVEC_LIMIT:
            return self.matrix @ x
        return self.diagonal * x - 2.0 * self._pair_apply(x)

    def energy(self, values: np.ndarray) -> float:
        """``u^T A u`` for nodal values in mask order."""
        values = np.asarray(values, dtype=float)
        return float(values @ self.matvec(values))

    def pairwise_energy(self, values: np.ndarray) -> float:
        """Same energy evaluated through the pair and tail decomposition."""
        values = np.asarray(values, dtype=float)
        diff = values[:, None] - values[None, :]
        upper = np.triu(self.pair_matrix, k=1)
        return float(np.sum(2.0 * upper * diff**2) + np.sum(self.tails * values**2))

    def rows(self) -> Iterator[tuple[int, int, float]]:
        """Nonzero pairs ``(i, j, w_ij)`` with ``i < j``, then ``(i, i, t_i)`` tails."""
        w = self.pair_matrix
        for i, j in zip(*np.nonzero(np.triu(w, k=1))):
            yield int(i), int(j), float(w[i, j])
        for i, t in enumerate(self.tails):
            yield i, i, float(t)


def assemble_form(grid: Grid, domain: Mask, spec: FormSpec) -> QuadraticForm:
    """
    Build the discrete Gagliardo form of ``domain``.

    Raises:
        EmptyMaskError: If the domain has no cells.
        ParameterError: If the domain, grid and spec disagree.
    """
    if domain.count == 0:
        raise EmptyMaskError("domain", "cannot assemble a form on an empty mask")
    if not _same_grid(grid, domain.grid):
        raise ParameterError("domain", "mask does not live on the given grid")
    if spec.dim != grid.dim:
        raise ParameterError("dim", f"form dimension {spec.dim} != grid dimension {grid.dim}")

    radius = tail_radius(grid, domain, spec)
    rho = radius / grid.h
    extent = max(int(math.ceil(rho)), max(grid.shape) - 1)
    table = _unit_weights(grid.dim, float(spec.s), spec.near_policy, extent)
    inside = _offset_norms(grid.dim, extent) < rho
    n_ball = int(inside.sum())
    scale = grid.h ** (grid.dim - 2.0 * spec.s)
    near = float(np.sum(table[inside]))
    far = _far_field(grid.dim, spec.s, n_ball)

    crop = tuple(slice(extent - (n - 1), extent + n) for n in grid.shape)
    stencil = np.where(inside[crop], table[crop], 0.0) * scale

    logger.debug(
        "Assembled form: n=%d s=%.3g policy=%s R=%.4g D0=%.6g",
        domain.count,
        spec.s,
        spec.near_policy,
        radius,
        2.0 * (near + far) * scale,
    )
    return QuadraticForm(
        spec=spec,
        domain=domain,
        stencil=stencil,
        diagonal=2.0 * (near + far) * scale,
        far_diagonal=2.0 * far * scale,
        tail_radius=radius,
    )


def _check_field(form: QuadraticForm, field: Field) -> None:
    if field.mask != form.domain:
        raise ParameterError("field", "field is not defined on the form's domain")


def seminorm_sq(form: QuadraticForm, field: Field) -> float:
    """Discrete squared Gagliardo seminorm ``Q(u)``, always nonnegative."""
    _check_field(form, field)
    return max(form.energy(field.values), 0.0)


def pair_seminorm_sq(form: QuadraticForm, field: Field) -> float:
    """
    Pair-only part of the seminorm: the lattice sum over ordered pairs within the tail radius.

    Equals ``Q(u)`` minus the far-field lumping, so it is additive under the
    shift integrals used by the product decomposition.
    """
    _check_field(form, field)
    return form.energy(field.values) - form.far_diagonal * float(field.values @ field.values)


def rayleigh_quotient(form: QuadraticForm, field: Field, subset: Mask, alpha: float) -> float:
    """
    Composite-membrane Rayleigh quotient.

    ``((C/2) Q(u) + alpha sum_{subset} u^2 h^dim) / sum u^2 h^dim``

    Raises:
        ParameterError: If the field is zero, lives elsewhere, or ``subset`` is not in the domain.
    """
    _check_field(form, field)
    positions = form.domain.positions_of(subset)
    denom = field.norm_sq()
    if denom == 0.0:
        raise ParameterError("field", "Rayleigh quotient of the zero field is undefined")
    potential = alpha * float(np.sum(field.values[positions] ** 2)) * form.grid.cell_volume
    return (0.5 * form.C_Ns * seminorm_sq(form, field) + potential) / denom
