"""
Uniform Cartesian grids, cell masks and fields defined on masks.

Cells are addressed by integer multi-indices into a grid box. Two grids with
the same spacing are *lattice aligned* when their origins differ by an
integer number of cells; only aligned grids may be combined.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve

from fracmem.errors import EmptyMaskError, ParameterError

logger = logging.getLogger(__name__)

ALIGN_TOL = 1e-9
SHAPE_KINDS = ("ball", "rect", "union", "difference", "blob", "cells")


@dataclass(frozen=True)
class Grid:
    """
    A uniform box of cubic cells.

    Attributes:
        dim: Spatial dimension, 1 or 2.
        origin: Lower corner of the box.
        h: Cell side length.
        shape: Number of cells along each axis.
    """

    dim: int
    origin: tuple[float, ...]
    h: float
    shape: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ParameterError("dim", f"must be 1 or 2, got {self.dim}")
        if not self.h > 0:
            raise ParameterError("h", f"must be positive, got {self.h}")
        if len(self.origin) != self.dim or len(self.shape) != self.dim:
            raise ParameterError("shape", "origin and shape must have one entry per axis")
        if any(n < 1 for n in self.shape):
            raise ParameterError("shape", f"every axis needs at least one cell, got {self.shape}")

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(o + n * self.h for o, n in zip(self.origin, self.shape))

    @property
    def diameter(self) -> float:
        """Euclidean diameter of the grid box."""
        return float(self.h * np.sqrt(np.sum(np.square(self.shape))))

    def centers(self, cells: np.ndarray) -> np.ndarray:
        """Physical coordinates of cell centres for an (n, dim) index array."""
        return np.asarray(self.origin) + (np.asarray(cells, dtype=float) + 0.5) * self.h

    def all_cells(self) -> np.ndarray:
        """All cell indices of the box in lexicographic order."""
        axes = [np.arange(n) for n in self.shape]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1).astype(np.int64)

    def is_centered(self) -> bool:
        """Whether the box is symmetric about the coordinate origin."""
        return all(
            abs(o + 0.5 * n * self.h) <= ALIGN_TOL * self.h for o, n in zip(self.origin, self.shape)
        )

    def with_spacing(self, h: float) -> "Grid":
        """Same box discretized with spacing ``h``; the box length must be a multiple of ``h``."""
        ratio = np.asarray(self.shape, dtype=float) * self.h / h
        shape = np.rint(ratio).astype(int)
        if np.any(np.abs(ratio - shape) > 1e-6) or np.any(shape < 1):
            raise ParameterError("h", f"box of length {ratio * h} is not a multiple of h={h}")
        return Grid(self.dim, self.origin, float(h), tuple(int(n) for n in shape))


def make_grid(dim: int, origin: float | Sequence[float], h: float, shape: int | Sequence[int]) -> Grid:
    """Build a grid, broadcasting scalar ``origin``/``shape`` over all axes."""
    origin_t = tuple(float(o) for o in np.broadcast_to(np.asarray(origin, dtype=float), (dim,)))
    shape_t = tuple(int(n) for n in np.broadcast_to(np.asarray(shape), (dim,)))
    return Grid(int(dim), origin_t, float(h), shape_t)


def centered_grid(dim: int, h: float, shape: int | Sequence[int]) -> Grid:
    """Grid whose box is centred at the coordinate origin."""
    shape_t = tuple(int(n) for n in np.broadcast_to(np.asarray(shape), (dim,)))
    return Grid(dim, tuple(-0.5 * n * h for n in shape_t), float(h), shape_t)


def lattice_shift(source: Grid, target: Grid) -> np.ndarray:
    """
    Integer offset that maps cell indices of ``source`` to indices of ``target``.

    Raises:
        ParameterError: If the grids differ in dimension or spacing or are not lattice aligned.
    """
    if source.dim != target.dim:
        raise ParameterError("grid", f"dimension mismatch {source.dim} != {target.dim}")
    if not np.isclose(source.h, target.h, rtol=1e-12, atol=0.0):
        raise ParameterError("h", f"grid spacings differ: {source.h} != {target.h}")
    offset = (np.asarray(source.origin) - np.asarray(target.origin)) / target.h
    rounded = np.rint(offset)
    if np.any(np.abs(offset - rounded) > 1e-6):
        raise ParameterError("origin", "grids are not lattice aligned")
    return rounded.astype(np.int64)


def _same_grid(a: Grid, b: Grid) -> bool:
    return (
        a.dim == b.dim
        and a.shape == b.shape
        and np.isclose(a.h, b.h, rtol=1e-12, atol=0.0)
        and np.allclose(a.origin, b.origin, rtol=0.0, atol=ALIGN_TOL * a.h)
    )


@dataclass(frozen=True, eq=False)
class Mask:
    """
    A finite set of cells of a grid.

    ``cells`` is an (n, dim) integer array sorted lexicographically and free of
    duplicates; use :func:`make_mask` to build one from arbitrary indices.
    """

    grid: Grid
    cells: np.ndarray

    @property
    def count(self) -> int:
        return int(self.cells.shape[0])

    @property
    def measure(self) -> float:
        return self.count * self.grid.cell_volume

    def __len__(self) -> int:
        return self.count

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mask):
            return NotImplemented
        return (
            _same_grid(self.grid, other.grid)
            and self.cells.shape == other.cells.shape
            and bool(np.array_equal(self.cells, other.cells))
        )

    def __hash__(self) -> int:
        return hash((self.grid.shape, self.grid.h, self.cells.tobytes()))

    @cached_property
    def linear_indices(self) -> np.ndarray:
        """C-order linear indices of the cells; increasing because cells are sorted."""
        if self.count == 0:
            return np.zeros(0, dtype=np.int64)
        return np.ravel_multi_index(tuple(self.cells.T), self.grid.shape).astype(np.int64)

    def to_array(self) -> np.ndarray:
        """Boolean indicator array over the grid box."""
        arr = np.zeros(self.grid.shape, dtype=bool)
        if self.count:
            arr[tuple(self.cells.T)] = True
        return arr

    def positions_of(self, other: "Mask") -> np.ndarray:
        """
        Positions of ``other``'s cells inside this mask.

        Raises:
            ParameterError: If ``other`` lives on another grid or is not a subset.
        """
        if not _same_grid(self.grid, other.grid):
            raise ParameterError("mask", "masks live on different grids")
        pos = np.searchsorted(self.linear_indices, other.linear_indices)
        pos = np.clip(pos, 0, max(self.count - 1, 0))
        if other.count and (self.count == 0 or np.any(self.linear_indices[pos] != other.linear_indices)):
            raise ParameterError("mask", "set is not contained in the domain")
        return pos.astype(np.int64)

    def contains(self, other: "Mask") -> bool:
        try:
            self.positions_of(other)
        except ParameterError:
            return False
        return True

    def subset(self, positions: np.ndarray) -> "Mask":
        """Sub-mask made of the cells at the given positions."""
        return make_mask(self.grid, self.cells[np.asarray(positions, dtype=np.int64)])

    def complement_in(self, other: "Mask") -> "Mask":
        """Cells of this mask that are not in ``other`` (same grid)."""
        keep = ~np.isin(self.linear_indices, other.linear_indices)
        return Mask(self.grid, self.cells[keep])


def make_mask(grid: Grid, cells: np.ndarray | Sequence[Sequence[int]]) -> Mask:
    """
    Build a mask from cell indices, sorting and removing duplicates.

    Raises:
        ParameterError: If an index falls outside the grid box.
    """
    arr = np.asarray(cells, dtype=np.int64).reshape(-1, grid.dim)
    if arr.size and (np.any(arr < 0) or np.any(arr >= np.asarray(grid.shape))):
        raise ParameterError("cells", "cell index outside the grid box")
    if arr.shape[0] == 0:
        return Mask(grid, np.zeros((0, grid.dim), dtype=np.int64))
    return Mask(grid, np.unique(arr, axis=0))


def mask_from_array(grid: Grid, indicator: np.ndarray) -> Mask:
    """Mask of the cells where ``indicator`` is true."""
    indicator = np.asarray(indicator, dtype=bool)
    if indicator.shape != grid.shape:
        raise ParameterError("mask", f"indicator shape {indicator.shape} != grid shape {grid.shape}")
    return Mask(grid, np.argwhere(indicator).astype(np.int64))


def full_mask(grid: Grid) -> Mask:
    return Mask(grid, grid.all_cells())


@dataclass(frozen=True, eq=False)
class Field:
    """Real values attached to the cells of a mask, in mask order."""

    mask: Mask
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.shape[0] != self.mask.count:
            raise ParameterError("values", f"expected {self.mask.count} values, got {values.shape[0]}")
        object.__setattr__(self, "values", values)

    @property
    def grid(self) -> Grid:
        return self.mask.grid

    def norm_sq(self) -> float:
        """Discrete squared L2 norm, sum of u^2 h^dim."""
        return float(np.dot(self.values, self.values) * self.grid.cell_volume)

    def normalized(self) -> "Field":
        norm = np.sqrt(self.norm_sq())
        if norm == 0.0:
            raise ParameterError("field", "cannot normalize the zero field")
        return Field(self.mask, self.values / norm)

    def to_array(self) -> np.ndarray:
        """Values on the grid box, zero outside the mask."""
        arr = np.zeros(self.grid.shape)
        if self.mask.count:
            arr[tuple(self.mask.cells.T)] = self.values
        return arr

    def restrict(self, mask: Mask) -> "Field":
        """Values on a sub-mask."""
        return Field(mask, self.values[self.mask.positions_of(mask)])


def indicator_field(domain: Mask, subset: Mask) -> Field:
    """Field on ``domain`` equal to 1 on ``subset`` and 0 elsewhere."""
    values = np.zeros(domain.count)
    values[domain.positions_of(subset)] = 1.0
    return Field(domain, values)


def embed_mask(mask: Mask, grid: Grid) -> Mask:
    """Move a mask onto an aligned grid that contains all of its cells."""
    shifted = mask.cells + lattice_shift(mask.grid, grid)
    return make_mask(grid, shifted)


def embed_field(field_: Field, grid: Grid) -> Field:
    """Move a field onto an aligned grid; cell order is preserved under translation."""
    return Field(embed_mask(field_.mask, grid), field_.values)


def _ball(grid: Grid, spec: Mapping[str, Any]) -> np.ndarray:
    radius = float(spec["radius"])
    if not radius > 0:
        raise ParameterError("radius", f"must be positive, got {radius}")
    center = np.broadcast_to(np.asarray(spec.get("center", 0.0), dtype=float), (grid.dim,))
    pts = grid.centers(grid.all_cells())
    inside = np.sum((pts - center) ** 2, axis=1) <= radius**2
    return inside.reshape(grid.shape)


def _rect(grid: Grid, spec: Mapping[str, Any]) -> np.ndarray:
    lower = np.broadcast_to(np.asarray(spec["lower"], dtype=float), (grid.dim,))
    upper = np.broadcast_to(np.asarray(spec["upper"], dtype=float), (grid.dim,))
    if np.any(upper < lower):
        raise ParameterError("upper", "rectangle upper corner below lower corner")
    pts = grid.centers(grid.all_cells())
    inside = np.all((pts >= lower) & (pts <= upper), axis=1)
    return inside.reshape(grid.shape)


def _blob(grid: Grid, spec: Mapping[str, Any]) -> np.ndarray:
    """Seeded smooth random set: thresholded smoothed noise, largest component kept."""
    seed = int(spec.get("seed", 0))
    fill = float(spec.get("fill", 0.35))
    smoothing = float(spec.get("smoothing", 0.12 * min(grid.shape)))
    margin = int(spec.get("margin", 2))
    if not 0.0 < fill < 1.0:
        raise ParameterError("fill", f"must lie in (0, 1), got {fill}")
    rng = np.random.default_rng(seed)
    noise = ndimage.gaussian_filter(rng.standard_normal(grid.shape), sigma=smoothing, mode="wrap")
    interior = np.zeros(grid.shape, dtype=bool)
    interior[tuple(slice(margin, n - margin) for n in grid.shape)] = True
    if not interior.any():
        raise ParameterError("margin", "margin leaves no interior cells")
    threshold = np.quantile(noise[interior], 1.0 - fill)
    selected = (noise >= threshold) & interior
    labels, n_labels = ndimage.label(selected)
    if n_labels == 0:
        return selected
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def _explicit_cells(grid: Grid, spec: Mapping[str, Any]) -> np.ndarray:
    return make_mask(grid, spec["cells"]).to_array()


def _shape_array(grid: Grid, spec: Any) -> np.ndarray:
    if not isinstance(spec, Mapping):
        raise ParameterError("domain", f"shape must be a mapping with a 'type' key, got {type(spec).__name__}")
    kind = spec.get("type")
    try:
        if kind == "ball":
            return _ball(grid, spec)
        if kind == "rect":
            return _rect(grid, spec)
        if kind == "blob":
            return _blob(grid, spec)
        if kind == "cells":
            return _explicit_cells(grid, spec)
        if kind == "union":
            parts = [_shape_array(grid, part) for part in spec["parts"]]
            return np.logical_or.reduce(parts) if parts else np.zeros(grid.shape, dtype=bool)
        if kind == "difference":
            return _shape_array(grid, spec["base"]) & ~_shape_array(grid, spec["remove"])
    except ParameterError:
        raise
    except KeyError as exc:
        raise ParameterError(str(kind), f"missing key {exc.args[0]!r}") from exc
    except (TypeError, ValueError, IndexError) as exc:
        raise ParameterError(str(kind), f"malformed shape: {exc}") from exc
    raise ParameterError("type", f"unknown shape {kind!r}; expected one of {', '.join(SHAPE_KINDS)}")


def mask_from_shape(grid: Grid, spec: Mapping[str, Any]) -> Mask:
    """
    Rasterize a shape description onto a grid.

    A cell belongs to the shape when its centre does (closed inequalities).

    Raises:
        ParameterError: On malformed descriptions.
        EmptyMaskError: If no cell is selected.
    """
    mask = mask_from_array(grid, _shape_array(grid, spec))
    if mask.count == 0:
        raise EmptyMaskError("domain", f"shape {spec.get('type')!r} selects no cell")
    logger.debug("Rasterized %s shape into %d cells", spec.get("type"), mask.count)
    return mask


def grid_from_spec(spec: Mapping[str, Any]) -> Grid:
    """Grid described by the ``dim``/``origin``/``h``/``shape`` keys of a domain file."""
    try:
        return make_grid(int(spec["dim"]), spec["origin"], float(spec["h"]), spec["shape"])
    except ParameterError:
        raise
    except KeyError as exc:
        raise ParameterError("grid", f"missing key {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ParameterError("grid", f"malformed grid: {exc}") from exc


def intersect_translate(first: Mask, second: Mask, shift: Sequence[int]) -> Mask:
    """
    Cells of ``first`` that are also cells of ``second`` translated by ``shift`` cells.

    The result lives on ``first``'s grid; ``shift`` is expressed in lattice units.
    """
    shift_arr = np.asarray(shift, dtype=np.int64).reshape(first.grid.dim)
    moved = second.cells + lattice_shift(second.grid, first.grid) + shift_arr
    inside = np.all((moved >= 0) & (moved < np.asarray(first.grid.shape)), axis=1)
    moved = moved[inside]
    if moved.shape[0] == 0:
        return Mask(first.grid, np.zeros((0, first.grid.dim), dtype=np.int64))
    keys = np.ravel_multi_index(tuple(moved.T), first.grid.shape)
    common = np.intersect1d(first.linear_indices, keys, assume_unique=True)
    return Mask(first.grid, np.stack(np.unravel_index(common, first.grid.shape), axis=1).astype(np.int64))


def overlap_volume_map(first: Mask, second: Mask) -> dict[tuple[int, ...], float]:
    """
    Overlap measure of ``first`` with every translate of ``second``.

    Returns:
        Mapping from lattice shift to ``|first ∩ (second + shift)|``, restricted
        to shifts with positive overlap and sorted by shift.
    """
    offset = lattice_shift(second.grid, first.grid)
    a = first.to_array().astype(float)
    b = second.to_array().astype(float)
    if a.sum() == 0 or b.sum() == 0:
        return {}
    flipped = b[tuple(slice(None, None, -1) for _ in range(b.ndim))]
    counts = np.rint(fftconvolve(a, flipped, mode="full")).astype(np.int64)
    volume = first.grid.cell_volume
    result: dict[tuple[int, ...], float] = {}
    base = np.asarray(second.grid.shape) - 1 + offset
    for index in np.argwhere(counts > 0):
        shift = tuple(int(v) for v in index - base)
        result[shift] = float(counts[tuple(index)]) * volume
    return dict(sorted(result.items()))


def domain_from_spec(spec: Mapping[str, Any], h: float | None = None) -> Mask:
    """
    Rasterize a domain description: grid keys plus a ``domain`` shape.

    Args:
        spec: Mapping with ``dim``, ``origin``, ``h``, ``shape`` and ``domain``.
        h: Optional spacing replacing the one in ``spec``.

    Raises:
        ParameterError: If the description or its ``domain`` shape is malformed.
    """
    if not isinstance(spec, Mapping):
        raise ParameterError("domain", "description must be a mapping")
    if "domain" not in spec:
        raise ParameterError("domain", "description has no 'domain' shape")
    if not isinstance(spec["domain"], Mapping) or "type" not in spec["domain"]:
        raise ParameterError("domain", "'domain' must be a mapping with a 'type' key")
    grid = grid_from_spec(spec)
    if h is not None:
        grid = grid.with_spacing(h)
    return mask_from_shape(grid, spec["domain"])
