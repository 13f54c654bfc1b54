"""Test grids, masks, fields and shape rasterization."""

import numpy as np
import pytest
from scipy import ndimage

from fracmem.errors import EmptyMaskError, ParameterError
from fracmem.grid import (
    Field,
    centered_grid,
    domain_from_spec,
    embed_mask,
    full_mask,
    indicator_field,
    intersect_translate,
    lattice_shift,
    make_grid,
    make_mask,
    mask_from_shape,
    overlap_volume_map,
)


@pytest.fixture
def line():
    """Eight cells of width 1/4 covering [-1, 1]."""
    return make_grid(1, -1.0, 0.25, 8)


@pytest.fixture
def square():
    """A 10 x 10 grid of width 1/5 covering [-1, 1]^2."""
    return make_grid(2, [-1.0, -1.0], 0.2, [10, 10])


def test_make_grid_broadcasts_scalars(square):
    """Test scalar origin and shape are broadcast over the axes."""
    grid = make_grid(2, 0.0, 0.5, 4)
    assert grid.origin == (0.0, 0.0)
    assert grid.shape == (4, 4)
    assert grid.cell_volume == 0.25
    assert square.n_cells == 100


def test_grid_rejects_bad_parameters():
    """Test invalid grids raise parameter errors."""
    with pytest.raises(ParameterError):
        make_grid(3, 0.0, 1.0, 4)
    with pytest.raises(ParameterError):
        make_grid(1, 0.0, -1.0, 4)
    with pytest.raises(ParameterError):
        make_grid(1, 0.0, 1.0, 0)


def test_centers_and_centering(line):
    """Test cell centres and the centred-box predicate."""
    centers = line.centers(np.array([[0], [7]]))
    np.testing.assert_allclose(centers.ravel(), [-0.875, 0.875])
    assert line.is_centered()
    assert not make_grid(1, 0.0, 0.25, 8).is_centered()


def test_ball_is_closed(line):
    """Test cells whose centre lies on the sphere are included."""
    mask = mask_from_shape(line, {"type": "ball", "center": 0.0, "radius": 0.375})
    assert mask.cells.ravel().tolist() == [2, 3, 4, 5]
    smaller = mask_from_shape(line, {"type": "ball", "center": 0.0, "radius": 0.374})
    assert smaller.cells.ravel().tolist() == [3, 4]


def test_rect_union_and_difference(square):
    """Test composite shapes combine cell sets."""
    left = {"type": "rect", "lower": [-1, -1], "upper": [0, 1]}
    right = {"type": "rect", "lower": [0, -1], "upper": [1, 1]}
    union = mask_from_shape(square, {"type": "union", "parts": [left, right]})
    assert union.count == 100
    diff = mask_from_shape(square, {"type": "difference", "base": left, "remove": {"type": "rect", "lower": [-1, -1], "upper": [1, 0]}})
    assert diff.count == 25


def test_shape_errors(square):
    """Test empty shapes and malformed specs are rejected."""
    with pytest.raises(EmptyMaskError):
        mask_from_shape(square, {"type": "ball", "center": [5, 5], "radius": 0.1})
    with pytest.raises(ParameterError):
        mask_from_shape(square, {"type": "ball", "radius": -1.0})
    with pytest.raises(ParameterError):
        mask_from_shape(square, {"type": "triangle"})
    with pytest.raises(ParameterError):
        mask_from_shape(square, {"type": "rect", "lower": [0, 0]})


def test_blob_is_seeded_and_connected():
    """Test blobs are reproducible, connected and keep away from the box edge."""
    grid = make_grid(2, [-1.0, -1.0], 1 / 16, [32, 32])
    spec = {"type": "blob", "seed": 3, "fill": 0.3, "margin": 2}
    first = mask_from_shape(grid, spec)
    second = mask_from_shape(grid, spec)
    assert first == second
    _, n_components = ndimage.label(first.to_array())
    assert n_components == 1
    assert first.cells.min() >= 2
    assert first.cells.max() <= 29
    other = mask_from_shape(grid, {**spec, "seed": 4})
    assert other != first


def test_mask_positions_and_subsets(line):
    """Test positions of a sub-mask and rejection of non-subsets."""
    domain = make_mask(line, [[5], [1], [3], [3]])
    assert domain.cells.ravel().tolist() == [1, 3, 5]
    sub = make_mask(line, [[5], [1]])
    assert domain.positions_of(sub).tolist() == [0, 2]
    assert domain.contains(sub)
    with pytest.raises(ParameterError):
        domain.positions_of(make_mask(line, [[2]]))
    with pytest.raises(ParameterError):
        make_mask(line, [[8]])


def test_field_norm_and_array(line):
    """Test the discrete L2 norm and box embedding of a field."""
    mask = make_mask(line, [[0], [2]])
    field = Field(mask, [1.0, 2.0])
    assert field.norm_sq() == pytest.approx(1.25)
    assert field.to_array().tolist() == [1.0, 0, 2.0, 0, 0, 0, 0, 0]
    assert field.normalized().norm_sq() == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        Field(mask, [1.0])
    indicator = indicator_field(mask, make_mask(line, [[2]]))
    assert indicator.values.tolist() == [0.0, 1.0]


def test_intersect_translate(line):
    """Test intersection with a translated mask."""
    first = make_mask(line, [[i] for i in range(5)])
    second = make_mask(line, [[0], [1], [2]])
    assert intersect_translate(first, second, [3]).cells.ravel().tolist() == [3, 4]
    assert intersect_translate(first, second, [7]).count == 0


def test_overlap_volume_map_small_case():
    """Test overlap volumes of two short segments."""
    grid = make_grid(1, 0.0, 0.5, 6)
    first = make_mask(grid, [[0], [1], [2]])
    second = make_mask(grid, [[0], [1]])
    assert overlap_volume_map(first, second) == {(-1,): 0.5, (0,): 1.0, (1,): 1.0, (2,): 0.5}


def test_overlap_map_matches_intersections_on_aligned_grids(square):
    """Test the FFT overlap map against explicit intersections across grids."""
    first = mask_from_shape(square, {"type": "ball", "center": [0.1, -0.2], "radius": 0.6})
    other_grid = make_grid(2, [-0.6, -1.4], 0.2, [6, 8])
    second = mask_from_shape(other_grid, {"type": "rect", "lower": [-0.6, -1.4], "upper": [0.2, -0.4]})
    overlaps = overlap_volume_map(first, second)
    assert overlaps
    for shift, volume in overlaps.items():
        assert intersect_translate(first, second, shift).measure == pytest.approx(volume)
    assert intersect_translate(first, second, (40, 40)).count == 0


def test_lattice_shift_and_embedding():
    """Test alignment checks and moving masks between grids."""
    small = make_grid(1, 0.0, 0.25, 4)
    big = centered_grid(1, 0.25, 8)
    assert lattice_shift(small, big).tolist() == [4]
    moved = embed_mask(full_mask(small), big)
    assert moved.cells.ravel().tolist() == [4, 5, 6, 7]
    with pytest.raises(ParameterError):
        lattice_shift(make_grid(1, 0.1, 0.25, 4), big)
    with pytest.raises(ParameterError):
        lattice_shift(make_grid(1, 0.0, 0.5, 4), big)


def test_with_spacing_and_domain_spec():
    """Test respacing a grid and rasterizing a domain file."""
    spec = {"dim": 1, "origin": -1.0, "h": 0.25, "shape": 8, "domain": {"type": "rect", "lower": -0.5, "upper": 0.5}}
    assert domain_from_spec(spec).count == 4
    assert domain_from_spec(spec, 0.125).count == 8
    with pytest.raises(ParameterError):
        make_grid(1, -1.0, 0.25, 8).with_spacing(0.3)


@pytest.mark.parametrize(
    "spec",
    [
        {"domain": [1, 2]},
        {"dim": 1, "origin": -1.0, "h": 0.25, "shape": 8, "domain": [1, 2]},
        {"dim": 1, "origin": -1.0, "h": 0.25, "shape": 8, "domain": {"lower": 0.0}},
        {"dim": 1, "origin": -1.0, "h": 0.25, "shape": 8},
    ],
)
def test_domain_spec_rejects_malformed_shapes(spec):
    """Test malformed domain shapes raise a ParameterError naming the domain."""
    with pytest.raises(ParameterError) as excinfo:
        domain_from_spec(spec)
    assert excinfo.value.field == "domain"


def test_nested_shape_must_be_a_mapping(square):
    """Test non-mapping parts of a union are rejected instead of crashing."""
    with pytest.raises(ParameterError) as excinfo:
        mask_from_shape(square, {"type": "union", "parts": [[0, 1]]})
    assert excinfo.value.field == "domain"
    with pytest.raises(ParameterError):
        mask_from_shape(square, {"type": "ball", "center": "middle", "radius": 0.5})
