import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierltl.intervals import Box, GridPartition, contains, intersects, split


def test_contains_interior_and_boundary():
    assert contains(Box([0, 0], [1, 1]), [0.5, 0.5])
    assert contains(Box([0], [1]), [1.0])
    assert not contains(Box([0], [1]), [1.0 + 1e-9])


def test_contains_dimension_mismatch():
    with pytest.raises(ValueError):
        contains(Box([0, 0], [1, 1]), [0.5])


def test_intersects_examples():
    assert intersects(Box([0], [1]), Box([1], [2]))
    assert not intersects(Box([0], [1]), Box([1.1], [2]))
    assert intersects(Box([0, 0], [2, 2]), Box([1, 1], [3, 3]))
    with pytest.raises(ValueError):
        intersects(Box([0], [1]), Box([0, 0], [1, 1]))


def test_box_rejects_inverted_and_empty():
    with pytest.raises(ValueError):
        Box([1.0], [0.0])
    with pytest.raises(ValueError):
        Box([], [])
    assert Box.point([3.0]).width[0] == 0.0


def test_split_1d():
    assert split(Box([0], [2]), [2]) == [Box([0], [1]), Box([1], [2])]


def test_split_cube_into_eight():
    parts = split(Box([0, 0, 0], [1, 1, 1]), [2, 2, 2])
    assert len(parts) == 8
    assert all(np.allclose(p.width, 0.5) for p in parts)
    # lexicographic order: last dimension varies fastest
    assert parts[1] == Box([0, 0, 0.5], [0.5, 0.5, 1])


def test_split_heading_only():
    cell = Box([0, 0, -np.pi], [1.65, 1.667, np.pi])
    parts = split(cell, [1, 1, 4])
    assert len(parts) == 4
    for p in parts:
        assert np.array_equal(p.lo[:2], cell.lo[:2]) and np.array_equal(p.hi[:2], cell.hi[:2])
    assert parts[0].lo[2] == -np.pi and parts[-1].hi[2] == np.pi
    assert [p.hi[2] for p in parts[:-1]] == [p.lo[2] for p in parts[1:]]


def test_split_zero_parts():
    with pytest.raises(ValueError):
        split(Box([0], [1]), [0])


boxes_2d = st.tuples(
    st.floats(-10, 10), st.floats(0, 5), st.floats(-10, 10), st.floats(0, 5)
).map(lambda t: Box([t[0], t[2]], [t[0] + t[1], t[2] + t[3]]))


@settings(max_examples=200, deadline=None)
@given(boxes_2d, st.integers(1, 4), st.integers(1, 4), st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=20))
def test_split_tiles_parent(b, px, py, samples):
    parts = split(b, [px, py])
    assert len(parts) == px * py
    for fx, fy in samples:
        z = b.lo + np.array([fx, fy]) * b.width
        holders = [p for p in parts if p.contains(z)]
        assert holders, "sample not covered"
        interior = [p for p in parts if np.all(p.lo < z) and np.all(z < p.hi)]
        assert len(interior) <= 1
        if len(holders) > 1:
            # only possible on a shared face
            assert not interior


@settings(max_examples=200, deadline=None)
@given(boxes_2d, boxes_2d)
def test_intersects_symmetric_reflexive(a, b):
    assert intersects(a, b) == intersects(b, a)
    assert intersects(a, a)


def test_grid_cells_and_locate():
    g = GridPartition(Box([0, 0], [33, 20]), (20, 12))
    assert len(g) == 240
    first = g.cell_box((0, 0))
    assert first.lo.tolist() == [0, 0] and np.allclose(first.hi, [33 / 20, 20 / 12], rtol=0, atol=1e-12)
    assert g.cell_box((19, 11)).hi.tolist() == [33.0, 20.0]
    assert g.locate([0, 0]) == (0, 0)
    assert g.locate([33, 20]) == (19, 11)
    assert g.locate([g.edges[0][1], 0.1]) == (1, 0)  # lower-closed
    assert g.locate([33.1, 1]) is None
    with pytest.raises(IndexError):
        g.cell_box((20, 0))


def test_grid_cells_tile_workspace():
    g = GridPartition(Box([0, 0], [3, 2]), (3, 2))
    rng = np.random.default_rng(0)
    for z in rng.uniform([0, 0], [3, 2], size=(200, 2)):
        c = g.locate(z)
        assert g.cell_box(c).contains(z)
        owners = [k for k in g.cells() if g.cell_box(k).contains(z)]
        assert c in owners


def test_grid_cells_meeting_closed():
    g = GridPartition(Box([0, 0], [4, 4]), (4, 4))
    assert g.cells_meeting(Box([0.2, 0.2], [0.8, 0.8])) == [(0, 0)]
    # touching a face counts
    assert set(g.cells_meeting(Box([0.2, 0.2], [1.0, 0.8]))) == {(0, 0), (1, 0)}
    assert g.cells_meeting(Box([3.5, 3.5], [4.5, 4.0])) is None
