"""Exact box geometry: overlaps, dilation, chains."""

from fractions import Fraction as F
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thincarpet.errors import DimensionMismatch, InvalidFactor, InvalidParameter, NotCongruent
from thincarpet.geometry import (
    Box,
    BoxChain,
    ProductPartition,
    chain_length_bound,
    congruent,
    connect_congruent_boxes,
    diameter_squared,
    dilate,
    frac,
    gap_squared,
    interiors_meet,
    intersects,
    overlap_fraction,
)


def B(*iv):
    return Box.from_intervals(*[(F(a), F(b)) for a, b in iv])


def raster_overlap(box, cell, res=64):
    """Midpoint raster count of cell points inside box; exact when all
    coordinates are multiples of 1/(2 res) of the cell sides."""
    hits = total = 0
    axes = []
    for k in range(cell.dim):
        lo, hi = cell.interval(k)
        axes.append([lo + (hi - lo) * F(2 * i + 1, 2 * res) for i in range(res)])
    for pt in product(*axes):
        total += 1
        if all(box.lo[k] <= pt[k] <= box.hi[k] for k in range(box.dim)):
            hits += 1
    return F(hits, total)


# -- overlap_fraction --------------------------------------------------------

def test_overlap_identity():
    assert overlap_fraction(Box.unit(2), Box.unit(2)) == 1


def test_overlap_half():
    assert overlap_fraction(B((0, F(1, 2)), (0, 1)), Box.unit(2)) == F(1, 2)


def test_overlap_centered_quarter():
    box = B((F(1, 4), F(3, 4)), (F(1, 4), F(3, 4)))
    cell = B((0, F(1, 2)), (0, F(1, 2)))
    assert overlap_fraction(box, cell) == F(1, 4)
    assert raster_overlap(box, cell) == F(1, 4)


def test_overlap_disjoint_and_degenerate():
    assert overlap_fraction(B((2, 3),), B((0, 1),)) == 0
    assert overlap_fraction(B((0, 1),), B((5, 5),)) == 0


def test_overlap_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        overlap_fraction(Box.unit(2), Box.unit(3))


# Frozen raster oracle values for a handful of awkward overlaps.
RASTER_CASES = [
    (((F(1, 8), F(7, 8)), (0, F(3, 8))), ((0, F(1, 2)), (0, F(1, 2))), F(9, 16)),
    (((F(3, 8), 2), (F(-1), F(1, 8))), ((0, F(1, 2)), (0, F(1, 2))), F(1, 16)),
    (((0, F(1, 4)), (0, F(1, 4)), (0, F(1, 4))), ((0, F(1, 2)),) * 3, F(1, 8)),
]


@pytest.mark.parametrize("box,cell,want", RASTER_CASES)
def test_overlap_matches_raster_oracle(box, cell, want):
    b, c = B(*box), B(*cell)
    assert overlap_fraction(b, c) == want
    assert raster_overlap(b, c, res=16) == want


# -- dilate -----------------------------------------------------------------

def test_dilate_examples():
    assert dilate(Box.unit(2), 1) == Box.unit(2)
    assert dilate(Box.unit(2), 2) == B((F(-1, 2), F(3, 2)), (F(-1, 2), F(3, 2)))
    assert dilate(B((0, F(1, 4)), (0, F(1, 8))), 4) == B((F(-3, 8), F(5, 8)), (F(-3, 16), F(5, 16)))


@pytest.mark.parametrize("factor", [0, -1, F(-1, 2)])
def test_dilate_rejects_nonpositive(factor):
    with pytest.raises(InvalidFactor):
        dilate(Box.unit(1), factor)


# -- chains -----------------------------------------------------------------

def test_chain_three_unit_squares():
    region = B((0, 3), (0, 1))
    ch = connect_congruent_boxes(region, B((0, 1), (0, 1)), B((2, 3), (0, 1)))
    assert list(ch) == [B((0, 1), (0, 1)), B((1, 2), (0, 1)), B((2, 3), (0, 1))]


def test_chain_identity():
    a = B((0, 1), (0, 1))
    assert len(connect_congruent_boxes(a, a, a)) == 1


def test_chain_diagonal_halves():
    a = B((0, F(1, 2)), (0, F(1, 2)))
    b = B((F(1, 2), 1), (F(1, 2), 1))
    ch = connect_congruent_boxes(Box.unit(2), a, b)
    assert len(ch) <= chain_length_bound(Box.unit(2), a) == 64
    assert ch.boxes[0] == a and ch.boxes[-1] == b


def test_chain_not_congruent():
    with pytest.raises(NotCongruent):
        connect_congruent_boxes(Box.unit(2), B((0, 1), (0, 1)), B((0, 1), (0, F(1, 2))))


def test_chain_invariants_enforced():
    with pytest.raises(InvalidParameter):
        BoxChain((B((0, 1),), B((3, 4),)))
    with pytest.raises(InvalidParameter):
        BoxChain(())


def test_congruence_allows_quarter_turn():
    assert congruent(B((0, 1), (0, 2)), B((5, 7), (0, 1)))
    assert not congruent(B((0, 1), (0, 2)), B((0, 1), (0, 3)))


def test_distances():
    a, b = B((0, 1), (0, 1)), B((2, 3), (0, 1))
    assert gap_squared(a, b) == 1
    assert diameter_squared(a) == 2
    assert gap_squared(a, a) == 0


def test_partition_validation():
    with pytest.raises(InvalidParameter):
        ProductPartition(((0, F(1, 2)),))
    with pytest.raises(InvalidParameter):
        ProductPartition(((0, F(1, 2), F(1, 2), 1),))
    p = ProductPartition.uniform((2, 3))
    assert p.shape == (2, 3)
    assert sum(c.volume for _, c in p.cells()) == 1


def test_frac_rejects_float():
    with pytest.raises(TypeError):
        frac(0.5)
    assert frac("3/8") == F(3, 8)


# -- properties -------------------------------------------------------------

coord = st.fractions(min_value=-2, max_value=2, max_denominator=16)


@st.composite
def boxes(draw, d=None):
    d = d or draw(st.integers(1, 3))
    lo, hi = [], []
    for _ in range(d):
        a, b = sorted((draw(coord), draw(coord)))
        lo.append(a)
        hi.append(b)
    return Box(tuple(lo), tuple(hi))


@st.composite
def box_pairs(draw):
    d = draw(st.integers(1, 3))
    return draw(boxes(d)), draw(boxes(d))


@given(box_pairs())
def test_overlap_volume_symmetry(pair):
    a, b = pair
    if a.volume > 0 and b.volume > 0:
        assert b.volume * overlap_fraction(a, b) == a.volume * overlap_fraction(b, a)


@given(box_pairs())
def test_overlap_range_and_containment(pair):
    box, cell = pair
    v = overlap_fraction(box, cell)
    assert 0 <= v <= 1
    if cell.volume > 0:
        assert (v == 1) == box.contains(cell)


@given(boxes(), st.fractions(min_value=F(1, 8), max_value=8, max_denominator=8))
def test_dilate_roundtrip(box, s):
    assert dilate(dilate(box, s), 1 / s) == box


@given(box_pairs())
def test_interiors_meet_implies_intersects(pair):
    a, b = pair
    if interiors_meet(a, b):
        assert intersects(a, b)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2), st.integers(1, 4), st.data())
def test_chain_property(d, k, data):
    side = F(1, k)
    region = Box.unit(d)
    pos = st.integers(0, k - 1)
    alo = tuple(data.draw(pos) * side for _ in range(d))
    a = Box(alo, tuple(x + side for x in alo))
    blo = tuple(data.draw(pos) * side for _ in range(d))
    b = Box(blo, tuple(x + side for x in blo))
    ch = connect_congruent_boxes(region, a, b)
    assert ch.boxes[0] == a and ch.boxes[-1] == b
    assert len(ch) <= chain_length_bound(region, a)
    arena = dilate(region, 4)
    assert all(arena.contains(x) for x in ch)
