"""Carpets, sponges, level sets, holes, covers and epoch schedules."""

import random
from fractions import Fraction as F
from itertools import product
from math import lcm

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from _support import BARANSKI, BM, CANTOR, SPONGE, brute_disjoint, random_baranski, random_word
from thincarpet.errors import EnumerationBudget, InvalidParameter, InvalidSpec, InvalidWord
from thincarpet.geometry import Box, interiors_meet
from thincarpet.systems import (
    CarpetSpec,
    SpongeSpec,
    apply_word,
    bedford_mcmullen,
    find_hole,
    harvest_schedule,
    hole_harvest,
    level_count,
    level_set,
    level_shapes,
    moran_cover,
    osch_check,
    spec_from_dict,
    sponge_depth,
    word_box,
)


def B(*iv):
    return Box.from_intervals(*[(F(a), F(b)) for a, b in iv])


# -- specs ------------------------------------------------------------------

@pytest.mark.parametrize("args", [
    ((F(1, 2), F(1, 3)), (F(1, 2), F(1, 2)), [(1, 1)]),          # widths do not sum to 1
    ((F(1),), (F(1, 2), F(1, 2)), [(1, 1)]),                     # p < 2
    ((F(1, 2),) * 2, (F(1, 2),) * 2, [(1, 1), (1, 2), (2, 1), (2, 2)]),  # nothing excluded
    ((F(1, 2),) * 2, (F(1, 2),) * 2, []),                        # empty digit set
    ((F(1, 2),) * 2, (F(1, 2),) * 2, [(3, 1)]),                  # digit off the grid
])
def test_invalid_carpets(args):
    with pytest.raises(InvalidSpec):
        CarpetSpec(*args)


def test_invalid_sponge_order():
    with pytest.raises(InvalidSpec):
        SpongeSpec(3, 2, 4, [(1, 1, 1)])


@pytest.mark.parametrize("spec", [BM, BARANSKI, CANTOR, SPONGE])
def test_spec_dict_roundtrip(spec):
    assert spec_from_dict(spec.to_dict()) == spec


def test_spec_dict_unknown_field():
    with pytest.raises(InvalidSpec):
        spec_from_dict({**BM.to_dict(), "colour": "red"})


# -- level sets and words ---------------------------------------------------

def test_bm_level_two():
    ls = level_set(BM, 2)
    assert len(ls) == 9
    assert all(b.sides == (F(1, 4), F(1, 16)) for b in ls.boxes)
    assert brute_disjoint(ls.boxes)


@pytest.mark.parametrize("spec", [BM, CANTOR, SPONGE])
def test_level_zero(spec):
    ls = level_set(spec, 0)
    assert ls.boxes == (Box.unit(spec.dim),)


def test_baranski_level_one_placement():
    spec = CarpetSpec((F(1, 3), F(2, 3)), (F(1, 2), F(1, 2)), [(1, 1), (2, 2)])
    assert set(level_set(spec, 1).boxes) == {B((0, F(1, 3)), (0, F(1, 2))),
                                             B((F(1, 3), 1), (F(1, 2), 1))}


def test_level_budget():
    with pytest.raises(EnumerationBudget) as info:
        level_set(BM, 10, budget=1000)
    assert info.value.count == 3 ** 10
    with pytest.raises(InvalidParameter):
        level_set(BM, -1)


def test_partition_matches_grid():
    ls = level_set(BM, 2)
    assert ls.partition.shape == (4, 16)
    for idx, box in zip(ls.grid_indices(), ls.boxes):
        assert ls.partition.cell(idx) == box


def test_apply_word_examples():
    f = apply_word(BM, ())
    assert f.scale == (1, 1) and f.shift == (0, 0)
    f = apply_word(BM, [(1, 1)])
    assert f.scale == (F(1, 2), F(1, 4)) and f.shift == (0, 0)
    f = apply_word(BM, [(2, 3), (1, 1)])
    assert f.scale == (F(1, 4), F(1, 16)) and f.shift == (F(1, 2), F(1, 2))
    assert word_box(BM, [(2, 3), (1, 1)]) in level_set(BM, 2).boxes


def test_apply_word_rejects_excluded_digit():
    with pytest.raises(InvalidWord):
        apply_word(BM, [(2, 2)])


def test_level_shapes_counts():
    shapes = level_shapes(BARANSKI, 3)
    assert sum(shapes.values()) == 5 ** 3
    assert shapes == {(F(1, 8), F(1, 27)): 125}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_level_nesting(seed):
    rng = random.Random(seed)
    spec = random_baranski(rng, max_side=3)
    n = rng.randint(0, 2)
    coarse = level_set(spec, n)
    fine = level_set(spec, n + 1)
    groups = [0] * len(coarse)
    for b in fine.boxes:
        owners = [i for i, c in enumerate(coarse.boxes) if c.contains(b)]
        assert len(owners) == 1
        groups[owners[0]] += 1
    assert groups == [len(spec.digits)] * len(coarse)
    for w, b in zip(fine.words, fine.boxes):
        assert apply_word(spec, w)(Box.unit(2)) == b


# -- holes ------------------------------------------------------------------

def test_hole_diagonal_keep():
    h = find_hole(bedford_mcmullen(2, 2, [(1, 1), (2, 2)]))
    assert h.cube == B((F(1, 2), 1), (0, F(1, 2)))
    assert h.strip == B((F(1, 2), 1), (0, 1))


def test_hole_single_excluded_cell():
    h = find_hole(bedford_mcmullen(2, 2, [(1, 1), (1, 2), (2, 1)]))
    assert h.cube == B((F(1, 2), 1), (F(1, 2), 1))


def test_hole_in_wide_cell():
    spec = CarpetSpec((F(1, 4), F(3, 4)), (F(1, 2), F(1, 2)), [(1, 1), (1, 2), (2, 2)])
    h = find_hole(spec)
    assert h.cube == B((F(1, 4), F(3, 4)), (0, F(1, 2)))


def test_hole_sponge_prism():
    h = find_hole(SPONGE)
    assert h.strip.lo[2] == 0 and h.strip.hi[2] == 1
    assert h.strip.lo[:2] == h.cube.lo[:2] and h.strip.hi[:2] == h.cube.hi[:2]


def test_osch_examples():
    ok, w = osch_check(bedford_mcmullen(2, 2, [(1, 1), (1, 2), (2, 1)]))
    assert ok and w == B((F(1, 2), 1), (F(1, 2), 1))
    spec = CarpetSpec((F(1, 4), F(3, 4)), (F(1, 2), F(1, 2)), [(1, 2), (2, 2)])
    ok, w = osch_check(spec)
    assert ok and w == find_hole(spec).cube and w.sides[0] == F(1, 2)


def hole_oracle(spec):
    """Exhaustive lattice scan: every corner and side on the 1/L lattice."""
    L = lcm(*(r.denominator for ax in spec.ratios for r in ax))
    kept = [spec.cell(dg) for dg in spec.digits]
    best = None
    for corner in product(range(L), repeat=spec.dim):
        s = 0
        while max(corner) + s + 1 <= L:
            cube = Box(tuple(F(c, L) for c in corner), tuple(F(c + s + 1, L) for c in corner))
            if any(interiors_meet(cube, k) for k in kept):
                break
            s += 1
        if s and (best is None or (-s, corner[::-1]) < best[0]):
            best = ((-s, corner[::-1]), corner, s)
    _, corner, s = best
    return Box(tuple(F(c, L) for c in corner), tuple(F(c + s, L) for c in corner))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_hole_matches_lattice_oracle(seed):
    rng = random.Random(seed)
    spec = random_baranski(rng, max_side=3, max_den=6)
    h = find_hole(spec)
    assert h.cube == hole_oracle(spec)
    assert all(not interiors_meet(h.cube, b) for b in level_set(spec, 1).boxes)


# -- width-matched covers ---------------------------------------------------

def test_cover_single_interval():
    spec = CarpetSpec((F(1, 2),) * 2, (F(1, 3),) * 3, [(1, 1), (2, 2)])
    c = moran_cover(spec, [(1, 1)])
    assert c.count == 1
    assert c.intervals == ((0, F(1, 2)),)


def test_cover_bm_two_intervals():
    c = moran_cover(BM, [(1, 1)])
    assert c.count == 2 and c.axis == 0
    assert c.intervals == ((0, F(1, 4)), (F(1, 4), F(1, 2)))
    c.check()


def test_cover_swapped_axes():
    spec = bedford_mcmullen(4, 2, [(1, 1), (3, 2), (4, 1)])
    c = moran_cover(spec, [(1, 1)])
    assert c.axis == 1 and c.count == 2
    assert c.intervals == ((0, F(1, 4)), (F(1, 4), F(1, 2)))
    c.check()


def test_cover_rejects_sponge():
    with pytest.raises(InvalidSpec):
        moran_cover(SPONGE, [])


def cover_oracle(lo, hi, ratios, b):
    """Split intervals breadth-first until each is narrow enough."""
    rmin = min(ratios)
    done, todo = [], [(lo, hi)]
    while todo:
        nxt = []
        for a, z in todo:
            if rmin * (z - a) < b:
                done.append((a, z))
            else:
                acc = a
                for r in ratios:
                    nxt.append((acc, acc + r * (z - a)))
                    acc += r * (z - a)
        todo = nxt
    return sorted(done)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_cover_matches_oracle(seed):
    rng = random.Random(seed)
    spec = random_baranski(rng)
    word = random_word(rng, spec, rng.randint(0, 3))
    c = moran_cover(spec, word)
    c.check()
    rect = word_box(spec, word)
    ax = c.axis
    assert rect.sides[ax] >= rect.sides[1 - ax]
    assert sorted(c.intervals) == cover_oracle(*rect.interval(ax), spec.ratios[ax], rect.sides[1 - ax])


# -- harvests ---------------------------------------------------------------

def test_harvest_baranski():
    spec = CarpetSpec((F(1, 2),) * 2, (F(1, 3),) * 3, [(1, 1), (1, 2), (1, 3), (2, 1), (2, 3)])
    hole = find_hole(spec)
    g = hole_harvest(spec, [(1, 1)], hole)
    assert len(g) == 1
    assert word_box(spec, [(1, 1)]).contains(g[0])


def test_harvest_bm_count():
    g = hole_harvest(BM, [(1, 1)], find_hole(BM))
    assert len(g) == 8
    assert brute_disjoint(g)


def test_harvest_level_zero_mirrors_first_level():
    spec = bedford_mcmullen(2, 2, [(1, 1), (1, 2), (2, 1)])
    hole = find_hole(spec)
    g = hole_harvest(spec, [], hole)
    assert g == [hole.cube]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_harvest_properties(seed):
    rng = random.Random(seed)
    spec = random_baranski(rng, max_side=3, max_den=6)
    n = rng.randint(0, 2)
    word = random_word(rng, spec, n)
    rect = word_box(spec, word)
    depth = n + max(len(w) for w in moran_cover(spec, word).words)
    assume(level_count(spec, depth + 1) <= 2000)
    g = hole_harvest(spec, word, find_hole(spec))
    assume(len(g) <= 300)
    assert all(rect.contains(h) for h in g)
    assert brute_disjoint(g)
    later = level_set(spec, depth + 1).boxes
    assert not any(interiors_meet(h, b) for h in g for b in later)


def test_sponge_harvest_count():
    hole = find_hole(SPONGE)
    g = hole_harvest(SPONGE, [(1, 1, 1)], hole)
    assert len(g) == (2 * 3 * 4) ** sponge_depth(SPONGE, 1)
    assert brute_disjoint(g)


# -- schedules --------------------------------------------------------------

def test_schedule_baranski():
    s = harvest_schedule(BARANSKI, 2, 1)
    assert s.levels == (1, 12) and s.ntildes[0] == 1
    assert s.disjoint and s.disjointness_mode == "descent+structural"


def test_schedule_bm():
    s = harvest_schedule(BM, 2, 1)
    assert s.levels == (1, 13) and s.ntildes[0] == 2
    assert s.disjoint


def test_schedule_single_epoch():
    s = harvest_schedule(BM, 1, 1)
    assert s.levels == (1,)
    assert len(s.epochs[0].boxes) == s.epochs[0].hole_count == 3 * 8


def test_schedule_pairwise_small_slack():
    s = harvest_schedule(BM, 3, 1, slack=0)
    assert s.levels == (1, 3, 11)
    assert s.disjoint


def test_schedule_rejects_bad_arguments():
    with pytest.raises(InvalidParameter):
        harvest_schedule(BM, 0, 1)
    with pytest.raises(InvalidSpec):
        harvest_schedule(CANTOR, 1, 1)


def test_schedule_budget_keeps_partial():
    with pytest.raises(EnumerationBudget) as info:
        harvest_schedule(CarpetSpec((F(1, 3), F(2, 3)), (F(1, 2),) * 2, [(1, 1), (2, 2)]), 3, 1, budget=2)
    assert info.value.count == 13
    assert [e.level for e in info.value.partial] == [1]


# -- sponge depth -----------------------------------------------------------

@pytest.mark.parametrize("pqu,n,want", [((2, 3, 4), 1, 1), ((2, 2, 2), 3, 0), ((2, 3, 4), 2, 2)])
def test_sponge_depth_examples(pqu, n, want):
    spec = SpongeSpec(*pqu, [(1, 1, 1)])
    assert sponge_depth(spec, n) == want


@given(st.integers(2, 6), st.integers(0, 4), st.integers(0, 4), st.integers(1, 30))
def test_sponge_depth_inequality(p, dq, du, n):
    q, u = p + dq, p + dq + du
    k = sponge_depth(SpongeSpec(p, q, u, [(1, 1, 1)]), n)
    assert F(1, u ** n) <= F(1, p ** (n + k)) < F(1, u ** (n - 1))
    assert not F(1, u ** n) <= F(1, p ** (n + k + 1))


def test_sponge_depth_rejects_level_zero():
    with pytest.raises(InvalidParameter):
        sponge_depth(SPONGE, 0)
