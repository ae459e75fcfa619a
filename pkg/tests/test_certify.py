"""Proof constants, exact level masses and decay certificates."""

import random
from fractions import Fraction as F
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import BARANSKI, BM, SPONGE
from thincarpet.certify import (
    PowerExpr,
    ball_count,
    doublings_for,
    lemma32_constant,
    level_masses,
    local_doubling,
    strip_check,
    strip_constant,
    thinness_certificate,
    verify_hole_inequality,
)
from thincarpet.errors import DegenerateMass, InvalidParameter
from thincarpet.geometry import Box
from thincarpet.measures import SplitParams, from_1d_weights, gen_split_measure_1d, lebesgue, mass, product_measure
from thincarpet.systems import (
    AffineMap,
    CarpetSpec,
    _subintervals,
    find_hole,
    iter_level,
    moran_cover_box,
    sponge_depth,
)


def split(depth, seed, tau=2):
    return gen_split_measure_1d(SplitParams(F(tau), depth, seed))


def split_product(d, depth, seed):
    return product_measure([split(depth, seed + 17 * k) for k in range(d)])


# -- constants --------------------------------------------------------------

def test_chain_constant_examples():
    assert lemma32_constant(F(1, 2), 2, 2) == F(1, 2 ** 70)
    v = lemma32_constant(1, 2, 2)
    assert v == F(1, 2 ** 20) and v <= 1
    assert lemma32_constant(F(1, 2), 1, 4) == F(1, 2 ** 19)


def test_chain_constant_symbolic_when_huge():
    v = lemma32_constant(F(1, 8), 3, 3)
    assert isinstance(v, PowerExpr) and v.exponent == 32 ** 3
    assert v <= F(1, 10 ** 100)
    assert lemma32_constant(F(1, 8), 3, 1) == F(1, 32) ** 3


@pytest.mark.parametrize("args", [(0, 2, 2), (F(3, 2), 2, 2), (F(1, 2), 4, 2), (F(1, 2), 2, F(1, 2))])
def test_chain_constant_domain(args):
    with pytest.raises(InvalidParameter):
        lemma32_constant(*args)


def test_strip_constant_examples():
    assert strip_constant(F(1, 2), 4) == 16
    assert strip_constant(1, 7) == 7
    assert strip_constant(F(1, 4), 2) == 8
    assert [doublings_for(a) for a in (1, F(1, 2), F(1, 3), F(1, 4))] == [1, 2, 3, 3]
    with pytest.raises(InvalidParameter):
        strip_constant(F(1, 2), F(1, 2))


def test_ball_count_examples():
    assert ball_count(1, 1)[0] == 1
    assert ball_count(1, F(1, 3))[0] == 3
    n, centers = ball_count(F(7, 10), F(1, 5))
    assert n == 3 and centers == [(F(1, 10), F(1, 10)), (F(3, 10), F(1, 10)), (F(1, 2), F(1, 10))]
    with pytest.raises(InvalidParameter):
        ball_count(F(1, 5), F(1, 2))


# -- exact level masses -----------------------------------------------------

def brute_level(spec, mu, n, hole):
    """E_n, G_n and strip masses by enumerating every box and every hole."""
    E = G = S = F(0)
    for _, rect in iter_level(spec, n):
        E += mass(mu, rect)
        for cell, strip in harvest_cells(spec, rect, n, hole):
            G += mass(mu, AffineMap.onto(cell)(hole.cube))
            S += mass(mu, AffineMap.onto(cell)(strip))
    return E, G, S


def harvest_cells(spec, rect, n, hole):
    if isinstance(spec, CarpetSpec):
        cover = moran_cover_box(spec, rect)
        ax = cover.axis
        for word, iv in zip(cover.words, cover.intervals):
            for jv in _subintervals(spec, 1 - ax, rect.interval(1 - ax), len(word)):
                cell = Box.from_intervals(iv, jv) if ax == 0 else Box.from_intervals(jv, iv)
                yield cell, hole.strip_for_axis(ax)
    else:
        k = sponge_depth(spec, n)
        for ivs in product(*[list(_subintervals(spec, a, rect.interval(a), k)) for a in range(3)]):
            yield Box.from_intervals(*ivs), hole.strip


CASES = [(BM, 2, 3), (BM, 3, 4), (BARANSKI, 2, 3), (BARANSKI, 3, 2),
         (CarpetSpec((F(1, 3), F(2, 3)), (F(1, 4), F(3, 4)), [(1, 1), (2, 2)]), 3, 3),
         (CarpetSpec((F(1, 3), F(2, 3)), (F(1, 4), F(3, 4)), [(1, 2), (2, 1)]), 3, 4)]


@pytest.mark.parametrize("spec,n,depth", CASES)
@pytest.mark.parametrize("seed", [0, 1])
def test_level_masses_match_enumeration(spec, n, depth, seed):
    mu = split_product(2, depth, seed)
    hole = find_hole(spec)
    lm = level_masses(spec, mu, n, hole)
    assert (lm.E, lm.G, lm.strip) == brute_level(spec, mu, n, hole)


def test_level_masses_sponge():
    mu = split_product(3, 2, 4)
    hole = find_hole(SPONGE)
    lm = level_masses(SPONGE, mu, 1, hole)
    assert (lm.E, lm.G, lm.strip) == brute_level(SPONGE, mu, 1, hole)


@pytest.mark.parametrize("n", [1, 5, 13, 40])
def test_level_masses_lebesgue_closed_form(n):
    hole = find_hole(BM)
    lm = level_masses(BM, lebesgue(2), n, hole)
    assert lm.E == F(3, 8) ** n
    assert lm.G == hole.cube.volume * lm.E


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_level_masses_monotone(seed):
    mu = split_product(2, 4, seed)
    es = [level_masses(BARANSKI, mu, n).E for n in range(0, 7)]
    assert es[0] == 1
    assert all(a >= b for a, b in zip(es, es[1:]))


# -- hole inequality --------------------------------------------------------

def test_hole_inequality_lebesgue():
    h = verify_hole_inequality(BARANSKI, lebesgue(2), [(1, 1)])
    assert h.passed and h.ratio == F(1, 9)


def test_hole_inequality_degenerate():
    mu = product_measure([from_1d_weights([0, 0, 1, 1]), lebesgue(1, (4,))])
    with pytest.raises(DegenerateMass):
        verify_hole_inequality(BM, mu, [(1, 1)])


@pytest.mark.parametrize("seed", range(3))
def test_hole_inequality_floor(seed):
    mu = split_product(2, 5, seed)
    D = local_doubling(mu)
    for word in ([(1, 1)], [(2, 3)], [(1, 4), (2, 3)]):
        h = verify_hole_inequality(BM, mu, word, D_ball=D)
        assert h.passed and 0 < h.floor <= h.ratio


# -- certificates -----------------------------------------------------------

def test_certificate_bm_lebesgue():
    cert = thinness_certificate(BM, lebesgue(2), 2, 1)
    assert cert.levels == (1, 13)
    assert cert.mass_last == F(3, 8) ** 13 == F(1594323, 549755813888)
    assert cert.cs == (F(1, 4), F(1, 4))
    assert cert.bound == 2 and cert.valid


def test_certificate_single_epoch():
    cert = thinness_certificate(BM, lebesgue(2), 1, 1)
    assert cert.bound == 1 / cert.c_min >= cert.mass_last == F(3, 8)


@pytest.mark.parametrize("seed", range(2))
def test_certificate_baranski_split(seed):
    mu = split_product(2, 4, seed)
    cert = thinness_certificate(BARANSKI, mu, 2, 1, D_ball=local_doubling(mu), isotropy=4)
    assert cert.valid and cert.levels == (1, 12)
    assert all(c > 0 for c in cert.cs)
    assert cert.harvest_sum <= cert.total
    assert cert.floor <= cert.c_min
    assert cert.lemma32 <= cert.c_min


def test_certificate_degenerate():
    # all mass inside the excluded cell
    mu = product_measure([from_1d_weights([0, 1]), from_1d_weights([0, 1, 0])])
    with pytest.raises(DegenerateMass):
        thinness_certificate(BARANSKI, mu, 1, 1)


# -- strip soundness --------------------------------------------------------

def random_map(rng):
    l1 = F(rng.randint(1, 32), 32)
    l2 = F(rng.randint(1, 32), 32)
    l1, l2 = max(l1, l2), min(l1, l2)
    scale = (l1, l2) if rng.random() < 0.5 else (l2, l1)
    shift = tuple(F(rng.randint(0, int((1 - s) * 64)), 64) for s in scale)
    return scale, shift


def test_strip_lebesgue_hundred_maps():
    rng = random.Random(7)
    hole = Box((F(1, 2), 0), (1, F(1, 2)))
    for _ in range(100):
        scale, shift = random_map(rng)
        s, q = strip_check(lebesgue(2), hole, scale, shift)
        assert s <= strip_constant(F(1, 2), 4) * q


@pytest.mark.parametrize("seed", range(20))
def test_strip_split_measures(seed):
    rng = random.Random(seed)
    mu = split_product(2, 4, seed)
    K = strip_constant(F(1, 2), local_doubling(mu))
    hole = Box((F(1, 2), 0), (1, F(1, 2)))
    for _ in range(5):
        scale, shift = random_map(rng)
        s, q = strip_check(mu, hole, scale, shift)
        assert s <= K * q
