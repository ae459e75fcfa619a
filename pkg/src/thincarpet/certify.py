"""Explicit constants and the decay certificate for thin carpets and sponges.

The certificate evaluates three masses per epoch level n exactly: the level
set E_n, the hole harvest G_n = ∪ G(R), and the strip union (the sets
f_ij(V_Q) of every rectangle, whose mass feeds the comparability constant).

The evaluation walks the digit tree.  A node whose box lies inside one cell
of the measure's partition sees a uniform density there, and its whole
subtree has a closed form: E_n fills a fraction ρ^(n-t) of the box (ρ the
volume fraction of E_1), each G(R) fills a fraction vol(Q) of R, and each
strip union a fraction side(Q)^(d-1).  Only boxes straddling a partition
breakpoint are expanded down to level n, where their harvests are integrated
against the partition with per-axis cumulative length profiles.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import prod
from typing import Sequence

from .errors import DegenerateMass, DisjointnessViolation, InvalidParameter
from .geometry import Box, frac
from .measures import GridMeasure, doubling_constant, mass
from .systems import (
    DEFAULT_BUDGET,
    CarpetSpec,
    GridSpec,
    HarvestSchedule,
    HoleTemplate,
    SpongeSpec,
    cover_shape,
    find_hole,
    harvest_schedule,
    sponge_depth,
    word_box,
)


# ---------------------------------------------------------------------------
# Paper-form constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerExpr:
    """coef * base^exponent, kept symbolic when the exact value is too large."""

    coef: Fraction
    base: Fraction
    exponent: int

    def log2(self) -> float:
        return math.log2(self.coef) + self.exponent * math.log2(self.base)

    def __float__(self) -> float:
        return 2.0 ** self.log2()

    def exact(self) -> Fraction:
        return self.coef * self.base ** self.exponent

    def __le__(self, other) -> bool:
        if isinstance(other, PowerExpr):
            return self.log2() <= other.log2()
        other = frac(other) if not isinstance(other, float) else other
        if isinstance(other, Fraction) and other > 0:
            return self.log2() <= math.log2(other)
        return float(self) <= other

    def __str__(self) -> str:
        return f"{self.coef}*({self.base})^{self.exponent}"


EXACT_EXPONENT_LIMIT = 4096


def lemma32_constant(a, d: int, A):
    """(a/4)^d · A^(-(4/a)^d), exact when (4/a)^d is an integer of modest size."""
    a, A = frac(a), frac(A)
    if not 0 < a <= 1 or A < 1 or d not in (1, 2, 3):
        raise InvalidParameter("need 0 < a <= 1, A >= 1 and d in {1,2,3}")
    e = (4 / a) ** d
    coef = (a / 4) ** d
    if A == 1:
        return coef
    if e.denominator != 1:
        return PowerExpr(coef, 1 / A, math.ceil(e))
    e = int(e)
    if e <= EXACT_EXPONENT_LIMIT:
        return coef / A ** e
    return PowerExpr(coef, 1 / A, e)


def doublings_for(a) -> int:
    """Smallest k with 2^k a >= 2, i.e. ceil(log2(2/a))."""
    a = frac(a)
    k = 0
    while 2 ** k * a < 2:
        k += 1
    return k


def strip_constant(a, D_ball) -> Fraction:
    """D^ceil(log2(2/a)): the doublings taking a ball B to (2/a)B."""
    a, D = frac(a), frac(D_ball)
    if not 0 < a <= 1 or D < 1:
        raise InvalidParameter("need 0 < a <= 1 and D >= 1")
    return D ** doublings_for(a)


def ball_count(l1, l2) -> tuple[int, list[tuple[Fraction, Fraction]]]:
    """Number of diameter-λ2 balls placed side by side in a λ1 x λ2 rectangle, with centers."""
    l1, l2 = frac(l1), frac(l2)
    if not l1 >= l2 > 0:
        raise InvalidParameter("need l1 >= l2 > 0")
    n = math.floor(l1 / l2)
    return n, [((2 * i + 1) * l2 / 2, l2 / 2) for i in range(n)]


# ---------------------------------------------------------------------------
# Per-axis profiles
# ---------------------------------------------------------------------------


@lru_cache(maxsize=200_000)
def _hier_profile(ratios: tuple[Fraction, ...], h0: Fraction, h1: Fraction, depth: int,
                  t: Fraction) -> Fraction:
    """|Y ∩ [0, t]| where Y puts [h0, h1] in every depth-``depth`` subinterval of [0,1]."""
    if t <= 0:
        return Fraction(0)
    if t >= 1:
        return h1 - h0
    if depth == 0:
        return min(max(t - h0, Fraction(0)), h1 - h0)
    acc = Fraction(0)
    for r in ratios:
        if t <= acc + r:
            return (h1 - h0) * acc + r * _hier_profile(ratios, h0, h1, depth - 1, (t - acc) / r)
        acc += r
    return h1 - h0


def _identity_profile(t: Fraction) -> Fraction:
    return min(max(t, Fraction(0)), Fraction(1))


class _IntervalUnion:
    """Sorted disjoint intervals in [0,1] with cumulative lengths.

    Starts are also kept as integers over a common denominator so the
    lookup bisects on ints.
    """

    def __init__(self, intervals):
        ivs = sorted(intervals)
        self.starts = [a for a, _ in ivs]
        self.ends = [b for _, b in ivs]
        cum, acc = [Fraction(0)], Fraction(0)
        for a, b in ivs:
            acc += b - a
            cum.append(acc)
        self.cum = cum
        self.den = math.lcm(*(a.denominator for a in self.starts)) if ivs else 1
        self.int_starts = [a.numerator * (self.den // a.denominator) for a in self.starts]

    @classmethod
    def build(cls, intervals):
        return cls(intervals)

    def __call__(self, t: Fraction) -> Fraction:
        i = bisect_right(self.int_starts, t.numerator * self.den // t.denominator)
        if i == 0:
            return Fraction(0)
        end = self.ends[i - 1]
        return self.cum[i - 1] + (t if t < end else end) - self.starts[i - 1]


@dataclass(frozen=True)
class _ShapePlan:
    """Relative harvest and strip profiles of one rectangle shape.

    ``terms`` lists (axis profiles for G) per group and ``strip_terms``
    the same for the strip union; each group's contribution is a product
    of per-axis profile increments.
    """

    terms: tuple
    strip_terms: tuple


def _carpet_plan(spec: CarpetSpec, sides, hole: HoleTemplate) -> _ShapePlan:
    axis, entries = cover_shape(spec, sides)
    other = 1 - axis
    h0, h1 = hole.cube.interval(axis)
    g0, g1 = hole.cube.interval(other)
    groups = defaultdict(list)
    for word, lo, w in entries:
        groups[len(word)].append((lo + w * h0, lo + w * h1))
    terms, strip = [], []
    ratios_o = spec.ratios[other]
    strip_union = _IntervalUnion.build([iv for ivs in groups.values() for iv in ivs])
    for depth, ivs in sorted(groups.items()):
        union = _IntervalUnion.build(ivs)
        prof_o = _bind_hier(ratios_o, g0, g1, depth)
        terms.append(_axis_pair(axis, union, prof_o))
    strip.append(_axis_pair(axis, strip_union, _identity_profile))
    return _ShapePlan(tuple(terms), tuple(strip))


def _axis_pair(axis, prof_axis, prof_other):
    return (prof_axis, prof_other) if axis == 0 else (prof_other, prof_axis)


UNION_LIMIT = 20_000


@lru_cache(maxsize=256)
def _bind_hier(ratios, h0, h1, depth):
    """Profile of the hierarchical hole set: a flat interval table when small, else recursion."""
    if len(ratios) ** depth <= UNION_LIMIT:
        ivs = [(h0, h1)]
        offs = [sum(ratios[:i], Fraction(0)) for i in range(len(ratios))]
        for _ in range(depth):
            ivs = [(o + r * a, o + r * b) for o, r in zip(offs, ratios) for a, b in ivs]
        return _IntervalUnion.build(ivs)

    def f(t):
        return _hier_profile(ratios, h0, h1, depth, t)
    return f


def _sponge_plan(spec: SpongeSpec, level: int, hole: HoleTemplate) -> _ShapePlan:
    k = sponge_depth(spec, level)
    profs = tuple(_bind_hier(spec.ratios[a], *hole.cube.interval(a), k) for a in range(3))
    strip = (profs[0], profs[1], _identity_profile)
    return _ShapePlan((profs,), (strip,))


# ---------------------------------------------------------------------------
# Level masses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelMasses:
    level: int
    E: Fraction
    G: Fraction
    strip: Fraction
    straddling: int


class _Density:
    """Integer-coordinate view of a grid measure for the tree walk.

    Coordinates on axis k are integers over ``scale[k]``, chosen so every
    partition breakpoint and every box of E_0..E_n is on the lattice.
    """

    def __init__(self, mu: GridMeasure, scale: Sequence[int]):
        self.mu = mu
        self.scale = tuple(scale)
        self.breaks = [[int(t * s) for t in ax] for ax, s in zip(mu.partition.breaks, scale)]
        self._cache: dict = {}

    def single_cell(self, lo, w):
        idx = []
        for ax, a, b in zip(self.breaks, lo, w):
            i = bisect_right(ax, a) - 1
            if a + b > ax[i + 1]:
                return None
            idx.append(i)
        return tuple(idx)

    def density(self, idx) -> Fraction:
        """Weight per unit of lattice volume."""
        if idx not in self._cache:
            vol = prod(ax[i + 1] - ax[i] for ax, i in zip(self.breaks, idx))
            self._cache[idx] = self.mu.weight(idx) / vol
        return self._cache[idx]

    def cells(self, lo, w):
        out = []
        for ax, a, b in zip(self.breaks, lo, w):
            i = bisect_right(ax, a) - 1
            row = []
            while i < len(ax) - 1 and ax[i] < a + b:
                row.append((i, Fraction(max(ax[i], a) - a, b), Fraction(min(ax[i + 1], a + b) - a, b)))
                i += 1
            out.append(row)
        return out

    def integrate(self, lo, w, term_sets) -> list[Fraction]:
        """For each term set: Σ_cells density · vol(box) · Σ_terms Π_axis Δprofile."""
        per_axis = self.cells(lo, w)
        totals = [Fraction(0)] * len(term_sets)
        vol = prod(w)
        for combo in product(*per_axis):
            dens = self.density(tuple(c[0] for c in combo))
            if dens == 0:
                continue
            for j, terms in enumerate(term_sets):
                s = Fraction(0)
                for profs in terms:
                    s += prod((p(c[2]) - p(c[1]) for p, c in zip(profs, combo)), start=Fraction(1))
                totals[j] += dens * s
        return [t * vol for t in totals]


def _lattice_scale(spec: GridSpec, mu: GridMeasure, n: int) -> list[int]:
    out = []
    for k in range(spec.dim):
        R = 1
        for r in spec.ratios[k]:
            R = math.lcm(R, r.denominator)
        for o in spec.offsets(k):
            R = math.lcm(R, o.denominator)
        P = 1
        for t in mu.partition.breaks[k]:
            P = math.lcm(P, t.denominator)
        out.append(math.lcm(P, R ** n))
    return out


def _box_of(lo, w, scale) -> Box:
    return Box(tuple(Fraction(a, s) for a, s in zip(lo, scale)),
               tuple(Fraction(a + b, s) for a, b, s in zip(lo, w, scale)))


def level_masses(spec: GridSpec, mu: GridMeasure, n: int, hole: HoleTemplate | None = None) -> LevelMasses:
    """Exact μ(E_n), μ(G_n) and μ(strip union) without enumerating E_n."""
    if mu.dim != spec.dim:
        raise InvalidParameter("measure and spec dimensions differ")
    if hole is None:
        hole = find_hole(spec)
    d = spec.dim
    scale = _lattice_scale(spec, mu, n)
    dens = _Density(mu, scale)
    rho = spec.lebesgue_ratio
    qvol = hole.cube.volume
    sfrac = hole.side ** (d - 1)
    # per digit and axis: (offset numerator, offset denominator, ratio numerator, ratio denominator)
    steps = []
    for dg in spec.digits:
        st = []
        for k, i in enumerate(dg):
            o, r = spec.offsets(k)[i - 1], spec.ratios[k][i - 1]
            st.append((o.numerator, o.denominator, r.numerator, r.denominator))
        steps.append(st)
    plans: dict = {}
    ident = tuple(_identity_profile for _ in range(d))
    with_harvest = isinstance(spec, (CarpetSpec, SpongeSpec))

    def plan(sides):
        if sides not in plans:
            if isinstance(spec, CarpetSpec):
                plans[sides] = _carpet_plan(spec, sides, hole)
            else:
                plans[sides] = _sponge_plan(spec, n, hole)
        return plans[sides]

    uniform: dict = defaultdict(int)
    E = G = S = Fraction(0)
    straddling = 0
    stack = [((0,) * d, tuple(scale), 0)]
    while stack:
        lo, w, t = stack.pop()
        idx = dens.single_cell(lo, w)
        if idx is not None:
            uniform[idx, t] += prod(w)
            continue
        if t == n:
            straddling += 1
            if with_harvest:
                p = plan(tuple(Fraction(b, s) for b, s in zip(w, scale)))
                e, g, s_ = dens.integrate(lo, w, ((ident,), p.terms, p.strip_terms))
                G += g
                S += s_
            else:
                e, = dens.integrate(lo, w, ((ident,),))
            E += e
            continue
        for st in steps:
            stack.append((tuple(a + b * on // od for a, b, (on, od, _, _) in zip(lo, w, st)),
                          tuple(b * rn // rd for b, (_, _, rn, rd) in zip(w, st)), t + 1))
    for (idx, t), vol in uniform.items():
        base = dens.density(idx) * vol * rho ** (n - t)
        E += base
        G += base * qvol
        S += base * sfrac
    return LevelMasses(n, E, G, S, straddling)


def rect_masses(spec: GridSpec, mu: GridMeasure, rect: Box, level: int,
                hole: HoleTemplate | None = None) -> tuple[Fraction, Fraction, Fraction]:
    """(μ(R), μ(G(R)), μ(strip union of R)) for one rectangle."""
    hole = hole or find_hole(spec)
    scale = [math.lcm(_lattice_scale(spec, mu, 0)[k], *(x.denominator for x in (rect.lo[k], rect.hi[k])))
             for k in range(spec.dim)]
    dens = _Density(mu, scale)
    lo = tuple(int(a * s) for a, s in zip(rect.lo, scale))
    w = tuple(int(b * s) for b, s in zip(rect.sides, scale))
    ident = tuple(_identity_profile for _ in range(spec.dim))
    p = _carpet_plan(spec, rect.sides, hole) if isinstance(spec, CarpetSpec) else _sponge_plan(spec, level, hole)
    e, g, s = dens.integrate(lo, w, ((ident,), p.terms, p.strip_terms))
    return e, g, s


# ---------------------------------------------------------------------------
# Hole inequality and local doubling
# ---------------------------------------------------------------------------


def local_doubling(mu: GridMeasure, finest: int | None = None) -> Fraction:
    """Largest cube doubling constant over dyadic scales down to half the finest cell.

    Below the cell size the density is piecewise constant, so these scales
    already exhibit every local configuration of neighbouring cells.
    """
    if finest is None:
        finest = max(math.ceil(math.log2(1 / min(b - a for a, b in zip(ax, ax[1:]))))
                     for ax in mu.partition.breaks)
    finest = max(finest, 1)
    return max(doubling_constant(mu, Fraction(1, 2 ** i)) for i in range(1, finest + 2))


@dataclass(frozen=True)
class HoleInequality:
    ratio: Fraction
    passed: bool
    comparability: Fraction
    floor: Fraction | None


def verify_hole_inequality(spec: GridSpec, mu: GridMeasure, rect_word, hole: HoleTemplate | None = None,
                           D_ball=None) -> HoleInequality:
    """μ(G(R)) / μ(R) for one rectangle, with the composed floor when D_ball is given.

    The floor is C2 / strip_constant(side(Q), D_ball) with C2 the measured
    ratio μ(strip union) / μ(R).
    """
    hole = hole or find_hole(spec)
    rect = word_box(spec, rect_word)
    mR, mG, mS = rect_masses(spec, mu, rect, len(rect_word), hole)
    if mR == 0:
        raise DegenerateMass("rectangle carries no mass")
    c2 = mS / mR
    floor = c2 / strip_constant(hole.side, D_ball) if D_ball is not None else None
    return HoleInequality(mG / mR, mG > 0, c2, floor)


# ---------------------------------------------------------------------------
# Certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpochRecord:
    level: int
    mass_E: Fraction
    mass_G: Fraction
    mass_strip: Fraction
    c: Fraction
    c2: Fraction
    straddling: int


@dataclass(frozen=True)
class ThinnessCertificate:
    spec: dict
    measure: str
    K: int
    levels: tuple[int, ...]
    epochs: tuple[EpochRecord, ...]
    c_min: Fraction
    bound: Fraction
    mass_last: Fraction
    total: Fraction
    disjoint: bool
    disjointness_mode: str
    D_ball: Fraction | None = None
    strip: Fraction | None = None
    floor: Fraction | None = None
    lemma32: object = None
    notes: tuple[str, ...] = field(default=())

    @property
    def cs(self) -> tuple[Fraction, ...]:
        return tuple(e.c for e in self.epochs)

    @property
    def harvest_sum(self) -> Fraction:
        return sum((e.c * e.mass_E for e in self.epochs), Fraction(0))

    @property
    def valid(self) -> bool:
        return (self.disjoint and all(0 < c <= 1 for c in self.cs)
                and self.mass_last <= self.bound and self.harvest_sum <= self.total)


def thinness_certificate(spec: GridSpec, mu: GridMeasure, K: int, n1: int = 1, slack: int = 10,
                         budget: int = DEFAULT_BUDGET, D_ball=None, isotropy=None,
                         schedule: HarvestSchedule | None = None) -> ThinnessCertificate:
    """Per-epoch ratios c_k = μ(G_{n_k}) / μ(E_{n_k}) and the bound μ(E_{n_K}) <= μ([0,1]^d)/(c_min K).

    The bound holds because the G_{n_k} are disjoint and E_n decreases:
    K c_min μ(E_{n_K}) <= Σ_k c_k μ(E_{n_k}) = Σ_k μ(G_{n_k}) <= μ([0,1]^d).
    With ``D_ball`` the composed floor C2_min / strip_constant is reported;
    with ``isotropy`` the cube-chain constant lemma32_constant(side, d, A) too.
    """
    sched = schedule or harvest_schedule(spec, K, n1, slack, budget)
    hole = sched.hole
    records = []
    for ep in sched.epochs:
        lm = level_masses(spec, mu, ep.level, hole)
        if lm.E == 0:
            raise DegenerateMass(f"E_{ep.level} carries no mass")
        records.append(EpochRecord(ep.level, lm.E, lm.G, lm.strip, lm.G / lm.E, lm.strip / lm.E,
                                   lm.straddling))
    total = mu.total
    c_min = min(r.c for r in records)
    if c_min <= 0:
        raise DegenerateMass("some harvest carries no mass")
    bound = total / (c_min * K)
    harvest = sum((r.mass_G for r in records), Fraction(0))
    notes = list(sched.notes)
    if sched.disjoint and harvest > total:
        raise DisjointnessViolation("disjoint harvests exceed the total mass")
    strip = floor = None
    if D_ball is not None:
        strip = strip_constant(hole.side, D_ball)
        floor = min(r.c2 for r in records) / strip
        if floor > c_min:
            notes.append("composed floor exceeds a measured ratio")
    l32 = lemma32_constant(hole.side, spec.dim, isotropy) if isotropy is not None else None
    return ThinnessCertificate(spec.to_dict(), mu.label, K, sched.levels, tuple(records), c_min, bound,
                               records[-1].mass_E, total, sched.disjoint, sched.disjointness_mode,
                               frac(D_ball) if D_ball is not None else None, strip, floor, l32,
                               tuple(notes))


# ---------------------------------------------------------------------------
# Strip soundness sampling
# ---------------------------------------------------------------------------


def strip_check(mu: GridMeasure, hole: Box, scale: Sequence, shift: Sequence) -> tuple[Fraction, Fraction]:
    """(μ(f(V_Q)), μ(f(Q))) for the diagonal map x -> scale*x + shift.

    V_Q is the smallest strip through Q across the short direction of f:
    vertical when λ1 >= λ2, horizontal otherwise (for d = 3 the prism over
    the first two axes).
    """
    d = hole.dim
    scale = [frac(s) for s in scale]
    shift = [frac(t) for t in shift]
    if d == 2:
        axis = 1 if scale[0] >= scale[1] else 0
    else:
        axis = d - 1
    lo = list(hole.lo)
    hi = list(hole.hi)
    lo[axis], hi[axis] = Fraction(0), Fraction(1)
    strip = Box(tuple(lo), tuple(hi))

    def image(b):
        return Box(tuple(s * x + t for s, x, t in zip(scale, b.lo, shift)),
                   tuple(s * x + t for s, x, t in zip(scale, b.hi, shift)))

    return mass(mu, image(strip)), mass(mu, image(hole))
