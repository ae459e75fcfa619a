"""Diagonal self-affine grid systems: carpets, sponges and 1D Cantor-type sets.

A system subdivides [0,1]^d into a product grid (per-axis ratios) and keeps
a set of digit cells.  Digits are 1-based index tuples, so ``(2, 3)`` is the
cell in column 2, row 3.  Iterating the construction n times gives the level
set E_n, whose boxes are addressed by words of digits.

Besides level sets this module builds the combinatorial skeleton used by the
decay certificate: hole cubes, width-matched interval covers of rectangles,
the holes harvested inside each rectangle, and the epoch schedule.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import prod
from typing import Iterator, Sequence

from .errors import (
    DisjointnessViolation,
    EnumerationBudget,
    InvalidParameter,
    InvalidSpec,
    InvalidWord,
)
from .geometry import Box, ProductPartition, frac, interiors_meet

DEFAULT_BUDGET = 5_000_000

Digit = tuple[int, ...]
Word = tuple[Digit, ...]


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------


class GridSpec:
    """Shared behaviour of every grid system.  Subclasses supply ``ratios`` and ``digits``."""

    kind = "grid"
    ratios: tuple[tuple[Fraction, ...], ...]
    digits: tuple[Digit, ...]

    def _validate(self) -> None:
        for ax in self.ratios:
            if len(ax) < 2:
                raise InvalidSpec("every axis needs at least two subdivisions")
            if any(r <= 0 for r in ax):
                raise InvalidSpec("subdivision ratios must be positive")
            if sum(ax) != 1:
                raise InvalidSpec(f"ratios {ax} do not sum to 1")
        total = prod(len(ax) for ax in self.ratios)
        if not self.digits:
            raise InvalidSpec("digit set is empty")
        if len(self.digits) >= total:
            raise InvalidSpec("digit set must exclude at least one cell")
        for dg in self.digits:
            if len(dg) != self.dim:
                raise InvalidSpec(f"digit {dg} has wrong arity")
            if any(not 1 <= i <= len(ax) for i, ax in zip(dg, self.ratios)):
                raise InvalidSpec(f"digit {dg} outside the grid")

    @property
    def dim(self) -> int:
        return len(self.ratios)

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return tuple(len(ax) for ax in self.ratios)

    @property
    def digit_set(self) -> frozenset[Digit]:
        return frozenset(self.digits)

    def offsets(self, axis: int) -> tuple[Fraction, ...]:
        """Cumulative left endpoints of the subdivision along ``axis``."""
        return _cumulative(self.ratios[axis])

    def cell(self, digit: Digit) -> Box:
        """The level-1 grid cell of a digit (retained or not)."""
        lo = tuple(self.offsets(k)[i - 1] for k, i in enumerate(digit))
        hi = tuple(a + self.ratios[k][i - 1] for k, (a, i) in enumerate(zip(lo, digit)))
        return Box(lo, hi)

    def all_cells(self) -> list[Digit]:
        return list(product(*(range(1, m + 1) for m in self.grid_shape)))

    def excluded(self) -> list[Digit]:
        keep = self.digit_set
        return [c for c in self.all_cells() if c not in keep]

    @property
    def lebesgue_ratio(self) -> Fraction:
        """Volume fraction of E_1, so vol(E_n) = ratio^n."""
        return sum((prod((self.ratios[k][i - 1] for k, i in enumerate(dg)), start=Fraction(1))
                    for dg in self.digits), Fraction(0))

    def to_dict(self) -> dict:
        raise NotImplementedError


@lru_cache(maxsize=256)
def _cumulative(ratios: tuple[Fraction, ...]) -> tuple[Fraction, ...]:
    out, acc = [], Fraction(0)
    for r in ratios:
        out.append(acc)
        acc += r
    return tuple(out)


def _digits(digits, d: int) -> tuple[Digit, ...]:
    out = []
    for dg in digits:
        if isinstance(dg, int):
            dg = (dg,)
        dg = tuple(int(i) for i in dg)
        if len(dg) != d:
            raise InvalidSpec(f"digit {dg} should have {d} entries")
        out.append(dg)
    if len(set(out)) != len(out):
        raise InvalidSpec("duplicate digits")
    return tuple(sorted(out))


@dataclass(frozen=True)
class CarpetSpec(GridSpec):
    """Baránski carpet: column widths, row heights, retained cells."""

    widths: tuple[Fraction, ...]
    heights: tuple[Fraction, ...]
    digits: tuple[Digit, ...]
    kind = "carpet"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(frac(a) for a in self.widths))
        object.__setattr__(self, "heights", tuple(frac(b) for b in self.heights))
        object.__setattr__(self, "digits", _digits(self.digits, 2))
        self._validate()

    @property
    def ratios(self):
        return (self.widths, self.heights)

    @property
    def p(self) -> int:
        return len(self.widths)

    @property
    def q(self) -> int:
        return len(self.heights)

    def to_dict(self) -> dict:
        return {"kind": "carpet", "widths": [str(a) for a in self.widths],
                "heights": [str(b) for b in self.heights],
                "digits": [list(dg) for dg in self.digits]}


def bedford_mcmullen(p: int, q: int, digits) -> CarpetSpec:
    return CarpetSpec((Fraction(1, p),) * p, (Fraction(1, q),) * q, digits)


@dataclass(frozen=True)
class SpongeSpec(GridSpec):
    """Bedford-McMullen sponge on a p x q x u grid with p <= q <= u."""

    p: int
    q: int
    u: int
    digits: tuple[Digit, ...]
    kind = "sponge"

    def __post_init__(self):
        if not 2 <= self.p <= self.q <= self.u:
            raise InvalidSpec("sponges need 2 <= p <= q <= u")
        object.__setattr__(self, "digits", _digits(self.digits, 3))
        self._validate()

    @property
    def ratios(self):
        return tuple((Fraction(1, m),) * m for m in (self.p, self.q, self.u))

    def to_dict(self) -> dict:
        return {"kind": "sponge", "widths": [str(Fraction(1, self.p))] * self.p,
                "heights": [str(Fraction(1, self.q))] * self.q,
                "depths": [str(Fraction(1, self.u))] * self.u,
                "digits": [list(dg) for dg in self.digits]}


@dataclass(frozen=True)
class IntervalSpec(GridSpec):
    """One-dimensional Cantor-type system (e.g. widths (1/3,1/3,1/3), keep {1,3})."""

    widths: tuple[Fraction, ...]
    digits: tuple[Digit, ...]
    kind = "interval"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(frac(a) for a in self.widths))
        object.__setattr__(self, "digits", _digits(self.digits, 1))
        self._validate()

    @property
    def ratios(self):
        return (self.widths,)

    def to_dict(self) -> dict:
        return {"kind": "interval", "widths": [str(a) for a in self.widths],
                "digits": [dg[0] for dg in self.digits]}


def spec_from_dict(data: dict) -> GridSpec:
    """Inverse of ``to_dict``; field set {kind, widths, heights, depths, digits}."""
    allowed = {"kind", "widths", "heights", "depths", "digits"}
    unknown = set(data) - allowed
    if unknown:
        raise InvalidSpec(f"unknown spec fields: {sorted(unknown)}")
    kind = data.get("kind")
    digits = [tuple(d) if isinstance(d, (list, tuple)) else d for d in data.get("digits", [])]
    if kind == "carpet":
        return CarpetSpec(tuple(data["widths"]), tuple(data["heights"]), digits)
    if kind == "interval":
        return IntervalSpec(tuple(data["widths"]), digits)
    if kind == "sponge":
        axes = [tuple(frac(x) for x in data[k]) for k in ("widths", "heights", "depths")]
        for ax in axes:
            if len(set(ax)) != 1:
                raise InvalidSpec("sponge axes must be uniform subdivisions")
        return SpongeSpec(len(axes[0]), len(axes[1]), len(axes[2]), digits)
    raise InvalidSpec(f"unknown spec kind {kind!r}")


# ---------------------------------------------------------------------------
# Affine maps and level sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineMap:
    """x -> diag(scale) x + shift."""

    scale: tuple[Fraction, ...]
    shift: tuple[Fraction, ...]

    @classmethod
    def identity(cls, d: int) -> "AffineMap":
        return cls((Fraction(1),) * d, (Fraction(0),) * d)

    @classmethod
    def onto(cls, box: Box) -> "AffineMap":
        """The orientation-preserving map sending [0,1]^d onto ``box``."""
        return cls(box.sides, box.lo)

    def __call__(self, box: Box) -> Box:
        return Box(tuple(s * a + t for s, a, t in zip(self.scale, box.lo, self.shift)),
                   tuple(s * b + t for s, b, t in zip(self.scale, box.hi, self.shift)))

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """self ∘ inner."""
        return AffineMap(tuple(a * b for a, b in zip(self.scale, inner.scale)),
                         tuple(a * t + s for a, t, s in zip(self.scale, inner.shift, self.shift)))


def cell_map(spec: GridSpec, digit: Digit) -> AffineMap:
    return AffineMap.onto(spec.cell(digit))


def apply_word(spec: GridSpec, word: Sequence[Digit]) -> AffineMap:
    """f_σ = f_{i_1} ∘ ... ∘ f_{i_k}; the empty word gives the identity."""
    keep = spec.digit_set
    f = AffineMap.identity(spec.dim)
    for dg in word:
        dg = tuple(dg)
        if dg not in keep:
            raise InvalidWord(f"digit {dg} is not retained by the spec")
        f = f.compose(cell_map(spec, dg))
    return f


def word_box(spec: GridSpec, word: Sequence[Digit]) -> Box:
    return apply_word(spec, word)(Box.unit(spec.dim))


def axis_interval(spec: GridSpec, axis: int, indices: Sequence[int],
                  base: tuple[Fraction, Fraction] = (Fraction(0), Fraction(1))) -> tuple[Fraction, Fraction]:
    """Interval reached from ``base`` by following 1-based subdivision indices along one axis."""
    lo, hi = base
    offs, rats = spec.offsets(axis), spec.ratios[axis]
    for i in indices:
        w = hi - lo
        lo, hi = lo + offs[i - 1] * w, lo + (offs[i - 1] + rats[i - 1]) * w
    return lo, hi


def grid_index(spec: GridSpec, word: Sequence[Digit]) -> tuple[int, ...]:
    """0-based index of the word's box in the full level-|word| product grid."""
    idx = [0] * spec.dim
    for dg in word:
        for k, i in enumerate(dg):
            idx[k] = idx[k] * spec.grid_shape[k] + (i - 1)
    return tuple(idx)


@dataclass(frozen=True)
class LevelSet:
    spec: GridSpec
    n: int
    words: tuple[Word, ...]
    boxes: tuple[Box, ...]

    def __len__(self) -> int:
        return len(self.boxes)

    @property
    def partition(self) -> ProductPartition:
        """The full level-n product grid (all cells, retained or not)."""
        axes = []
        for k in range(self.spec.dim):
            pts = [Fraction(0), Fraction(1)]
            for _ in range(self.n):
                new = [pts[0]]
                for a, b in zip(pts, pts[1:]):
                    w = b - a
                    for off, r in zip(self.spec.offsets(k), self.spec.ratios[k]):
                        new.append(a + (off + r) * w)
                pts = new
            axes.append(tuple(pts))
        return ProductPartition(tuple(axes))

    def grid_indices(self) -> list[tuple[int, ...]]:
        return [grid_index(self.spec, w) for w in self.words]


def level_count(spec: GridSpec, n: int) -> int:
    return len(spec.digits) ** n


def iter_level(spec: GridSpec, n: int) -> Iterator[tuple[Word, Box]]:
    """Depth-first enumeration of E_n without materialising it."""
    maps = [(dg, cell_map(spec, dg)) for dg in spec.digits]

    def rec(word, f, depth):
        if depth == n:
            yield word, f(Box.unit(spec.dim))
            return
        for dg, g in maps:
            yield from rec(word + (dg,), f.compose(g), depth + 1)

    yield from rec((), AffineMap.identity(spec.dim), 0)


def level_set(spec: GridSpec, n: int, budget: int = DEFAULT_BUDGET) -> LevelSet:
    if n < 0:
        raise InvalidParameter("level must be non-negative")
    count = level_count(spec, n)
    if count > budget:
        raise EnumerationBudget(f"E_{n} has {count} boxes, budget {budget}", count=count)
    words, boxes = [], []
    for w, b in iter_level(spec, n):
        words.append(w)
        boxes.append(b)
    return LevelSet(spec, n, tuple(words), tuple(boxes))


def level_shapes(spec: GridSpec, n: int) -> Counter:
    """Multiset of side vectors of the boxes of E_n (without enumerating them)."""
    shapes = Counter({(Fraction(1),) * spec.dim: 1})
    steps = Counter(tuple(spec.ratios[k][i - 1] for k, i in enumerate(dg)) for dg in spec.digits)
    for _ in range(n):
        nxt: Counter = Counter()
        for s, c in shapes.items():
            for r, m in steps.items():
                nxt[tuple(a * b for a, b in zip(s, r))] += c * m
        shapes = nxt
    return shapes


def meets_level(spec: GridSpec, box: Box, m: int) -> bool:
    """Does the interior of ``box`` meet the interior of some box of E_m?"""
    maps = [cell_map(spec, dg) for dg in spec.digits]

    def rec(f, depth):
        cur = f(Box.unit(spec.dim))
        if not interiors_meet(cur, box):
            return False
        if depth == m:
            return True
        return any(rec(f.compose(g), depth + 1) for g in maps)

    return rec(AffineMap.identity(spec.dim), 0)


# ---------------------------------------------------------------------------
# Holes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HoleTemplate:
    """A stable cube Q avoiding E_1, with its strip (carpets) or prism (sponges).

    ``strip`` is the slab over Q's projection that forgets the last axis for
    sponges and the vertical direction for carpets: for a carpet it is
    Q_x x [0,1].  ``cross_strip`` is the horizontal counterpart [0,1] x Q_y,
    used when a rectangle is taller than wide.
    """

    cube: Box
    strip: Box
    cross_strip: Box | None = None

    @property
    def side(self) -> Fraction:
        return self.cube.sides[0]

    def strip_for_axis(self, axis: int) -> Box:
        return self.strip if axis == 0 else self.cross_strip


def _hole_strips(cube: Box) -> tuple[Box, Box | None]:
    d = cube.dim
    if d == 1:
        return Box.unit(1), None
    if d == 2:
        return (Box((cube.lo[0], 0), (cube.hi[0], 1)), Box((0, cube.lo[1]), (1, cube.hi[1])))
    return Box((cube.lo[0], cube.lo[1], 0), (cube.hi[0], cube.hi[1], 1)), None


def find_hole(spec: GridSpec) -> HoleTemplate:
    """Largest stable cube inside the closure of [0,1]^d minus E_1.

    Candidate lower corners are the grid breakpoints: a maximal cube can be
    slid towards the origin until each lower face rests on a breakpoint.
    Ties go to the corner that is smallest when compared from the last axis
    backwards (bottom rows first, then left columns).
    """
    kept = [spec.cell(dg) for dg in spec.digits]
    breaks = [spec.offsets(k) for k in range(spec.dim)]
    best = None
    for corner in product(*breaks):
        s = min(1 - x for x in corner)
        for c in kept:
            if all(c.hi[k] > corner[k] for k in range(spec.dim)):
                s = min(s, max(c.lo[k] - corner[k] for k in range(spec.dim)))
        if s <= 0:
            continue
        key = (-s, tuple(reversed(corner)))
        if best is None or key < best[0]:
            best = (key, corner, s)
    if best is None:
        raise InvalidSpec("no excluded cell; the system has no hole")
    _, corner, s = best
    cube = Box(corner, tuple(x + s for x in corner))
    strip, cross = _hole_strips(cube)
    return HoleTemplate(cube, strip, cross)


def osch_check(spec: GridSpec) -> tuple[bool, Box | None]:
    """Open set condition with a hole, with V the open unit cube.

    The grid maps always satisfy the open set condition for V; the hole
    exists exactly when some cell is excluded.  The witness is the
    ``find_hole`` cube.
    """
    total = prod(spec.grid_shape)
    if len(set(spec.digits)) >= total:
        return False, None
    return True, find_hole(spec).cube


# ---------------------------------------------------------------------------
# Width-matched covers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MoranCover:
    """Cover of the long side of R by subdivision intervals of matching width.

    ``axis`` is the covered axis (0 when R is at least as wide as tall).
    ``words`` are the subdivision index sequences relative to R along that
    axis, and ``intervals`` their absolute intervals.
    """

    rect: Box
    axis: int
    words: tuple[tuple[int, ...], ...]
    intervals: tuple[tuple[Fraction, Fraction], ...]
    min_ratio: Fraction

    @property
    def count(self) -> int:
        return len(self.words)

    @property
    def short_side(self) -> Fraction:
        return self.rect.sides[1 - self.axis]

    def check(self) -> None:
        """Assert coverage, the width window and interior disjointness."""
        lo, hi = self.rect.interval(self.axis)
        ivs = sorted(self.intervals)
        if ivs[0][0] != lo or ivs[-1][1] != hi:
            raise AssertionError("cover does not reach both ends of the side")
        for (a0, a1), (b0, b1) in zip(ivs, ivs[1:]):
            if b0 > a1:
                raise AssertionError("gap in cover")
            if b0 < a1:
                raise AssertionError("cover intervals overlap")
        b = self.short_side
        for a0, a1 in ivs:
            w = a1 - a0
            if not (self.min_ratio * w < b <= w):
                raise AssertionError(f"interval width {w} outside window for {b}")


@lru_cache(maxsize=4096)
def _relative_cover(ratios: tuple[Fraction, ...], r: Fraction) -> tuple[tuple[tuple[int, ...], Fraction, Fraction], ...]:
    """Cover [0,1] by subdivision intervals I with min(ratios)|I| < r <= |I|."""
    rmin = min(ratios)
    offs, acc = [], Fraction(0)
    for x in ratios:
        offs.append(acc)
        acc += x
    out = []
    stack = [((), Fraction(0), Fraction(1))]
    while stack:
        word, lo, w = stack.pop()
        if rmin * w < r:
            out.append((word, lo, w))
            continue
        for i in reversed(range(len(ratios))):
            stack.append((word + (i + 1,), lo + offs[i] * w, ratios[i] * w))
    return tuple(out)


def cover_axis(rect: Box) -> int:
    return 0 if rect.sides[0] >= rect.sides[1] else 1


def cover_shape(spec: CarpetSpec, sides: tuple[Fraction, Fraction]):
    """Relative cover for a rectangle of the given sides: (axis, entries)."""
    axis = 0 if sides[0] >= sides[1] else 1
    r = sides[1 - axis] / sides[axis]
    return axis, _relative_cover(spec.ratios[axis], r)


def moran_cover(spec: CarpetSpec, rect_word: Sequence[Digit]) -> MoranCover:
    if not isinstance(spec, CarpetSpec):
        raise InvalidSpec("width-matched covers are defined for carpets")
    rect = word_box(spec, rect_word)
    return moran_cover_box(spec, rect)


def moran_cover_box(spec: CarpetSpec, rect: Box) -> MoranCover:
    axis, entries = cover_shape(spec, rect.sides)
    lo, hi = rect.interval(axis)
    L = hi - lo
    words = tuple(e[0] for e in entries)
    ivs = tuple((lo + e[1] * L, lo + (e[1] + e[2]) * L) for e in entries)
    return MoranCover(rect, axis, words, ivs, min(spec.ratios[axis]))


def sponge_depth(spec: SpongeSpec, n: int) -> int:
    """Extra subdivision depth k with u^-n <= p^-(n+k) < u^-(n-1).

    Several k can satisfy the inequality when p < u; the largest one is
    returned, i.e. the deepest subdivision whose x-side is still at least
    the z-side of the level-n box.
    """
    if n < 1:
        raise InvalidParameter("sponge depth needs n >= 1")
    p, u = spec.p, spec.u
    m = n
    while p ** (m + 1) <= u ** n:
        m += 1
    assert u ** (n - 1) < p ** m <= u ** n
    return m - n


# ---------------------------------------------------------------------------
# Hole harvests
# ---------------------------------------------------------------------------


def _subintervals(spec: GridSpec, axis: int, base: tuple[Fraction, Fraction], depth: int):
    for idx in product(range(1, spec.grid_shape[axis] + 1), repeat=depth):
        yield axis_interval(spec, axis, idx, base)


def harvest_count(spec: GridSpec, rect: Box, level: int) -> int:
    """Number of hole boxes in G(R) for a rectangle of the given shape."""
    if isinstance(spec, CarpetSpec):
        axis, entries = cover_shape(spec, rect.sides)
        other = spec.grid_shape[1 - axis]
        return sum(other ** len(e[0]) for e in entries)
    if isinstance(spec, SpongeSpec):
        k = sponge_depth(spec, level)
        return (spec.p * spec.q * spec.u) ** k
    raise InvalidSpec("harvests are defined for carpets and sponges")


def harvest_offset(spec: GridSpec, rect: Box, level: int) -> int:
    """Largest extra subdivision depth used by G(R)."""
    if isinstance(spec, CarpetSpec):
        _, entries = cover_shape(spec, rect.sides)
        return max(len(e[0]) for e in entries)
    if isinstance(spec, SpongeSpec):
        return sponge_depth(spec, level)
    raise InvalidSpec("harvests are defined for carpets and sponges")


def hole_harvest_box(spec: GridSpec, rect: Box, level: int, hole: HoleTemplate,
                     budget: int = DEFAULT_BUDGET) -> list[Box]:
    count = harvest_count(spec, rect, level)
    if count > budget:
        raise EnumerationBudget(f"G(R) has {count} holes, budget {budget}", count=count)
    out = []
    if isinstance(spec, CarpetSpec):
        cover = moran_cover_box(spec, rect)
        axis = cover.axis
        base = rect.interval(1 - axis)
        for word, iv in zip(cover.words, cover.intervals):
            for jv in _subintervals(spec, 1 - axis, base, len(word)):
                cell = Box.from_intervals(iv, jv) if axis == 0 else Box.from_intervals(jv, iv)
                out.append(AffineMap.onto(cell)(hole.cube))
        return out
    k = sponge_depth(spec, level)
    per_axis = [list(_subintervals(spec, a, rect.interval(a), k)) for a in range(3)]
    for ivs in product(*per_axis):
        out.append(AffineMap.onto(Box.from_intervals(*ivs))(hole.cube))
    return out


def hole_harvest(spec: GridSpec, rect_word: Sequence[Digit], hole: HoleTemplate,
                 budget: int = DEFAULT_BUDGET) -> list[Box]:
    """G(R): the image of Q in every width-matched sub-rectangle of R.

    For carpets each cover interval I_σ(i) of relative depth ℓ is paired with
    the q^ℓ (or p^ℓ when the cover runs vertically) subdivisions of the short
    side, giving the level-(n+ℓ) rectangles R_{i,j}.  For sponges R is
    subdivided ``sponge_depth`` more times in every axis.
    """
    rect = word_box(spec, rect_word)
    return hole_harvest_box(spec, rect, len(rect_word), hole, budget)


# ---------------------------------------------------------------------------
# Epoch schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpochHarvest:
    level: int
    ntilde: int
    max_offset: int
    hole_count: int
    boxes: tuple[Box, ...] | None = None


@dataclass(frozen=True)
class HarvestSchedule:
    spec: GridSpec
    hole: HoleTemplate
    slack: int
    epochs: tuple[EpochHarvest, ...]
    disjoint: bool
    disjointness_mode: str
    minimal_slack: int
    notes: tuple[str, ...] = field(default=())

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(e.level for e in self.epochs)

    @property
    def ntildes(self) -> tuple[int, ...]:
        return tuple(e.ntilde for e in self.epochs)


def epoch_statistics(spec: GridSpec, n: int, budget: int = DEFAULT_BUDGET) -> tuple[int, int, int]:
    """(max N(R), max hole depth offset, total hole count) over R in E_n.

    Works on shape classes of E_n, so the level set itself is never built;
    the budget bounds the number of distinct shapes.
    """
    shapes = level_shapes(spec, n)
    if len(shapes) > budget:
        raise EnumerationBudget(f"E_{n} has {len(shapes)} shape classes", count=len(shapes))
    ntilde = offset = 0
    total = 0
    for sides, mult in shapes.items():
        rect = Box((Fraction(0),) * spec.dim, sides)
        if isinstance(spec, CarpetSpec):
            _, entries = cover_shape(spec, sides)
            ntilde = max(ntilde, len(entries))
        else:
            ntilde = max(ntilde, sponge_depth(spec, n))
        offset = max(offset, harvest_offset(spec, rect, n))
        total += mult * harvest_count(spec, rect, n)
    return ntilde, offset, total


def _epoch_boxes(spec, n, hole, budget):
    out = []
    for word, rect in iter_level(spec, n):
        out.extend(hole_harvest_box(spec, rect, n, hole, budget))
    return tuple(out)


def _pairwise_disjoint(groups: Sequence[Sequence[Box]]) -> bool:
    flat = [(b, g) for g, boxes in enumerate(groups) for b in boxes]
    flat.sort(key=lambda t: t[0].lo[0])
    active: list = []
    for b, g in flat:
        active = [(c, h) for c, h in active if c.hi[0] > b.lo[0]]
        for c, h in active:
            if interiors_meet(b, c):
                return False
        active.append((b, g))
    return True


def harvest_schedule(spec: GridSpec, K: int, n1: int = 1, slack: int = 10,
                     budget: int = DEFAULT_BUDGET, pairwise_limit: int = 20_000,
                     materialize_limit: int = 100_000) -> HarvestSchedule:
    """Epoch levels n_{k+1} = n_k + ñ_k + slack with their hole harvests.

    ñ_k is the largest cover count N(R) over R in E_{n_k} (for sponges the
    extra subdivision depth).  Hole boxes are materialised only when the
    epoch's harvest fits in ``budget``; counts are always exact.

    Disjointness across epochs is established three ways, strongest first:
    a direct pairwise test when every epoch is small, a descent test of each
    materialised hole against the next epoch's level set, and the structural
    criterion n_{k+1} >= n_k + (deepest hole offset) + 1, which suffices
    because each hole sits in the excluded part of a grid cell.
    """
    if K < 1 or n1 < 1:
        raise InvalidParameter("need K >= 1 and n1 >= 1")
    if not isinstance(spec, (CarpetSpec, SpongeSpec)):
        raise InvalidSpec("epoch schedules are defined for carpets and sponges")
    hole = find_hole(spec)
    epochs: list[EpochHarvest] = []
    n = n1
    for k in range(K):
        try:
            ntilde, offset, count = epoch_statistics(spec, n, budget)
        except EnumerationBudget as exc:
            raise EnumerationBudget(f"epoch {k + 1} (level {n}): {exc}", count=exc.count,
                                    partial=tuple(epochs)) from None
        small = count <= min(budget, materialize_limit) and level_count(spec, n) <= budget
        boxes = _epoch_boxes(spec, n, hole, budget) if small else None
        epochs.append(EpochHarvest(n, ntilde, offset, count, boxes))
        n = n + ntilde + slack

    structural = all(b.level - a.level >= a.max_offset + 1 for a, b in zip(epochs, epochs[1:]))
    minimal_slack = max((e.max_offset + 1 - e.ntilde for e in epochs[:-1]), default=0)
    notes = []
    mode = "structural" if structural else "unverified"
    disjoint = structural
    if all(e.boxes is not None for e in epochs) and sum(e.hole_count for e in epochs) <= pairwise_limit:
        ok = _pairwise_disjoint([e.boxes for e in epochs])
        if not ok and structural:
            raise DisjointnessViolation("holes overlap despite the structural criterion")
        disjoint, mode = ok, "pairwise"
    elif len(epochs) > 1 and all(e.boxes is not None for e in epochs[:-1]):
        ok = all(not meets_level(spec, h, b.level)
                 for a, b in zip(epochs, epochs[1:]) for h in a.boxes)
        if not ok and structural:
            raise DisjointnessViolation("hole meets a later level set")
        disjoint, mode = ok, "descent"
    if structural and mode != "structural":
        mode += "+structural"
    if not structural:
        notes.append("slack below the structural bound")
    return HarvestSchedule(spec, hole, slack, tuple(epochs), disjoint, mode, minimal_slack, tuple(notes))
