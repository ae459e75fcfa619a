"""Exact axis-aligned geometry on rational coordinates.

Boxes are closed and live in dimension 1, 2 or 3.  Every coordinate is a
:class:`fractions.Fraction`; nothing in this module touches floating point.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import prod
from typing import Iterable, Sequence

from .errors import DimensionMismatch, InvalidFactor, InvalidParameter, NotCongruent

Scalar = Fraction


def frac(x) -> Fraction:
    """Coerce ints, strings like ``"3/8"`` and Fractions to a Fraction.

    Floats are rejected: an exact value cannot be recovered from one.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a scalar")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot build an exact scalar from {type(x).__name__}")


@dataclass(frozen=True)
class Box:
    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    def __post_init__(self):
        lo = tuple(frac(v) for v in self.lo)
        hi = tuple(frac(v) for v in self.hi)
        if len(lo) != len(hi):
            raise DimensionMismatch("lo and hi have different lengths")
        if not 1 <= len(lo) <= 3:
            raise InvalidParameter(f"dimension {len(lo)} not supported")
        if any(a > b for a, b in zip(lo, hi)):
            raise InvalidParameter(f"empty box {lo} > {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_intervals(cls, *intervals: tuple) -> "Box":
        return cls(tuple(i[0] for i in intervals), tuple(i[1] for i in intervals))

    @classmethod
    def unit(cls, d: int) -> "Box":
        return cls((Fraction(0),) * d, (Fraction(1),) * d)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> tuple[Fraction, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def volume(self) -> Fraction:
        return prod(self.sides, start=Fraction(1))

    @property
    def center(self) -> tuple[Fraction, ...]:
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    def interval(self, k: int) -> tuple[Fraction, Fraction]:
        return self.lo[k], self.hi[k]

    def is_cube(self) -> bool:
        return len(set(self.sides)) == 1

    def contains(self, other: "Box") -> bool:
        _check_dims(self, other)
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def translate(self, v: Sequence) -> "Box":
        return Box(tuple(a + frac(t) for a, t in zip(self.lo, v)),
                   tuple(b + frac(t) for b, t in zip(self.hi, v)))

    def __str__(self) -> str:
        return " x ".join(f"[{a},{b}]" for a, b in zip(self.lo, self.hi))


def _check_dims(a: Box, b: Box) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension {a.dim} vs {b.dim}")


def intersection(a: Box, b: Box) -> Box | None:
    """Closed intersection, or None when the boxes are disjoint."""
    _check_dims(a, b)
    lo = tuple(max(x, y) for x, y in zip(a.lo, b.lo))
    hi = tuple(min(x, y) for x, y in zip(a.hi, b.hi))
    if any(l > h for l, h in zip(lo, hi)):
        return None
    return Box(lo, hi)


def intersects(a: Box, b: Box) -> bool:
    _check_dims(a, b)
    return all(x0 <= y1 and y0 <= x1 for x0, x1, y0, y1 in zip(a.lo, a.hi, b.lo, b.hi))


def interiors_meet(a: Box, b: Box) -> bool:
    """True when the open interiors overlap (per-axis open intervals)."""
    _check_dims(a, b)
    return all(x0 < y1 and y0 < x1 for x0, x1, y0, y1 in zip(a.lo, a.hi, b.lo, b.hi))


def overlap_fraction(box: Box, cell: Box) -> Fraction:
    """vol(box ∩ cell) / vol(cell).

    Degenerate cells are handled per axis: a zero-width axis of the cell
    counts as fully covered when its coordinate lies inside the box's
    interval and as uncovered otherwise.
    """
    _check_dims(box, cell)
    out = Fraction(1)
    for b0, b1, c0, c1 in zip(box.lo, box.hi, cell.lo, cell.hi):
        w = c1 - c0
        if w == 0:
            if not b0 <= c0 <= b1:
                return Fraction(0)
            continue
        ov = min(b1, c1) - max(b0, c0)
        if ov <= 0:
            return Fraction(0)
        out *= ov / w
    return out


def dilate(box: Box, factor) -> Box:
    """Scale ``box`` about its center by ``factor`` on every axis."""
    factor = frac(factor)
    if factor <= 0:
        raise InvalidFactor(f"dilation factor must be positive, got {factor}")
    c = box.center
    half = tuple(s * factor / 2 for s in box.sides)
    return Box(tuple(x - h for x, h in zip(c, half)), tuple(x + h for x, h in zip(c, half)))


def clip(box: Box, to: Box) -> Box | None:
    return intersection(box, to)


def gap_squared(a: Box, b: Box) -> Fraction:
    """Squared Euclidean distance between two closed boxes."""
    _check_dims(a, b)
    total = Fraction(0)
    for x0, x1, y0, y1 in zip(a.lo, a.hi, b.lo, b.hi):
        g = max(Fraction(0), y0 - x1, x0 - y1)
        total += g * g
    return total


def diameter_squared(a: Box) -> Fraction:
    return sum((s * s for s in a.sides), Fraction(0))


def congruent(a: Box, b: Box) -> bool:
    """Axis-aligned congruence: equal side multisets (rotations by 90°)."""
    return a.dim == b.dim and sorted(a.sides) == sorted(b.sides)


@dataclass(frozen=True)
class ProductPartition:
    """Per-axis breakpoints 0 = t_0 < ... < t_m = 1 tiling [0,1]^d."""

    breaks: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        axes = tuple(tuple(frac(t) for t in ax) for ax in self.breaks)
        if not 1 <= len(axes) <= 3:
            raise InvalidParameter("partition dimension must be 1, 2 or 3")
        for ax in axes:
            if len(ax) < 2 or ax[0] != 0 or ax[-1] != 1:
                raise InvalidParameter("breakpoints must start at 0 and end at 1")
            if any(a >= b for a, b in zip(ax, ax[1:])):
                raise InvalidParameter("breakpoints must be strictly increasing")
        object.__setattr__(self, "breaks", axes)

    @classmethod
    def uniform(cls, counts: Sequence[int]) -> "ProductPartition":
        return cls(tuple(tuple(Fraction(i, m) for i in range(m + 1)) for m in counts))

    @property
    def dim(self) -> int:
        return len(self.breaks)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ax) - 1 for ax in self.breaks)

    def cell(self, index: Sequence[int]) -> Box:
        return Box(tuple(ax[i] for ax, i in zip(self.breaks, index)),
                   tuple(ax[i + 1] for ax, i in zip(self.breaks, index)))

    def cells(self) -> Iterable[tuple[tuple[int, ...], Box]]:
        for idx in product(*(range(m) for m in self.shape)):
            yield idx, self.cell(idx)


@dataclass(frozen=True)
class BoxChain:
    boxes: tuple[Box, ...]

    def __post_init__(self):
        bs = tuple(self.boxes)
        if not bs:
            raise InvalidParameter("empty chain")
        for u, v in zip(bs, bs[1:]):
            if not congruent(u, v):
                raise NotCongruent("chain members must be congruent")
            if not intersects(u, v):
                raise InvalidParameter("consecutive chain members must intersect")
        object.__setattr__(self, "boxes", bs)

    def __len__(self) -> int:
        return len(self.boxes)

    def __iter__(self):
        return iter(self.boxes)


def chain_length_bound(region: Box, a: Box) -> Fraction:
    """(4 * side(region) / side(a))^d with the longest region side and shortest side of a."""
    return (4 * max(region.sides) / min(a.sides)) ** region.dim


def connect_congruent_boxes(region: Box, a: Box, b: Box) -> BoxChain:
    """Chain of translates of ``a`` reaching ``b``, each inside ``dilate(region, 4)``.

    Breadth-first search over the lattice a + side(a)·Z^d.  When ``b`` is
    not on the lattice (or is a 90° rotation of ``a``) the walk stops at the
    first lattice box touching ``b`` and ``b`` itself closes the chain.
    """
    _check_dims(region, a)
    _check_dims(region, b)
    if not congruent(a, b):
        raise NotCongruent(f"{a} and {b} are not congruent")
    if a == b:
        return BoxChain((a,))
    if intersects(a, b):
        return BoxChain((a, b))
    arena = dilate(region, 4)
    if not (arena.contains(a) and arena.contains(b)):
        raise InvalidParameter("endpoints must lie inside the enlarged region")
    step = a.sides
    d = a.dim
    start = (0,) * d
    parent: dict[tuple[int, ...], tuple[int, ...] | None] = {start: None}
    queue = deque([start])

    def box_at(key):
        return a.translate(tuple(k * s for k, s in zip(key, step)))

    end = None
    while queue:
        key = queue.popleft()
        cur = box_at(key)
        if intersects(cur, b):
            end = key
            break
        for j in range(d):
            for sgn in (1, -1):
                nk = tuple(k + (sgn if i == j else 0) for i, k in enumerate(key))
                if nk in parent:
                    continue
                if arena.contains(box_at(nk)):
                    parent[nk] = key
                    queue.append(nk)
    if end is None:
        raise InvalidParameter("no chain inside the enlarged region")
    path = []
    key = end
    while key is not None:
        path.append(box_at(key))
        key = parent[key]
    path.reverse()
    if path[-1] != b:
        path.append(b)
    return BoxChain(tuple(path))
