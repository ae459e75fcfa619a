"""Measures as cell weights on product partitions, and their diagnostics.

A :class:`GridMeasure` stores its weights as integers over one common
denominator, so every mass is an exact rational.  Box masses use prefix
sums: a box splits per axis into at most three runs (partial first cell,
full middle cells, partial last cell), giving 3^d block sums.

The sweeps (doubling, isotropy, homogeneity) refine the measure onto a
uniform grid fine enough that every box in the sweep is a union of cells.
Masses are then window sums of the prefix array.  Extremes are located in
floating point and confirmed in exact arithmetic.
"""

from __future__ import annotations

import json
import math
import random
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from itertools import permutations, product
from math import lcm, prod
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    DegenerateMass,
    DimensionMismatch,
    EnumerationBudget,
    InvalidFactorDimension,
    InvalidParameter,
    NotCongruent,
)
from .geometry import Box, ProductPartition, diameter_squared, frac, gap_squared

EXHAUSTIVE_LIMIT = 100_000
POLICIES = ("random", "max-left", "alternating")


# ---------------------------------------------------------------------------
# The measure type
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Weights ``ints / den`` on the cells of ``partition``.

    ``ints`` is an object array of Python ints (no overflow), indexed by
    cell index vectors.
    """

    partition: ProductPartition
    ints: np.ndarray
    den: int
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        ints = np.asarray(self.ints, dtype=object)
        if ints.shape != self.partition.shape:
            raise DimensionMismatch(f"weights {ints.shape} vs partition {self.partition.shape}")
        if self.den <= 0:
            raise InvalidParameter("denominator must be positive")
        if any(int(v) < 0 for v in ints.flat):
            raise InvalidParameter("weights must be non-negative")
        ints = np.vectorize(int, otypes=[object])(ints) if ints.size else ints
        object.__setattr__(self, "ints", ints)
        if sum(ints.flat) <= 0:
            raise DegenerateMass("total mass must be positive")

    @classmethod
    def from_weights(cls, partition: ProductPartition, weights, label: str = "") -> "GridMeasure":
        arr = np.asarray(weights, dtype=object)
        fr = [frac(v) for v in arr.flat]
        den = reduce(lcm, (v.denominator for v in fr), 1)
        ints = np.array([v.numerator * (den // v.denominator) for v in fr], dtype=object)
        return cls(partition, ints.reshape(arr.shape), den, label)

    @property
    def dim(self) -> int:
        return self.partition.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.partition.shape

    @property
    def total(self) -> Fraction:
        return Fraction(int(sum(self.ints.flat)), self.den)

    def weight(self, index: Sequence[int]) -> Fraction:
        return Fraction(int(self.ints[tuple(index)]), self.den)

    def weights(self) -> np.ndarray:
        """Object array of Fraction weights."""
        out = np.empty(self.shape, dtype=object)
        for idx in np.ndindex(*self.shape):
            out[idx] = Fraction(int(self.ints[idx]), self.den)
        return out

    @property
    def prefix(self) -> np.ndarray:
        if "prefix" not in self._cache:
            self._cache["prefix"] = _prefix(self.ints)
        return self._cache["prefix"]

    def normalized(self) -> "GridMeasure":
        t = int(sum(self.ints.flat))
        return GridMeasure(self.partition, self.ints.copy(), t, self.label)

    def to_dict(self) -> dict:
        w = np.vectorize(lambda v: str(Fraction(int(v), self.den)), otypes=[object])(self.ints)
        return {"kind": "grid_measure", "label": self.label,
                "breaks": [[str(t) for t in ax] for ax in self.partition.breaks],
                "weights": w.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def measure_from_dict(data: dict) -> GridMeasure:
    allowed = {"kind", "label", "breaks", "weights"}
    unknown = set(data) - allowed
    if unknown:
        raise InvalidParameter(f"unknown measure fields: {sorted(unknown)}")
    part = ProductPartition(tuple(tuple(ax) for ax in data["breaks"]))
    arr = np.empty(part.shape, dtype=object)
    flat = np.array(data["weights"], dtype=object).reshape(part.shape)
    for idx in np.ndindex(*part.shape):
        arr[idx] = frac(flat[idx])
    return GridMeasure.from_weights(part, arr, data.get("label", ""))


def measure_from_json(text: str) -> GridMeasure:
    return measure_from_dict(json.loads(text))


def _prefix(ints: np.ndarray) -> np.ndarray:
    p = np.zeros(tuple(m + 1 for m in ints.shape), dtype=object)
    acc = ints
    for k in range(ints.ndim):
        acc = np.cumsum(acc, axis=k)
    p[tuple(slice(1, None) for _ in range(ints.ndim))] = acc
    return p


def _box_sums(P: np.ndarray, los: Sequence[np.ndarray], his: Sequence[np.ndarray]) -> np.ndarray:
    """Cell sums over the outer product of index ranges [lo_k, hi_k) per axis."""
    d = P.ndim
    out = None
    for corner in product((0, 1), repeat=d):
        idx = np.ix_(*[(his[k] if c else los[k]) for k, c in enumerate(corner)])
        term = P[idx]
        if (d - sum(corner)) % 2:
            term = -term
        out = term if out is None else out + term
    return out


def _window_sums(P: np.ndarray, size: Sequence[int]) -> np.ndarray:
    """Sums of every window of ``size`` cells, indexed by lower corner."""
    los = [np.arange(P.shape[k] - size[k]) for k in range(P.ndim)]
    his = [lo + size[k] for k, lo in enumerate(los)]
    return _box_sums(P, los, his)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def lebesgue(d: int, counts: Sequence[int] | None = None) -> GridMeasure:
    counts = tuple(counts) if counts is not None else (1,) * d
    if len(counts) != d:
        raise DimensionMismatch("one count per axis")
    part = ProductPartition.uniform(counts)
    return GridMeasure(part, np.ones(counts, dtype=object), prod(counts), "lebesgue")


def from_1d_weights(weights: Sequence) -> GridMeasure:
    """Uniform 1D partition carrying the given weights."""
    return GridMeasure.from_weights(ProductPartition.uniform([len(weights)]), list(weights))


@dataclass(frozen=True)
class SplitParams:
    tau: Fraction
    depth: int
    seed: int = 0
    policy: str = "random"
    levels: int = 8

    def __post_init__(self):
        object.__setattr__(self, "tau", frac(self.tau))
        if self.tau < 1:
            raise InvalidParameter("tau must be >= 1")
        if self.depth < 0:
            raise InvalidParameter("depth must be >= 0")
        if self.policy not in POLICIES:
            raise InvalidParameter(f"policy must be one of {POLICIES}")
        if self.levels < 1:
            raise InvalidParameter("need at least one split fraction level")


def _split_fraction(p: SplitParams, rng: random.Random, level: int) -> Fraction:
    lo, hi = 1 / (1 + p.tau), p.tau / (1 + p.tau)
    if p.policy == "max-left":
        return hi
    if p.policy == "alternating":
        return hi if level % 2 == 0 else lo
    return lo + (hi - lo) * Fraction(rng.randint(0, p.levels), p.levels)


def lipschitz_envelope(weights: Sequence[Fraction], tau: Fraction) -> list[Fraction]:
    """Smallest w' >= w with w'_i <= tau * w'_{i+1} and w'_{i+1} <= tau * w'_i.

    Equals max_j w_j tau^{-|i-j|}, computed with one forward and one
    backward pass.
    """
    out = list(weights)
    for i in range(1, len(out)):
        out[i] = max(out[i], out[i - 1] / tau)
    for i in range(len(out) - 2, -1, -1):
        out[i] = max(out[i], out[i + 1] / tau)
    return out


def gen_split_measure_1d(params: SplitParams) -> GridMeasure:
    """Dyadic multiplicative cascade with child fractions in [1/(1+τ), τ/(1+τ)].

    After the cascade, neighbouring cells are rebalanced to ratio <= τ by
    raising each weight to the envelope max_j w_j τ^{-|i-j|}, then the
    weights are renormalised.
    """
    rng = random.Random(params.seed)
    w = [Fraction(1)]
    for level in range(params.depth):
        nxt = []
        for x in w:
            t = _split_fraction(params, rng, level)
            nxt.extend((x * t, x * (1 - t)))
        w = nxt
    w = lipschitz_envelope(w, params.tau)
    s = sum(w)
    w = [x / s for x in w]
    label = f"split(tau={params.tau},depth={params.depth},seed={params.seed},{params.policy})"
    return GridMeasure.from_weights(ProductPartition.uniform([len(w)]), w, label)


def product_measure(factors: Sequence[GridMeasure]) -> GridMeasure:
    factors = list(factors)
    if not 1 <= len(factors) <= 3:
        raise InvalidFactorDimension("need one to three factors")
    for f in factors:
        if f.dim != 1:
            raise InvalidFactorDimension("product factors must be one-dimensional")
    ints = factors[0].ints
    for f in factors[1:]:
        ints = np.multiply.outer(ints, f.ints)
    part = ProductPartition(tuple(f.partition.breaks[0] for f in factors))
    den = prod(f.den for f in factors)
    label = " x ".join(f.label or "?" for f in factors)
    return GridMeasure(part, ints, den, label)


def marginal(mu: GridMeasure, axis: int) -> GridMeasure:
    """Pushforward onto one coordinate axis."""
    other = tuple(k for k in range(mu.dim) if k != axis)
    ints = mu.ints.sum(axis=other) if other else mu.ints
    return GridMeasure(ProductPartition((mu.partition.breaks[axis],)), np.asarray(ints, dtype=object),
                       mu.den, mu.label)


# ---------------------------------------------------------------------------
# Exact masses
# ---------------------------------------------------------------------------


def _axis_runs(breaks: tuple[Fraction, ...], lo: Fraction, hi: Fraction):
    """[(first cell, end cell, coverage fraction)] for [lo, hi] along one axis."""
    i0 = bisect_right(breaks, lo) - 1
    i1 = bisect_left(breaks, hi) - 1
    m = len(breaks) - 1
    i0, i1 = min(max(i0, 0), m - 1), min(max(i1, 0), m - 1)

    def width(i):
        return breaks[i + 1] - breaks[i]

    if i0 == i1:
        return [(i0, i0 + 1, (hi - lo) / width(i0))]
    runs = [(i0, i0 + 1, (breaks[i0 + 1] - lo) / width(i0))]
    if i1 > i0 + 1:
        runs.append((i0 + 1, i1, Fraction(1)))
    runs.append((i1, i1 + 1, (hi - breaks[i1]) / width(i1)))
    return runs


def mass(mu: GridMeasure, box: Box) -> Fraction:
    """Exact mass of ``box`` (clipped to the unit cube)."""
    if box.dim != mu.dim:
        raise DimensionMismatch(f"box dimension {box.dim} vs measure dimension {mu.dim}")
    lo = [max(Fraction(0), x) for x in box.lo]
    hi = [min(Fraction(1), x) for x in box.hi]
    if any(a >= b for a, b in zip(lo, hi)):
        return Fraction(0)
    runs = [_axis_runs(ax, a, b) for ax, a, b in zip(mu.partition.breaks, lo, hi)]
    P = mu.prefix
    total = Fraction(0)
    for combo in product(*runs):
        coef = prod((c[2] for c in combo), start=Fraction(1))
        s = _box_sums(P, [np.array([c[0]]) for c in combo], [np.array([c[1]]) for c in combo])
        total += coef * int(s.flat[0])
    return total / mu.den


# ---------------------------------------------------------------------------
# Uniform refinements
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UniformView:
    """The measure on a uniform grid with ``counts[k]`` cells per axis."""

    counts: tuple[int, ...]
    ints: np.ndarray
    den: int
    prefix: np.ndarray

    def cells(self, length: Fraction, axis: int) -> int:
        c = length * self.counts[axis]
        if c.denominator != 1:
            raise InvalidParameter(f"{length} is not a multiple of the grid step")
        return int(c)


def uniform_view(mu: GridMeasure, steps: Iterable[Fraction] = ()) -> UniformView:
    """Refine ``mu`` so every breakpoint and every length in ``steps`` is on the grid."""
    steps = [frac(s) for s in steps]
    counts = []
    for ax in mu.partition.breaks:
        m = reduce(lcm, (t.denominator for t in ax), 1)
        m = reduce(lcm, (s.denominator for s in steps), m)
        counts.append(m)
    key = ("view", tuple(counts))
    if key in mu._cache:
        return mu._cache[key]
    arr, den = mu.ints, mu.den
    for k, (ax, m) in enumerate(zip(mu.partition.breaks, counts)):
        reps = [int((b - a) * m) for a, b in zip(ax, ax[1:])]
        L = reduce(lcm, reps, 1)
        shape = [1] * arr.ndim
        shape[k] = -1
        arr = arr * np.array([L // c for c in reps], dtype=object).reshape(shape)
        arr = np.repeat(arr, reps, axis=k)
        den *= L
    view = UniformView(tuple(counts), arr, den, _prefix(arr))
    mu._cache[key] = view
    return view


def _to_float(ints: np.ndarray, den: int) -> np.ndarray:
    return np.asarray(ints / den, dtype=float) if ints.size else np.zeros(ints.shape)


def _exact_max_ratio(num: np.ndarray, den: np.ndarray, cap: int = 512) -> tuple[Fraction, tuple]:
    """max num/den over equal-shaped int arrays; den must be positive.

    int/int true division is correctly rounded, so float order agrees with
    exact order except within a tie of one float; ties are compared exactly.
    """
    f = np.asarray(num / den, dtype=float)
    top = f.max()
    cand = np.argwhere(f == top)[:cap]
    best = None
    for idx in map(tuple, cand):
        r = Fraction(int(num[idx]), int(den[idx]))
        if best is None or r > best[0]:
            best = (r, idx)
    return best


def _exact_min_ratio(num: np.ndarray, den: np.ndarray, cap: int = 512) -> tuple[Fraction, tuple]:
    r, idx = _exact_max_ratio(den, num, cap)
    return 1 / r, idx


def _require_positive(arr: np.ndarray, what: str) -> None:
    if arr.size and min(arr.flat) <= 0:
        raise DegenerateMass(f"some {what} carries zero mass")


# ---------------------------------------------------------------------------
# Doubling
# ---------------------------------------------------------------------------


def doubling_constant(mu: GridMeasure, r) -> Fraction:
    """max over aligned cubes Q of side r of μ(2Q ∩ [0,1]^d) / μ(Q).

    Positions run over every lower corner on the refined grid (all
    breakpoints and multiples of r/2).
    """
    r = frac(r)
    if not 0 < r <= 1:
        raise InvalidParameter("scale must lie in (0, 1]")
    v = uniform_view(mu, [r / 2])
    size = [v.cells(r, k) for k in range(mu.dim)]
    half = [s // 2 for s in size]
    small = _window_sums(v.prefix, size)
    _require_positive(small, f"cube of side {r}")
    los = [np.clip(np.arange(m - s + 1) - h, 0, m) for m, s, h in zip(v.counts, size, half)]
    his = [np.clip(np.arange(m - s + 1) + s + h, 0, m) for m, s, h in zip(v.counts, size, half)]
    big = _box_sums(v.prefix, los, his)
    return _exact_max_ratio(big, small)[0]


@dataclass(frozen=True)
class DoublingProfile:
    constants: dict
    C: Fraction
    alpha: float | Fraction | None
    beta: float | Fraction | None
    beta_cert: float
    residual: float
    octaves: int
    upper: tuple = ()
    lower: tuple = ()

    @property
    def converged(self) -> bool:
        return self.alpha is not None and self.beta is not None and 0 < self.alpha <= self.beta


def _snap(x: float, tol: float = 1e-9):
    f = Fraction(x).limit_denominator(64)
    return f if abs(float(f) - x) < tol else x


def _slope(xs, ys) -> tuple[float, float]:
    (m, b), res = np.polyfit(xs, ys, 1, full=True)[:2]
    return float(m), float(res[0]) if len(res) else 0.0


def dyadic_masses(mu: GridMeasure, level: int) -> list[np.ndarray]:
    """Exact int masses of the dyadic cubes of levels 0..level (over a shared denominator)."""
    v = uniform_view(mu, [Fraction(1, 2 ** level)])
    arr = v.ints
    for k, m in enumerate(v.counts):
        f = m // 2 ** level
        if f > 1:
            arr = np.add.reduceat(arr, np.arange(0, m, f), axis=k)
    out = [arr]
    for _ in range(level):
        a = out[-1]
        for k in range(mu.dim):
            a = a[tuple(slice(0, None, 2) if j == k else slice(None) for j in range(mu.dim))] + \
                a[tuple(slice(1, None, 2) if j == k else slice(None) for j in range(mu.dim))]
        out.append(a)
    out.reverse()
    return out, v.den


def nested_ratio_extremes(mu: GridMeasure, level: int) -> dict:
    """k -> (max, min) of μ(Q1)/μ(Q2) over dyadic Q1 ⊂ Q2 with side ratio 2^-k."""
    masses, _ = dyadic_masses(mu, level)
    for a in masses:
        _require_positive(a, "dyadic cube")
    out = {}
    for k in range(1, level + 1):
        hi = lo = None
        for i in range(0, level - k + 1):
            child = masses[i + k]
            parent = masses[i]
            for ax in range(mu.dim):
                parent = np.repeat(parent, 2 ** k, axis=ax)
            mx = _exact_max_ratio(child, parent)[0]
            mn = _exact_min_ratio(child, parent)[0]
            hi = mx if hi is None else max(hi, mx)
            lo = mn if lo is None else min(lo, mn)
        out[k] = (hi, lo)
    return out


def empirical_exponents(mu: GridMeasure, level: int | None = None) -> DoublingProfile:
    """Fit the nested-cube envelopes and record the certified exponent.

    Upper envelope: log max ratio against log side ratio gives α; the lower
    envelope gives β.  β_cert = log2(C^2) with C the largest doubling
    constant over the dyadic scales 2^-1..2^-(level-1).
    """
    if level is None:
        level = 6 if mu.dim <= 2 else 4
    if level < 3:
        raise InvalidParameter("need at least three octaves")
    ext = nested_ratio_extremes(mu, level)
    ks = sorted(ext)
    xs = [-k * math.log(2) for k in ks]
    up = [math.log(ext[k][0]) for k in ks]
    dn = [math.log(ext[k][1]) for k in ks]
    a, ra = _slope(xs, up)
    b, rb = _slope(xs, dn)
    consts = {Fraction(1, 2 ** i): doubling_constant(mu, Fraction(1, 2 ** i)) for i in range(1, level)}
    C = max(consts.values())
    alpha, beta = _snap(a), _snap(b)
    return DoublingProfile(consts, C, alpha, beta, 2 * math.log2(C), max(ra, rb), level,
                           tuple(ext[k][0] for k in ks), tuple(ext[k][1] for k in ks))


# ---------------------------------------------------------------------------
# Isotropy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsotropyProfile:
    A: Fraction
    shapes: tuple
    pairs: int
    exhaustive: bool
    witness: tuple | None = None


def _window_max(arr: np.ndarray, lo: Sequence[int], hi: Sequence[int], out_shape) -> np.ndarray:
    """out[P] = max arr[P + o] over lo <= o <= hi (zero outside ``arr``)."""
    res = arr
    for k in range(arr.ndim):
        n_out = out_shape[k]
        padl = max(0, -lo[k])
        need = (n_out - 1) + hi[k] + padl + 1
        padr = max(0, need - (res.shape[k] + padl))
        pad = [(0, 0)] * arr.ndim
        pad[k] = (padl, padr)
        padded = np.pad(res, pad)
        win = sliding_window_view(padded, hi[k] - lo[k] + 1, axis=k)
        start = lo[k] + padl
        sl = [slice(None)] * arr.ndim
        sl[k] = slice(start, start + n_out)
        res = win[tuple(sl)].max(axis=-1)
    return res


def _shape_set(sides: Sequence[Fraction], rotations: bool) -> list[tuple[Fraction, ...]]:
    if not rotations:
        return [tuple(sides)]
    return sorted(set(permutations(sides)))


def isotropy_constant(mu: GridMeasure, sides: Sequence, samples: int | None = None,
                      seed: int = 0, rotations: bool = True) -> IsotropyProfile:
    """Largest mass ratio over intersecting congruent boxes of the given shape.

    Congruent means equal up to a permutation of the axes when
    ``rotations`` is set, and translates only otherwise.  Every position on
    the refined grid is used when the position count is at most 10^5;
    otherwise ``samples`` random intersecting pairs are drawn.
    """
    sides = tuple(frac(s) for s in sides)
    if len(sides) != mu.dim:
        raise DimensionMismatch("shape dimension differs from the measure")
    if any(not 0 < s <= 1 for s in sides):
        raise InvalidParameter("shape must fit in the unit cube")
    shapes = _shape_set(sides, rotations)
    v = uniform_view(mu, sides)
    sizes = [tuple(v.cells(s, k) for k, s in enumerate(sh)) for sh in shapes]
    npos = sum(prod(m - c + 1 for m, c in zip(v.counts, sz)) for sz in sizes)
    if npos <= EXHAUSTIVE_LIMIT and samples is None:
        return _isotropy_exhaustive(v, shapes, sizes)
    return _isotropy_sampled(mu, shapes, samples or 10_000, seed)


def _isotropy_exhaustive(v: UniformView, shapes, sizes) -> IsotropyProfile:
    M = [_window_sums(v.prefix, sz) for sz in sizes]
    for a in M:
        _require_positive(a, "box")
    F = [_to_float(a, v.den) for a in M]
    best, witness, pairs = Fraction(1), None, 0
    for (s, ms, fs, zs), (t, mt, ft, zt) in product(zip(shapes, M, F, sizes), repeat=2):
        lo = [-c for c in zt]
        hi = list(zs)
        wmax = _window_max(ft, lo, hi, fs.shape)
        ratio = wmax / fs
        top = ratio.max()
        pairs += ms.size
        if top < float(best) * (1 - 1e-12):
            continue
        for P in map(tuple, np.argwhere(ratio >= top * (1 - 1e-12))[:256]):
            sl = tuple(slice(max(0, p + a), min(n, p + b + 1)) for p, a, b, n in zip(P, lo, hi, mt.shape))
            block = mt[sl]
            q = max(block.flat)
            r = Fraction(int(q), int(ms[P]))
            if r > best:
                best, witness = r, (s, P, t)
    return IsotropyProfile(best, tuple(shapes), pairs, True, witness)


def _isotropy_sampled(mu: GridMeasure, shapes, samples: int, seed: int) -> IsotropyProfile:
    rng = random.Random(seed)
    best, witness = Fraction(1), None
    for _ in range(samples):
        s = rng.choice(shapes)
        t = rng.choice(shapes)
        lo = tuple(Fraction(rng.randint(0, 10 ** 6), 10 ** 6) * (1 - a) for a in s)
        A = Box(lo, tuple(x + a for x, a in zip(lo, s)))
        lo2 = []
        for x, a, b in zip(lo, s, t):
            low, high = max(Fraction(0), x - b), min(1 - b, x + a)
            lo2.append(low + (high - low) * Fraction(rng.randint(0, 10 ** 6), 10 ** 6))
        B = Box(tuple(lo2), tuple(x + b for x, b in zip(lo2, t)))
        ma, mb = mass(mu, A), mass(mu, B)
        if ma == 0 or mb == 0:
            raise DegenerateMass("sampled box carries zero mass")
        r = max(ma / mb, mb / ma)
        if r > best:
            best, witness = r, (A, B)
    return IsotropyProfile(best, tuple(shapes), samples, False, witness)


def global_isotropy_constant(mu: GridMeasure, level: int, rotations: bool = True) -> IsotropyProfile:
    """Isotropy constant over every box shape with sides in 2^-level Z."""
    m = 2 ** level
    best = None
    seen = set()
    for cells in product(range(1, m + 1), repeat=mu.dim):
        key = tuple(sorted(cells)) if rotations else cells
        if key in seen:
            continue
        seen.add(key)
        prof = isotropy_constant(mu, [Fraction(c, m) for c in key], rotations=rotations)
        if best is None or prof.A > best.A:
            best = prof
    return IsotropyProfile(best.A, tuple(sorted(seen)), best.pairs, True, best.witness)


@dataclass(frozen=True)
class ChainVerdict:
    m: int
    ratio: Fraction
    passed: bool


def chain_index(r1: Box, r2: Box) -> int:
    """m = floor(dist(R1,R2) / diam R1) + 1, computed exactly."""
    q = gap_squared(r1, r2) / diameter_squared(r1)
    return math.isqrt(q.numerator // q.denominator) + 1


def chain_ratio_bound(mu: GridMeasure, r1: Box, r2: Box, A) -> ChainVerdict:
    A = frac(A)
    if sorted(r1.sides) != sorted(r2.sides):
        raise NotCongruent("boxes are not congruent")
    m1, m2 = mass(mu, r1), mass(mu, r2)
    if m1 == 0 or m2 == 0:
        raise DegenerateMass("box with zero mass")
    m = chain_index(r1, r2)
    ratio = m1 / m2
    bound = A ** m
    return ChainVerdict(m, ratio, 1 / bound <= ratio <= bound)


@dataclass(frozen=True)
class ChainSweep:
    shapes: int
    pairs: int
    failures: tuple


def chain_sweep(mu: GridMeasure, level: int, A) -> ChainSweep:
    """Check A^-m <= μ(R1)/μ(R2) <= A^m for every pair of translates on the 2^-level grid.

    For each shape the largest ratio over pairs whose index is at most m is
    compared with A^m for m = 1, 2, ...; a failure at some m is a failure
    of a pair with index exactly its own m or smaller, so this is
    equivalent to checking every pair.  The loop stops once A^m exceeds
    the global max/min ratio of the shape.
    """
    A = frac(A)
    n = 2 ** level
    v = uniform_view(mu, [Fraction(1, n)])
    pairs, failures, shapes = 0, [], 0
    for cells in product(range(1, n + 1), repeat=mu.dim):
        shapes += 1
        size = [v.cells(Fraction(c, n), k) for k, c in enumerate(cells)]
        M = _window_sums(v.prefix, size)
        _require_positive(M, "box")
        npos = M.size
        pairs += npos * npos
        F = _to_float(M, v.den)
        spread = Fraction(int(max(M.flat)), int(min(M.flat)))
        diam2 = sum(c * c for c in size)
        m = 1
        while A ** m < spread:
            reach = [c + int(math.isqrt(m * m * diam2)) + 1 for c in size]
            foot = _chain_footprint(size, diam2, m, reach)
            wmax = _footprint_max(F, foot, reach)
            ratio = wmax / F
            bound = A ** m
            if ratio.max() > float(bound) * (1 - 1e-12):
                for P in map(tuple, np.argwhere(ratio > float(bound) * (1 - 1e-12))):
                    bad = _exact_chain_check(M, P, foot, reach, bound)
                    if bad is not None:
                        failures.append((tuple(cells), P, bad, m))
            m += 1
    return ChainSweep(shapes, pairs, tuple(failures))


def _chain_footprint(size, diam2, m, reach) -> np.ndarray:
    """Displacements D (in cells) with index(D) <= m, i.e. gap(D)^2 < m^2 diam^2."""
    grids = np.meshgrid(*[np.arange(-r, r + 1) for r in reach], indexing="ij")
    gap2 = sum(np.maximum(0, np.abs(g) - c) ** 2 for g, c in zip(grids, size))
    return gap2 < m * m * diam2


def _footprint_max(F: np.ndarray, foot: np.ndarray, reach) -> np.ndarray:
    from scipy.ndimage import maximum_filter

    return maximum_filter(F, footprint=foot, mode="constant", cval=0.0)


def _exact_chain_check(M, P, foot, reach, bound):
    offs = np.argwhere(foot) - np.array(reach)
    for off in offs:
        Q = tuple(int(p + o) for p, o in zip(P, off))
        if all(0 <= q < n for q, n in zip(Q, M.shape)):
            r = Fraction(int(M[Q]), int(M[P]))
            if r > bound:
                return Q, r
    return None


# ---------------------------------------------------------------------------
# Projections and slabs
# ---------------------------------------------------------------------------


def face_projection_ratio(mu: GridMeasure, axis: int = -1) -> tuple[Fraction, Fraction]:
    """Extremes of the projected density against the uniform density on the face."""
    if mu.dim < 2:
        raise InvalidParameter("projection needs d >= 2")
    axis %= mu.dim
    proj = mu.ints.sum(axis=axis)
    total = mu.total
    face_axes = [ax for k, ax in enumerate(mu.partition.breaks) if k != axis]
    vals = []
    for idx in np.ndindex(*proj.shape):
        vol = prod((ax[i + 1] - ax[i] for ax, i in zip(face_axes, idx)), start=Fraction(1))
        vals.append(Fraction(int(proj[idx]), mu.den) / total / vol)
    return min(vals), max(vals)


@dataclass(frozen=True)
class SlabStats:
    upper: Fraction | float
    lower: Fraction | float
    alpha: Fraction | float
    beta: Fraction | float
    count: int


def _scaled_power(x: Fraction, e) -> Fraction | float:
    if isinstance(e, int) or (isinstance(e, Fraction) and e.denominator == 1):
        return x ** int(e)
    return float(x) ** float(e)


def slab_ratio_stats(mu: GridMeasure, alpha=None, beta=None, level: int | None = None) -> SlabStats:
    """Envelope constants of μ(I × J) against |I|^(d-1) |J|^α and |I|^(d-1) |J|^β.

    I runs over the dyadic cubes of levels 0..level in the first d-1
    coordinates and J over every interval of the level grid on the last
    axis.  Exponents default to the fit of the last marginal.
    """
    if mu.dim < 2:
        raise InvalidParameter("slabs need d >= 2")
    if level is None:
        level = 6 if mu.dim == 2 else 4
    if alpha is None or beta is None:
        prof = empirical_exponents(marginal(mu, mu.dim - 1), max(3, level))
        alpha = prof.alpha if alpha is None else alpha
        beta = prof.beta if beta is None else beta
    masses, den = dyadic_masses(mu, level)
    n = 2 ** level
    fine = masses[-1]
    best_hi = best_lo = None
    count = 0
    for i in range(level + 1):
        f = 2 ** (level - i)
        arr = fine
        for k in range(mu.dim - 1):
            arr = np.add.reduceat(arr, np.arange(0, n, f), axis=k)
        cols = arr.reshape(-1, n)
        cum = np.zeros((cols.shape[0], n + 1), dtype=object)
        cum[:, 1:] = np.cumsum(cols, axis=1)
        side = Fraction(1, 2 ** i) ** (mu.dim - 1)
        for a in range(n):
            for b in range(a + 1, n + 1):
                J = Fraction(b - a, n)
                seg = cum[:, b] - cum[:, a]
                count += len(seg)
                lo_m, hi_m = min(seg), max(seg)
                if lo_m <= 0:
                    raise DegenerateMass("slab with zero mass")
                up = Fraction(int(hi_m), den) / side
                dn = Fraction(int(lo_m), den) / side
                up = up / _scaled_power(J, alpha) if isinstance(_scaled_power(J, alpha), Fraction) \
                    else float(up) / _scaled_power(J, alpha)
                dn = dn / _scaled_power(J, beta) if isinstance(_scaled_power(J, beta), Fraction) \
                    else float(dn) / _scaled_power(J, beta)
                best_hi = up if best_hi is None else max(best_hi, up)
                best_lo = dn if best_lo is None else min(best_lo, dn)
    return SlabStats(best_hi, best_lo, alpha, beta, count)


# ---------------------------------------------------------------------------
# Graph covers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear f on [0,1] through the given (x, y) knots."""

    knots: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        ks = tuple((frac(x), frac(y)) for x, y in self.knots)
        if len(ks) < 2 or ks[0][0] != 0 or ks[-1][0] != 1:
            raise InvalidParameter("knots must span [0,1]")
        if any(a[0] >= b[0] for a, b in zip(ks, ks[1:])):
            raise InvalidParameter("knot abscissae must increase")
        if any(not 0 <= y <= 1 for _, y in ks):
            raise InvalidParameter("values must lie in [0,1]")
        object.__setattr__(self, "knots", ks)

    @property
    def dim(self) -> int:
        return 1

    def __call__(self, x: Fraction) -> Fraction:
        x = frac(x)
        for (x0, y0), (x1, y1) in zip(self.knots, self.knots[1:]):
            if x0 <= x <= x1:
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        raise InvalidParameter("x outside [0,1]")

    def range_on(self, box: Box) -> tuple[Fraction, Fraction]:
        a, b = box.lo[0], box.hi[0]
        vals = [self(a), self(b)] + [y for x, y in self.knots if a < x < b]
        return min(vals), max(vals)


@dataclass(frozen=True)
class AffineFunction:
    """f(x) = c + Σ g_k x_k on [0,1]^d."""

    const: Fraction
    grad: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "const", frac(self.const))
        object.__setattr__(self, "grad", tuple(frac(g) for g in self.grad))

    @property
    def dim(self) -> int:
        return len(self.grad)

    def range_on(self, box: Box) -> tuple[Fraction, Fraction]:
        lo = self.const + sum(min(g * a, g * b) for g, a, b in zip(self.grad, box.lo, box.hi))
        hi = self.const + sum(max(g * a, g * b) for g, a, b in zip(self.grad, box.lo, box.hi))
        return lo, hi


def graph_cover(f, n: int, budget: int = 5_000_000) -> list[Box]:
    """Columns I x I' with I dyadic of level n and I' the smallest dyadic run holding f(I)."""
    d = f.dim
    m = 2 ** n
    if m ** d > budget:
        raise EnumerationBudget(f"graph cover has {m ** d} columns", count=m ** d)
    out = []
    for idx in product(range(m), repeat=d):
        I = Box(tuple(Fraction(i, m) for i in idx), tuple(Fraction(i + 1, m) for i in idx))
        lo, hi = f.range_on(I)
        a = min(math.floor(lo * m), m - 1)
        b = min(math.floor(hi * m), m - 1)
        out.append(Box(I.lo + (Fraction(a, m),), I.hi + (Fraction(b + 1, m),)))
    return out


def graph_cover_mass(mu: GridMeasure, f, n: int, budget: int = 5_000_000) -> Fraction:
    if mu.dim != f.dim + 1:
        raise DimensionMismatch("measure must live on [0,1]^(d+1)")
    return sum((mass(mu, b) for b in graph_cover(f, n, budget)), Fraction(0))


# ---------------------------------------------------------------------------
# Homogeneity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HomogeneityProfile:
    s: Fraction
    C: Fraction | float
    per_scale: dict


def homogeneity_constant(mu: GridMeasure, s, scales: Iterable | None = None,
                         lambdas: Sequence[int] = (2, 4, 8)) -> HomogeneityProfile:
    """max μ(Q_{λr} ∩ [0,1]^d) / (λ^s μ(Q_r)) over concentric aligned cubes."""
    s = frac(s) if not isinstance(s, float) else s
    if s <= 0:
        raise InvalidParameter("s must be positive")
    scales = sorted((frac(r) for r in (scales or [Fraction(1, 8), Fraction(1, 16)])), reverse=True)
    best, per = None, {}
    for r in scales:
        v = uniform_view(mu, [r / 2])
        size = [v.cells(r, k) for k in range(mu.dim)]
        small = _window_sums(v.prefix, size)
        _require_positive(small, f"cube of side {r}")
        top = None
        for lam in lambdas:
            ext = [(lam - 1) * c // 2 for c in size]
            los = [np.clip(np.arange(m - c + 1) - e, 0, m) for m, c, e in zip(v.counts, size, ext)]
            his = [np.clip(np.arange(m - c + 1) + c + e, 0, m) for m, c, e in zip(v.counts, size, ext)]
            big = _box_sums(v.prefix, los, his)
            ratio, _ = _exact_max_ratio(big, small)
            scale = _scaled_power(Fraction(lam), s)
            val = ratio / scale if isinstance(scale, Fraction) else float(ratio) / scale
            top = val if top is None else max(top, val)
        per[r] = top
        best = top if best is None else max(best, top)
    return HomogeneityProfile(s, best, per)
