"""Adversarial ratio programs: the heaviest E_n under a neighbour ratio bound.

Variables are the weights of every cell of the full level-n grid, the
objective is the total weight on E_n, and each pair of face-adjacent cells
satisfies w_i <= τ w_j in both directions.

Every weight of a feasible point is positive, so a vertex has a spanning
tree of tight constraints and its weights are τ^k_i / Σ τ^k with integer,
1-Lipschitz k.  ``solve_exact`` pivots over such trees in exact integer
arithmetic and stops when every tree dual is nonnegative, which certifies
the optimum.  1D grids use a Dinkelbach iteration over a dynamic program
instead.  A dense rational simplex and vertex enumeration are the oracles.
"""

from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import EnumerationBudget, InvalidParameter, NonConvergence
from .geometry import frac
from .systems import DEFAULT_BUDGET, GridSpec, LevelSet, level_set

EXACT_BUDGET = 5000
DECAY_EXACT_LIMIT = 1000


@dataclass(frozen=True, eq=False)
class RatioProgram:
    n: int
    shape: tuple[int, ...]
    target: tuple[int, ...]
    tau: Fraction
    constraints: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def objective(self) -> np.ndarray:
        c = np.zeros(self.size)
        c[list(self.target)] = 1.0
        return c


def grid_edges(shape: Sequence[int]) -> list[tuple[int, int]]:
    """Unordered face-adjacent pairs (flat indices, C order)."""
    idx = np.arange(math.prod(shape)).reshape(shape)
    out = []
    for k in range(len(shape)):
        a = np.moveaxis(idx, k, 0)
        out.extend(zip(a[:-1].ravel().tolist(), a[1:].ravel().tolist()))
    return out


def make_program(shape: Sequence[int], target: Sequence[int], tau, n: int = 0) -> RatioProgram:
    tau = frac(tau)
    if tau < 1:
        raise InvalidParameter("tau must be >= 1")
    shape = tuple(shape)
    size = math.prod(shape)
    target = tuple(sorted(set(target)))
    if any(not 0 <= t < size for t in target):
        raise InvalidParameter("target cell outside the grid")
    cons = []
    for i, j in grid_edges(shape):
        cons.append((i, j))
        cons.append((j, i))
    return RatioProgram(n, shape, target, tau, tuple(cons))


def build_program(levelset: LevelSet, tau, budget: int = DEFAULT_BUDGET) -> RatioProgram:
    spec = levelset.spec
    shape = tuple(m ** levelset.n for m in spec.grid_shape)
    if math.prod(shape) > budget:
        raise EnumerationBudget(f"grid has {math.prod(shape)} cells", count=math.prod(shape))
    target = [int(np.ravel_multi_index(ix, shape)) for ix in levelset.grid_indices()]
    return make_program(shape, target, tau, levelset.n)


def constraint_count(shape: Sequence[int]) -> int:
    """2 Σ_k (m_k - 1) Π_{j≠k} m_j."""
    return 2 * sum((m - 1) * math.prod(shape) // m for m in shape)


@dataclass(frozen=True, eq=False)
class AdversarySolution:
    value: Fraction | float
    weights: tuple
    kind: str
    iterations: int
    residual: float
    exponents: tuple[int, ...] | None = None
    certified: bool = False
    gap_estimate: float | None = None
    converged: bool = True
    notes: tuple[str, ...] = field(default=())


def weights_from_exponents(k: Sequence[int], tau: Fraction) -> list[Fraction]:
    k = [int(x) for x in k]
    m = min(k)
    w = [tau ** (x - m) for x in k]
    s = sum(w)
    return [x / s for x in w]


def check_feasible(program: RatioProgram, weights: Sequence) -> float:
    """Largest violation max(w_i - τ w_j, 0) plus |Σw - 1| (0 means feasible)."""
    exact = all(isinstance(x, (Fraction, int)) for x in weights)
    tau = program.tau if exact else float(program.tau)
    worst = abs(sum(weights) - 1)
    for i, j in program.constraints:
        worst = max(worst, weights[i] - tau * weights[j])
    if any(x < 0 for x in weights):
        worst = max(worst, -min(weights))
    return float(worst)


def _lipschitz_ok(program: RatioProgram, k: Sequence[int]) -> bool:
    return all(abs(k[i] - k[j]) <= 1 for i, j in program.constraints)


# ---------------------------------------------------------------------------
# Exact solver
# ---------------------------------------------------------------------------


def _exact_value(program: RatioProgram, k: Sequence[int]) -> Fraction:
    """Σ_T τ^k / Σ τ^k with integer arithmetic."""
    a, b = program.tau.numerator, program.tau.denominator
    lo, hi = min(k), max(k)
    K = hi - lo
    terms = [a ** (x - lo) * b ** (K - x + lo) for x in k]
    return Fraction(sum(terms[t] for t in program.target), sum(terms))


class _TreeBasis:
    """Spanning tree of tight ratio constraints: a vertex of the program.

    Constraint 2m is (i, j) and 2m+1 its reverse, so e ^ 1 flips a pair.
    """

    def __init__(self, program: RatioProgram, k: Sequence[int]):
        self.p = program
        self.k = [int(x) for x in k]
        self.N = program.size
        self.nbr: list[list[tuple[int, int]]] = [[] for _ in range(self.N)]
        for e, (i, j) in enumerate(program.constraints):
            self.nbr[i].append((j, e))
        self.tree: set[int] = set()
        self.tadj: list[set[int]] = [set() for _ in range(self.N)]

    def _tight(self, e: int) -> bool:
        i, j = self.p.constraints[e]
        return self.k[i] == self.k[j] + 1

    def _add(self, e: int) -> None:
        i, j = self.p.constraints[e]
        self.tree.add(e)
        self.tadj[i].add(e)
        self.tadj[j].add(e)

    def _drop(self, e: int) -> None:
        i, j = self.p.constraints[e]
        self.tree.discard(e)
        self.tadj[i].discard(e)
        self.tadj[j].discard(e)

    def _component(self, root: int) -> set[int]:
        seen = {root}
        stack = [root]
        cons = self.p.constraints
        while stack:
            v = stack.pop()
            for e in self.tadj[v]:
                i, j = cons[e]
                u = j if i == v else i
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return seen

    def _shift(self, S: set[int], sign: int) -> tuple[int, list[int]]:
        """Largest feasible shift of S by sign*s and the constraints it makes tight."""
        best, hits = None, []
        for v in S:
            for u, e in self.nbr[v]:
                if u in S:
                    continue
                # e = (v, u): after the shift k_v - k_u changes by sign*s
                room = 1 - (self.k[v] - self.k[u]) if sign > 0 else 1 + (self.k[v] - self.k[u])
                tight_e = e if sign > 0 else e ^ 1
                if best is None or room < best:
                    best, hits = room, [tight_e]
                elif room == best:
                    hits.append(tight_e)
        return best, hits

    def connect(self) -> None:
        """Grow a spanning tree, shifting components in the improving direction."""
        for e in range(len(self.p.constraints)):
            if self._tight(e) and not self._component(self.p.constraints[e][0]) >= {self.p.constraints[e][1]}:
                self._add(e)
        target = set(self.p.target)
        a, b = self.p.tau.numerator, self.p.tau.denominator
        while True:
            S = self._component(0)
            if len(S) == self.N:
                return
            lo, hi = min(self.k), max(self.k)
            K = hi - lo
            w = [a ** (x - lo) * b ** (K - x + lo) for x in self.k]
            A = sum(w[v] for v in target if v not in S)
            B = sum(w[v] for v in target if v in S)
            C = sum(w[v] for v in range(self.N) if v not in S)
            D = sum(w[v] for v in S)
            sign = 1 if B * C - A * D >= 0 else -1
            step, hits = self._shift(S, sign)
            for v in S:
                self.k[v] += sign * step
            self._add(min(hits))

    def duals(self, V: Fraction) -> dict[int, int]:
        """Tree duals by leaf peeling: out_i - τ in_i = c_i - V at each cell.

        Values are scaled by den(V)·(ab)^N with τ = a/b; each peel divides by
        a or b at most once per tree level, so every division is exact and
        the signs are those of the rational duals.
        """
        cons = self.p.constraints
        ta, tb = self.p.tau.numerator, self.p.tau.denominator
        target = set(self.p.target)
        scale = (ta * tb) ** self.N
        num, den = V.numerator, V.denominator
        b = [((den if v in target else 0) - num) * scale for v in range(self.N)]
        deg = [len(self.tadj[v]) for v in range(self.N)]
        used: set[int] = set()
        y: dict[int, int] = {}
        stack = [v for v in range(self.N) if deg[v] == 1]
        while stack:
            v = stack.pop()
            if deg[v] != 1:
                continue
            e = next(x for x in self.tadj[v] if x not in used)
            i, j = cons[e]
            if v == i:
                val = b[v]
            else:
                val, r = divmod(-b[v] * tb, ta)
                if r:
                    raise NonConvergence("dual scaling lost exactness")
            y[e] = val
            used.add(e)
            b[v] = 0
            u = j if v == i else i
            if u == i:
                b[u] -= val
            else:
                q, r = divmod(ta * val, tb)
                if r:
                    raise NonConvergence("dual scaling lost exactness")
                b[u] += q
            deg[v] -= 1
            deg[u] -= 1
            if deg[u] == 1:
                stack.append(u)
        if len(y) != self.N - 1 or any(b):
            raise NonConvergence("tree duals inconsistent")
        return y

    def pivot(self, e: int) -> None:
        """Relax tight constraint e = (i, j): lower i's side of the tree."""
        i, j = self.p.constraints[e]
        self._drop(e)
        S = self._component(i)
        step, hits = self._shift(S, -1)
        for v in S:
            self.k[v] -= step
        self._add(min(hits))


def solve_tree_simplex(program: RatioProgram, k0: Sequence[int] | None = None,
                       max_pivots: int = 100_000) -> AdversarySolution:
    """Exact primal simplex over spanning trees of tight constraints.

    A vertex has weights τ^k with k fixed by a spanning tree of tight
    constraints; the tree duals come out of leaf peeling in rationals, and
    the vertex is optimal exactly when all of them are nonnegative.  A tree
    constraint with a negative dual is relaxed by lowering one side of the
    tree until a crossing constraint becomes tight (Bland's rule on both
    choices once progress stalls, so degenerate pivots cannot cycle).
    """
    N = program.size
    basis = _TreeBasis(program, k0 if k0 is not None else [0] * N)
    if not _lipschitz_ok(program, basis.k):
        raise InvalidParameter("starting exponents are not 1-Lipschitz")
    basis.connect()
    stall, best = 0, None
    for piv in range(max_pivots + 1):
        V = _exact_value(program, basis.k)
        y = basis.duals(V)
        neg = [e for e, v in y.items() if v < 0]
        if not neg:
            lo = min(basis.k)
            k = [x - lo for x in basis.k]
            w = weights_from_exponents(k, program.tau)
            return AdversarySolution(V, tuple(w), "exact", piv, 0.0, tuple(k), True)
        stall = stall + 1 if best is not None and V <= best else 0
        best = V if best is None else max(best, V)
        # steepest dual first; Bland's rule once progress stalls
        basis.pivot(min(neg) if stall >= 20 else min(neg, key=lambda e: (y[e], e)))
    raise NonConvergence("pivot limit reached")


def _chain_best(c: Sequence[int], lam: Fraction, tau: Fraction) -> tuple[list[int], Fraction]:
    """max Σ τ^k_i (c_i - λ) over integer 1-Lipschitz k on a path, k in [-(N-1), 0].

    Every 1-Lipschitz k on a path of N cells has range <= N-1, so after a
    shift it lies in the window; the objective only changes by a positive
    factor under shifts, hence the sign of the maximum is exact.  Values are
    scaled to integers: τ^{-m} a^M = b^m a^{M-m} with τ = a/b.
    """
    N = len(c)
    M = N - 1
    a, b = tau.numerator, tau.denominator
    p, q = lam.numerator, lam.denominator
    scale = np.array([b ** m * a ** (M - m) for m in range(M + 1)], dtype=object)
    coef = [ci * q - p for ci in c]
    back = np.zeros((N, M + 1), dtype=np.int8)
    best = scale * coef[0]
    neg = None
    for i in range(1, N):
        up = np.empty(M + 1, dtype=object)
        down = np.empty(M + 1, dtype=object)
        up[:-1] = best[1:]
        up[-1] = neg
        down[1:] = best[:-1]
        down[0] = neg
        choice = np.zeros(M + 1, dtype=np.int8)
        cur = best.copy()
        for off, cand in ((1, up), (-1, down)):
            valid = np.array([v is not None for v in cand])
            better = valid & np.array([v is not None and v > w for v, w in zip(cand, cur)])
            cur = np.where(better, cand, cur)
            choice = np.where(better, off, choice)
        back[i] = choice
        best = cur + scale * coef[i]
    m = int(max(range(M + 1), key=lambda j: best[j]))
    top = best[m]
    ms = [0] * N
    ms[-1] = m
    for i in range(N - 1, 0, -1):
        m = m + int(back[i, m])
        ms[i - 1] = m
    hi = min(ms)
    k = [hi - v for v in ms]
    return k, Fraction(top, q * a ** M)


def solve_chain(program: RatioProgram, max_rounds: int = 200) -> AdversarySolution:
    """Exact optimum on a 1D grid by Dinkelbach iteration on the DP above.

    λ_{j+1} = R(k_j) strictly increases until max Σ τ^k (c - λ) = 0, which
    proves that no exponent vector beats λ; vertices with integer k suffice.
    """
    if len(program.shape) != 1:
        raise InvalidParameter("solve_chain needs a 1D program")
    N = program.size
    tau = program.tau
    c = [0] * N
    for t in program.target:
        c[t] = 1
    k = [0] * N
    lam = Fraction(len(program.target), N)
    for rounds in range(1, max_rounds + 1):
        k_new, top = _chain_best(c, lam, tau)
        if top <= 0:
            w = weights_from_exponents(k, tau)
            return AdversarySolution(lam, tuple(w), "exact", rounds, 0.0, tuple(k), True)
        k = k_new
        w = weights_from_exponents(k, tau)
        lam = sum((w[t] for t in program.target), Fraction(0))
    raise NonConvergence("Dinkelbach iteration did not settle")


def solve_exact(program: RatioProgram, budget: int = EXACT_BUDGET) -> AdversarySolution:
    """Certified optimal vertex in rationals.

    1D grids go through the Dinkelbach chain solver; otherwise the tree
    simplex runs from the vertex found by the iterative solver (any start is
    valid, a good one just saves pivots).
    """
    N = program.size
    if N > budget:
        raise EnumerationBudget(f"{N} cells exceed the exact budget {budget}", count=N)
    tau = program.tau
    if tau == 1 or not program.target or len(program.target) == N:
        w = [Fraction(1, N)] * N
        val = Fraction(len(program.target), N)
        return AdversarySolution(val, tuple(w), "exact", 0, 0.0, (0,) * N, True)
    if len(program.shape) == 1:
        return solve_chain(program)
    try:
        k0 = solve_iterative(program).exponents
    except NonConvergence as exc:
        k0 = exc.best.exponents if exc.best is not None else None
    return solve_tree_simplex(program, k0)


def _integer_envelope(program: RatioProgram, k) -> np.ndarray:
    """Smallest 1-Lipschitz integer function above k (grid graph metric)."""
    arr = np.asarray(k, dtype=np.int64).reshape(program.shape)
    for _ in range(2):
        for ax in range(arr.ndim):
            a = np.moveaxis(arr, ax, 0)
            for i in range(1, a.shape[0]):
                a[i] = np.maximum(a[i], a[i - 1] - 1)
            for i in range(a.shape[0] - 2, -1, -1):
                a[i] = np.maximum(a[i], a[i + 1] - 1)
    return arr.ravel()


# ---------------------------------------------------------------------------
# Dense rational simplex (oracle and fallback)
# ---------------------------------------------------------------------------


def solve_dense(program: RatioProgram, max_pivots: int = 200_000) -> AdversarySolution:
    """Two-phase tableau simplex over Fractions with Bland's rule.

    Rows: w_i - τ w_j + s = 0 for each constraint and Σ w + a = 1.
    Among optimal vertices the one reached by Bland's rule is returned.
    """
    N = program.size
    cons = program.constraints
    M = len(cons)
    tau = program.tau
    nvar = N + M + 1
    art = N + M
    T = []
    for r, (i, j) in enumerate(cons):
        row = [Fraction(0)] * (nvar + 1)
        row[i] += 1
        row[j] -= tau
        row[N + r] = Fraction(1)
        T.append(row)
    row = [Fraction(0)] * (nvar + 1)
    for i in range(N):
        row[i] = Fraction(1)
    row[art] = Fraction(1)
    row[-1] = Fraction(1)
    T.append(row)
    basis = list(range(N, N + M)) + [art]
    pivots = 0

    def run(cost):
        nonlocal pivots
        while True:
            red = [cost[j] - sum(cost[basis[r]] * T[r][j] for r in range(len(T)) if T[r][j] != 0)
                   for j in range(nvar)]
            enter = next((j for j in range(nvar) if red[j] > 0 and j not in basis), None)
            if enter is None:
                return
            best = None
            for r in range(len(T)):
                if T[r][enter] > 0:
                    ratio = T[r][-1] / T[r][enter]
                    if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < basis[best[1]]):
                        best = (ratio, r)
            if best is None:
                raise NonConvergence("unbounded program")
            r = best[1]
            pv = T[r][enter]
            T[r] = [x / pv for x in T[r]]
            for q in range(len(T)):
                if q != r and T[q][enter] != 0:
                    f = T[q][enter]
                    T[q] = [x - f * y for x, y in zip(T[q], T[r])]
            basis[r] = enter
            pivots += 1
            if pivots > max_pivots:
                raise NonConvergence("pivot limit reached")

    phase1 = [Fraction(0)] * nvar
    phase1[art] = Fraction(-1)
    run(phase1)
    if any(basis[r] == art and T[r][-1] != 0 for r in range(len(T))):
        raise NonConvergence("infeasible program")
    cost = [Fraction(0)] * nvar
    for t in program.target:
        cost[t] = Fraction(1)
    cost[art] = Fraction(-10 ** 9)
    run(cost)
    w = [Fraction(0)] * N
    for r, b in enumerate(basis):
        if b < N:
            w[b] = T[r][-1]
    V = sum((w[t] for t in program.target), Fraction(0))
    return AdversarySolution(V, tuple(w), "exact", pivots, 0.0, None, True, notes=("dense simplex",))


def brute_force_vertices(program: RatioProgram, spread: int | None = None) -> tuple[Fraction, tuple[int, ...]]:
    """Best 1-Lipschitz integer exponent vector by enumeration (tiny grids only)."""
    N = program.size
    spread = spread if spread is not None else N
    best = None
    for k in product(range(spread), repeat=N):
        if min(k) != 0 or not _lipschitz_ok(program, k):
            continue
        w = weights_from_exponents(k, program.tau)
        v = sum((w[t] for t in program.target), Fraction(0))
        if best is None or v > best[0]:
            best = (v, k)
    return best


# ---------------------------------------------------------------------------
# Iterative solver
# ---------------------------------------------------------------------------


def _float_envelope(x: np.ndarray, L: float, shape) -> np.ndarray:
    arr = x.reshape(shape).copy()
    for _ in range(2):
        for ax in range(arr.ndim):
            a = np.moveaxis(arr, ax, 0)
            for i in range(1, a.shape[0]):
                a[i] = np.maximum(a[i], a[i - 1] - L)
            for i in range(a.shape[0] - 2, -1, -1):
                a[i] = np.maximum(a[i], a[i + 1] - L)
    return arr.ravel()


def _value(x: np.ndarray, mask: np.ndarray) -> float:
    m = x.max()
    e = np.exp(x - m)
    return float(e[mask].sum() / e.sum())


def _round_vertex(program: RatioProgram, x: np.ndarray, L: float, mask: np.ndarray):
    """Best integer exponent vector among shifted floors of x / L."""
    rel = (x - x.max()) / L
    best = None
    for theta in np.linspace(0, 1, 9, endpoint=False):
        k = _integer_envelope(program, np.floor(rel + theta).astype(int))
        v = _value(k * L, mask)
        if best is None or v > best[0]:
            best = (v, k)
    return best


def _difference_matrix(program: RatioProgram):
    E = np.array(grid_edges(program.shape), dtype=np.int64).reshape(-1, 2)
    m = len(E)
    rows = np.r_[np.arange(m), np.arange(m)]
    D = sparse.csr_matrix((np.r_[np.ones(m), -np.ones(m)], (rows, np.r_[E[:, 0], E[:, 1]])),
                          shape=(m, program.size))
    return sparse.vstack([D, -D]).tocsr()


def solve_iterative(program: RatioProgram, max_iters: int = 500, tolerance: float = 1e-12,
                    step: float = 1.0) -> AdversarySolution:
    """Trust-region ascent on log-weights x = log w.

    Each step maximises the linearised objective over {x + d Lipschitz,
    |d|_inf <= δ}; the sign pattern of the gradient, not its size, drives
    the step, so cells of negligible weight still move.  The objective
    log(Σ_T w / Σ w) is pseudo-linear, so a stationary point is global.
    The final iterate is rounded to integer exponent vertices.
    """
    tau = float(program.tau)
    N = program.size
    mask = np.zeros(N, dtype=bool)
    mask[list(program.target)] = True
    if tau == 1.0 or not mask.any() or mask.all():
        w = np.full(N, 1.0 / N)
        return AdversarySolution(float(mask.mean()), tuple(w), "iterative", 1, 0.0, (0,) * N, False, 0.0)
    L = math.log(tau)
    A = _difference_matrix(program)
    opts = dict(primal_feasibility_tolerance=1e-10, dual_feasibility_tolerance=1e-10)
    x = np.zeros(N)
    f = _value(x, mask)
    delta = step
    it = 0
    last_gain = math.inf
    converged = False
    for it in range(1, max_iters + 1):
        e = np.exp(x - x.max())
        g = np.where(mask, e, 0.0) / e[mask].sum() - e / e.sum()
        res = linprog(-g / np.abs(g).max(), A_ub=A, b_ub=np.maximum(L - A @ x, 0.0),
                      bounds=(-delta, delta), method="highs-ds", options=opts)
        fc = -1.0
        if res.status == 0:
            cand = x + res.x
            if (A @ cand).max() <= L + 1e-9:
                fc = _value(cand, mask)
        if fc > f * (1 + tolerance):
            last_gain = fc - f
            x, f = cand, fc
            delta = min(delta * 2, 1e4)
        else:
            delta /= 4
            if delta < 1e-9:
                converged = True
                break
    x = _float_envelope(x, L, program.shape)
    cont = _value(x, mask)
    gap = max(min(last_gain, 1.0), tolerance * cont) if not converged else tolerance * cont
    v, k = _round_vertex(program, x, L, mask)
    if v >= cont * (1 - 1e-12):
        w = np.exp((k - k.max()) * L)
        w /= w.sum()
        return AdversarySolution(v, tuple(w.tolist()), "iterative", it, 0.0,
                                 tuple(int(t) for t in k), False, gap, converged)
    w = np.exp(x - x.max())
    w /= w.sum()
    resid = check_feasible(program, w.tolist())
    sol = AdversarySolution(cont, tuple(w.tolist()), "iterative", it, resid, None, False, gap, converged)
    if not converged:
        raise NonConvergence("iteration limit reached", best=sol)
    return sol


# ---------------------------------------------------------------------------
# Decay curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayPoint:
    n: int
    value: Fraction | float
    kind: str
    coarsening: bool | None
    seconds: float


@dataclass(frozen=True)
class DecayCurve:
    points: tuple[DecayPoint, ...]
    rate: float | None
    monotone: bool
    strictly_decreasing: bool


def coarsen(weights: Sequence, spec: GridSpec, n: int) -> list:
    """Aggregate level-(n+1) cell weights to level n (children summed)."""
    fine = tuple(m ** (n + 1) for m in spec.grid_shape)
    coarse = tuple(m ** n for m in spec.grid_shape)
    arr = np.array(list(weights), dtype=object).reshape(fine)
    for k, m in enumerate(spec.grid_shape):
        arr = np.add.reduceat(arr, np.arange(0, fine[k], m), axis=k)
    assert arr.shape == coarse
    return arr.ravel().tolist()


def decay_curve(spec: GridSpec, tau, levels: Sequence[int], exact_limit: int = DECAY_EXACT_LIMIT,
                max_iters: int = 500) -> DecayCurve:
    """Adversarial values v(n) with a coarsening check between consecutive levels.

    The check aggregates the level-(n+1) optimum to level n; when the result
    satisfies the level-n constraints, v(n) >= v(n+1) is certified because
    E_{n+1} ⊂ E_n.
    """
    levels = list(levels)
    if not levels:
        raise InvalidParameter("no levels requested")
    tau = frac(tau)
    sols, pts = [], []
    for n in levels:
        t0 = time.perf_counter()
        prog = build_program(level_set(spec, n), tau)
        sol = None
        if prog.size <= exact_limit:
            try:
                sol = solve_exact(prog)
            except NonConvergence:
                sol = None
        if sol is None:
            sol = solve_iterative(prog, max_iters)
        sols.append((n, prog, sol, time.perf_counter() - t0))
    for idx, (n, prog, sol, secs) in enumerate(sols):
        coarse_ok = None
        if idx + 1 < len(sols) and sols[idx + 1][0] == n + 1:
            nxt = sols[idx + 1][2]
            agg = coarsen(nxt.weights, spec, n)
            coarse_ok = check_feasible(prog, agg) <= (0 if nxt.kind == "exact" else 1e-9)
        pts.append(DecayPoint(n, sol.value, sol.kind, coarse_ok, secs))
    vals = [float(p.value) for p in pts]
    rate = None
    if len(vals) >= 2 and all(v > 0 for v in vals):
        slope = np.polyfit([p.n for p in pts], np.log(vals), 1)[0]
        rate = float(math.exp(slope))
    mono = all(b.value <= a.value for a, b in zip(pts, pts[1:]))
    strict = all(b.value < a.value for a, b in zip(pts, pts[1:]))
    return DecayCurve(tuple(pts), rate, mono, strict)


# ---------------------------------------------------------------------------
# LP text export / solution import
# ---------------------------------------------------------------------------


def _num(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return repr(float(x))


def export_lp(program: RatioProgram) -> str:
    """CPLEX LP text of the program."""
    lines = [f"\\ ratio program: level {program.n}, grid {'x'.join(map(str, program.shape))}, tau {program.tau}",
             "Maximize", " obj: " + (" + ".join(f"w{t}" for t in program.target) or "0 w0"), "Subject To"]
    tau = _num(program.tau)
    for r, (i, j) in enumerate(program.constraints):
        lines.append(f" r{r}: w{i} - {tau} w{j} <= 0")
    lines.append(" norm: " + " + ".join(f"w{i}" for i in range(program.size)) + " = 1")
    lines.append("Bounds")
    lines.extend(f" w{i} >= 0" for i in range(program.size))
    lines.append("End")
    return "\n".join(lines) + "\n"


def import_solution(text: str, size: int) -> list:
    """Read ``w<i> <value>`` lines (values as fractions or decimals)."""
    w: list = [None] * size
    for line in text.splitlines():
        m = re.match(r"\s*w(\d+)\s*[=:\s]\s*([-+0-9./eE]+)\s*$", line)
        if not m:
            continue
        i, v = int(m.group(1)), m.group(2)
        if i >= size:
            raise InvalidParameter(f"variable w{i} outside the program")
        w[i] = Fraction(v) if re.fullmatch(r"[-+]?\d+(/\d+)?", v) else float(v)
    if any(v is None for v in w):
        raise InvalidParameter("solution misses some variables")
    return w


def verify_solution(program: RatioProgram, weights: Sequence) -> tuple[float, object]:
    """(feasibility residual, objective value) of an imported solution."""
    return check_feasible(program, weights), sum(weights[t] for t in program.target)


def export_solution(sol: AdversarySolution) -> str:
    return "".join(f"w{i} {v}\n" for i, v in enumerate(sol.weights))
