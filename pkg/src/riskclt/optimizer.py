"""Inner minimizations: 1-D convex problems and small compact boxes.

Two problem forms are supported:

* :class:`OptimizedFunctional` -- min over z in a box of f1(z, E[f2(z, X)]).
* :class:`NestedOptimizedFunctional` -- min over u in a box of a composite
  functional whose stages depend on u.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainEscape, ParameterOutOfRange, SolverFailure
from .functional import CompositeFunctional, SampleSet, evaluate_plugin, pairwise_mean

TIE_DIST_REL = 1e-6
TIE_GAP = 1e-10
CERT_PROBES = 32
MAX_TERNARY_ITER = 500


@dataclass(frozen=True)
class SolveResult:
    minimizer: np.ndarray
    value: float
    iterations: int
    tie: bool = False
    certified: bool = True

    @property
    def z(self) -> float:
        """Scalar minimizer (1-D problems)."""
        return float(self.minimizer[0])


def _box(lower, upper):
    lo = np.atleast_1d(np.asarray(lower, dtype=float))
    hi = np.atleast_1d(np.asarray(upper, dtype=float))
    if lo.shape != hi.shape or lo.size < 1:
        raise ParameterOutOfRange("box bounds must have matching, nonempty shapes")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(lo > hi):
        raise ParameterOutOfRange("box must be nonempty and bounded")
    return lo, hi


@dataclass(frozen=True)
class OptimizedFunctional:
    """min_{z in [lower, upper]} outer(z, E[inner(z, X)]).

    ``inner(z, x)`` maps the ``(n, m)`` observations to ``(n, s)``;
    ``outer(z, eta)`` is scalar and ``outer_grad(z, eta)`` is its gradient
    in ``eta``.  Set ``convex=True`` for 1-D objectives known to be convex
    so the ternary solver is used instead of grid + pattern search.
    ``solver``, when given, maps a sample to a :class:`SolveResult` and
    replaces both generic routes (measures with an exact 1-D solver use it).
    """

    lower: np.ndarray
    upper: np.ndarray
    outer: Callable
    outer_grad: Callable
    inner: Callable
    convex: bool = False
    tol: float = 0.0
    solver: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        lo, hi = _box(self.lower, self.upper)
        if lo.size > 3:
            raise ParameterOutOfRange("decision dimension must be at most 3")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def inner_mean(self, z, s: SampleSet) -> np.ndarray:
        vals = np.asarray(self.inner(np.atleast_1d(z), s.data), dtype=float)
        return np.atleast_1d(pairwise_mean(vals.reshape(s.n, -1)))

    def objective(self, s: SampleSet) -> Callable:
        def f(z):
            z = np.atleast_1d(np.asarray(z, dtype=float))
            return float(self.outer(z, self.inner_mean(z, s)))
        return f


@dataclass(frozen=True)
class NestedOptimizedFunctional:
    """min_{u in [lower, upper]} of the composite functional ``build(u)``."""

    lower: np.ndarray
    upper: np.ndarray
    build: Callable[[np.ndarray], CompositeFunctional]
    name: str = ""

    def __post_init__(self):
        lo, hi = _box(self.lower, self.upper)
        if lo.size > 3:
            raise ParameterOutOfRange("decision dimension must be at most 3")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def objective(self, s: SampleSet) -> Callable:
        def f(u):
            u = np.atleast_1d(np.asarray(u, dtype=float))
            try:
                return evaluate_plugin(self.build(u), s)
            except DomainEscape:
                return math.inf
        return f


def ternary_search(objective, lo, hi, tol, max_iter=MAX_TERNARY_ITER):
    """Shrink [lo, hi] by thirds until its width is <= tol.

    Stops early once float resolution prevents further shrinking.
    Returns ``(lo, hi, iterations)``.
    """
    it = 0
    while hi - lo > tol and it < max_iter:
        third = (hi - lo) / 3.0
        m1 = lo + third
        m2 = hi - third
        if not (lo < m1 < m2 < hi):
            break
        f1 = objective(m1)
        f2 = objective(m2)
        if not (math.isfinite(f1) and math.isfinite(f2)):
            raise SolverFailure(f"non-finite objective near z={m1!r}")
        if f1 <= f2:
            hi = m2
        else:
            lo = m1
        it += 1
    return lo, hi, it


def solve_1d_convex(objective, bracket, tol=0.0) -> SolveResult:
    """Minimize a convex scalar function over ``bracket`` by ternary search.

    The final bracket has width at most ``tol`` (or is collapsed to float
    resolution when ``tol`` is 0); the midpoint is returned.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo <= hi:
        raise ParameterOutOfRange("bracket must satisfy lo <= hi")
    lo, hi, it = ternary_search(objective, lo, hi, tol)
    z = 0.5 * (lo + hi)
    val = objective(z)
    if not math.isfinite(val):
        raise SolverFailure(f"non-finite objective at z={z!r}")
    tie = flat_minimum(objective, z, val, float(bracket[0]), float(bracket[1]))
    return SolveResult(np.array([z]), float(val), it, tie)


def flat_minimum(objective, z, val, lo, hi) -> bool:
    """Whether a 1-D convex objective is numerically flat around ``z``.

    Probes at distance 1e-3 * (1 + |z|) on both sides; a gap of at most
    1e-10 * (1 + |val|) on either side counts as a tie.
    """
    step = 1e-3 * (1.0 + abs(z))
    gap = TIE_GAP * (1.0 + abs(val))
    for w in (z - step, z + step):
        if lo <= w <= hi and objective(w) - val <= gap:
            return True
    return False


def _certify(f, lo, hi, value, seed, probes=CERT_PROBES):
    rng = np.random.default_rng(seed)
    pts = lo + (hi - lo) * rng.random((probes, lo.size))
    slack = 1e-12 * (1.0 + abs(value))
    return all(value <= f(p) + slack for p in pts)


def solve_low_dim(problem, s: SampleSet, tol=1e-8, grid=33, seed=0) -> SolveResult:
    """Coarse grid over the box followed by compass pattern search.

    Works for both :class:`OptimizedFunctional` and
    :class:`NestedOptimizedFunctional`.  The pattern search halves its step
    whenever no compass move improves, stopping once the step is <= tol.
    """
    lo, hi = problem.lower, problem.upper
    d = lo.size
    f = problem.objective(s)

    axes = [np.linspace(lo[i], hi[i], grid) if hi[i] > lo[i] else np.array([lo[i]]) for i in range(d)]
    pts = np.array(list(itertools.product(*axes)))
    vals = np.array([f(p) for p in pts])
    if not np.any(np.isfinite(vals)):
        raise SolverFailure("objective is non-finite on the whole grid")
    vals_f = np.where(np.isfinite(vals), vals, np.inf)
    best = int(np.argmin(vals_f))
    x = pts[best].copy()
    fx = float(vals_f[best])

    step = np.where(hi > lo, (hi - lo) / max(grid - 1, 1), 0.0)
    it = 0
    while np.max(step) > tol and it < 10_000:
        improved = False
        for i in range(d):
            if step[i] == 0.0:
                continue
            for sign in (1.0, -1.0):
                y = x.copy()
                y[i] = min(max(y[i] + sign * step[i], lo[i]), hi[i])
                if y[i] == x[i]:
                    continue
                fy = f(y)
                if fy < fx:
                    x, fx = y, fy
                    improved = True
                    break
        if not improved:
            step = step / 2.0
        it += 1
    if not math.isfinite(fx):
        raise SolverFailure("pattern search ended at a non-finite value")

    far = np.linalg.norm(pts - x, axis=1) > TIE_DIST_REL * (1.0 + np.linalg.norm(x))
    tie = bool(np.any(far & (vals_f - fx < TIE_GAP)))
    certified = _certify(f, lo, hi, fx, seed)
    return SolveResult(x, float(fx), it, tie, certified)


def solve(problem, s: SampleSet, tol=None) -> SolveResult:
    """Dispatch: the problem's own solver, ternary search for convex 1-D
    problems, else grid + pattern search."""
    if isinstance(problem, OptimizedFunctional) and problem.solver is not None:
        return problem.solver(s)
    if isinstance(problem, OptimizedFunctional) and problem.convex and problem.dim == 1:
        t = problem.tol if tol is None else tol
        res = solve_1d_convex(problem.objective(s), (problem.lower[0], problem.upper[0]), t)
        return res
    return solve_low_dim(problem, s, tol=1e-8 if tol is None else tol)
