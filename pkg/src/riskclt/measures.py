"""Mean-semideviation, Average Value-at-Risk and higher-order inverse
(higher-moment) risk measures, with their plug-in estimators.

Losses convention: larger outcomes are worse.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import kernels
from .errors import DegenerateSample, FlatQuantileWarning, ParameterOutOfRange, SolverFailure
from .functional import CompositeFunctional, SampleSet, StageFunction, evaluate_plugin
from .optimizer import OptimizedFunctional, SolveResult, flat_minimum

SEMIDEVIATION = "semideviation"
AVAR = "avar"
HIGHER_ORDER = "hmcr"
KINDS = (SEMIDEVIATION, AVAR, HIGHER_ORDER)

HMCR_TOL_REL = 1e-9


@dataclass(frozen=True)
class MeasureSpec:
    """Parameters of one of the three shipped measures.

    ``c`` is the higher-order scale 1/alpha.  A higher-order spec with
    ``p == 1`` is redirected to AVaR at level ``1/c`` by :meth:`resolved`.
    """

    kind: str
    p: float = 2.0
    kappa: float = 0.5
    alpha: float = 0.05
    c: float = 20.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterOutOfRange(f"unknown measure kind {self.kind!r}")
        if self.kind == SEMIDEVIATION:
            if not self.p >= 1:
                raise ParameterOutOfRange("semideviation order p must be >= 1")
            if not 0 <= self.kappa <= 1:
                raise ParameterOutOfRange("kappa must lie in [0, 1]")
        elif self.kind == AVAR:
            _check_alpha(self.alpha)
        else:
            if not self.p >= 1:
                raise ParameterOutOfRange("higher-order measure needs p >= 1")
            if not self.c > 1:
                raise ParameterOutOfRange("higher-order measure needs c > 1")

    def resolved(self) -> "MeasureSpec":
        if self.kind == HIGHER_ORDER and self.p == 1:
            return MeasureSpec(AVAR, p=1.0, alpha=1.0 / self.c, c=self.c)
        return self

    @property
    def label(self) -> str:
        r = self.resolved()
        if r.kind == SEMIDEVIATION:
            return f"semideviation(p={r.p:g}, kappa={r.kappa:g})"
        if r.kind == AVAR:
            return f"avar(alpha={r.alpha:g})"
        return f"hmcr(p={r.p:g}, c={r.c:g})"


@dataclass(frozen=True)
class RiskEstimate:
    """Point estimate with optional minimizer and limit standard deviation.

    ``sd`` is the standard deviation of the normal limit of
    sqrt(n) * (estimate - true value), when it has been computed.
    """

    value: float
    n: int
    measure: str
    minimizer: Optional[float] = None
    sd: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise ParameterOutOfRange("n must be >= 1")
        if self.sd is not None and not self.sd >= 0:
            raise ValueError("limit sd must be nonnegative")

    def with_sd(self, sd) -> "RiskEstimate":
        return replace(self, sd=float(sd))

    @property
    def stderr(self) -> Optional[float]:
        """Approximate standard error sd / sqrt(n)."""
        return None if self.sd is None else self.sd / math.sqrt(self.n)


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise ParameterOutOfRange("alpha must lie in (0, 1]")


def _check_hmcr(p, c):
    if not p > 1:
        raise ParameterOutOfRange("higher-order measure needs p > 1 (use AVaR for p = 1)")
    if not c > 1:
        raise ParameterOutOfRange("higher-order measure needs c > 1")


def _scalar(s: SampleSet) -> np.ndarray:
    if s.dim != 1:
        raise ParameterOutOfRange("this estimator needs scalar observations")
    return s.data[:, 0]


# ---------------------------------------------------------------- composite chains

def identity_chain() -> CompositeFunctional:
    """k = 1 chain f1(eta, x) = eta, f2(x) = x; its plug-in value is the mean."""
    f1 = StageFunction(
        1,
        lambda eta, x: np.broadcast_to(eta, (x.shape[0], 1)),
        out_dim=1,
        in_dim=1,
        jacobian=lambda eta, x: np.ones((x.shape[0], 1, 1)),
        name="eta",
    )
    f2 = StageFunction(2, lambda x: x[:, :1], out_dim=1, name="x")
    return CompositeFunctional((f1, f2), name="mean")


def semideviation_boxes(s: SampleSet, p: float):
    x = _scalar(s)
    lo, hi = float(x.min()), float(x.max())
    r = hi - lo
    return ((0.0, r ** p * 8.0), (lo - 3 * r, hi + 3 * r))


def build_semideviation(p, kappa, sample: Optional[SampleSet] = None, boxes=None) -> CompositeFunctional:
    """Mean-semideviation of order ``p`` as the k = 2 chain

        f1(eta1, x) = x + kappa * eta1**(1/p)
        f2(eta2, x) = max(0, x - eta2)**p
        f3(x)       = x

    Boxes default to generous ones derived from ``sample`` when given,
    otherwise they are left unbounded.
    """
    if not p >= 1:
        raise ParameterOutOfRange("semideviation order p must be >= 1")
    if not 0 <= kappa <= 1:
        raise ParameterOutOfRange("kappa must lie in [0, 1]")
    p = float(p)
    kappa = float(kappa)
    inv_p = 1.0 / p

    def f1(eta, x):
        return x[:, :1] + kappa * eta[0] ** inv_p

    def j1(eta, x):
        e = eta[0]
        # zero semideviation: the derivative term is taken as 0
        g = 0.0 if e == 0 else (kappa / p) * e ** (inv_p - 1.0)
        return np.full((x.shape[0], 1, 1), g)

    def f2(eta, x):
        return np.maximum(0.0, x[:, :1] - eta[0]) ** p

    def j2(eta, x):
        d = np.maximum(0.0, x[:, :1] - eta[0])
        if p == 1.0:
            g = -(d > 0).astype(float)
        else:
            # kink evaluated as 0
            g = -p * np.where(d > 0, d, 0.0) ** (p - 1.0)
        return g.reshape(x.shape[0], 1, 1)

    stages = (
        StageFunction(1, f1, out_dim=1, in_dim=1, jacobian=j1, name="x + kappa*eta^(1/p)"),
        StageFunction(2, f2, out_dim=1, in_dim=1, jacobian=j2, name="max(0, x - eta)^p"),
        StageFunction(3, lambda x: x[:, :1], out_dim=1, name="x"),
    )
    if boxes is None and sample is not None:
        boxes = semideviation_boxes(sample, p)
    return CompositeFunctional(stages, boxes, 1, f"semideviation(p={p:g}, kappa={kappa:g})")


def estimate_semideviation(s: SampleSet, p, kappa) -> RiskEstimate:
    cf = build_semideviation(p, kappa, sample=s)
    return RiskEstimate(evaluate_plugin(cf, s), s.n, cf.name)


# ---------------------------------------------------------------- AVaR

def avar_quantile_index(n: int, alpha: float) -> int:
    """0-based index of the lower empirical (1 - alpha)-quantile in sorted order."""
    j = math.ceil(n * (1.0 - alpha) - 1e-9 * n)
    return min(max(j, 1), n) - 1


def avar_flat(xs_sorted: np.ndarray, alpha: float) -> bool:
    """True when the AVaR minimizer set is a nondegenerate interval.

    That happens when n * (1 - alpha) is an integer j < n and the
    order statistics j and j+1 differ.
    """
    n = xs_sorted.shape[0]
    t = n * (1.0 - alpha)
    j = round(t)
    if abs(t - j) > 1e-9 * n or j < 1 or j >= n:
        return False
    return xs_sorted[j] > xs_sorted[j - 1]


def estimate_avar(s: SampleSet, alpha) -> RiskEstimate:
    """min_z z + (1/(alpha n)) sum max(0, X_i - z).

    The minimizer is the lower empirical (1-alpha)-quantile, which is the
    left end of the minimizer set when that set is an interval.
    """
    _check_alpha(alpha)
    xs = np.sort(_scalar(s))
    z = float(xs[avar_quantile_index(xs.shape[0], alpha)])
    value = kernels.tail_objective(xs, z, 1.0, 1.0 / alpha)
    return RiskEstimate(float(value), s.n, f"avar(alpha={alpha:g})", minimizer=z)


def avar_tail_average(s: SampleSet, alpha) -> float:
    """(1/alpha) * integral_{1-alpha}^1 of the empirical quantile function."""
    _check_alpha(alpha)
    xs = np.sort(_scalar(s))
    n = xs.shape[0]
    i = np.arange(n, dtype=float)
    # empirical quantile equals xs[i] on (i/n, (i+1)/n]
    w = np.clip((i + 1) / n - np.maximum(i / n, 1.0 - alpha), 0.0, None)
    return float(np.add.reduce(w * xs)) / alpha


def avar_problem(s: SampleSet, alpha) -> OptimizedFunctional:
    """AVaR as min_z f1(z, E[f2(z, X)]) with f1 = z + eta/alpha, f2 = max(0, x - z)."""
    _check_alpha(alpha)
    x = _scalar(s)
    lo, hi = float(x.min()), float(x.max())

    def exact(sample):
        est = estimate_avar(sample, alpha)
        xs = np.sort(_scalar(sample))
        return SolveResult(np.array([est.minimizer]), est.value, 0, avar_flat(xs, alpha))

    return OptimizedFunctional(
        lower=[lo - 1.0],
        upper=[hi + 1.0],
        outer=lambda z, eta: z[0] + eta[0] / alpha,
        outer_grad=lambda z, eta: np.array([1.0 / alpha]),
        inner=lambda z, xx: np.maximum(0.0, xx[:, :1] - z[0]),
        convex=True,
        solver=exact,
        name=f"avar(alpha={alpha:g})",
    )


# ---------------------------------------------------------------- higher order

def hmcr_bracket(xs_sorted: np.ndarray, c: float):
    lo = float(xs_sorted[0])
    hi = float(xs_sorted[-1])
    return lo - 1.0, hi + c * (hi - lo)


def _solve_hmcr_sorted(xs: np.ndarray, p: float, c: float):
    lo, hi = hmcr_bracket(xs, c)
    tol = HMCR_TOL_REL * (1.0 + max(abs(lo), abs(hi)))
    z, val, it, status = kernels.ternary_tail(xs, float(p), float(c), lo, hi, tol)
    if status != 0:
        raise SolverFailure("higher-order objective became non-finite")
    # at z = max(s) the objective is exactly max(s); keep it when no worse
    top = float(xs[-1])
    if top <= val:
        z, val = top, top
    return z, val, it


def estimate_higher_order(s: SampleSet, p, c) -> RiskEstimate:
    """min_z z + c * ((1/n) sum max(0, X_i - z)**p)**(1/p) by ternary search.

    The bracket is [min - 1, max + c * range]; the search stops once the
    bracket is narrower than 1e-9 * (1 + max(|lo|, |hi|)).  The sample
    maximum, where the objective equals z, is compared as a final candidate.
    """
    _check_hmcr(p, c)
    xs = np.sort(_scalar(s))
    z, val, _ = _solve_hmcr_sorted(xs, p, c)
    return RiskEstimate(float(val), s.n, f"hmcr(p={p:g}, c={c:g})", minimizer=float(z))


def hmcr_objective(s: SampleSet, p, c):
    """The plug-in objective z -> z + c * tail_moment(z)**(1/p) as a callable."""
    xs = np.sort(_scalar(s))
    return lambda z: kernels.tail_objective(xs, float(z), float(p), float(c))


def higher_order_problem(s: SampleSet, p, c) -> OptimizedFunctional:
    """Higher-order measure as min_z f1(z, E[f2]) with f1 = z + c*y**(1/p), f2 = max(0, x-z)**p."""
    _check_hmcr(p, c)
    xs = np.sort(_scalar(s))
    lo, hi = hmcr_bracket(xs, c)

    def exact(sample):
        xs_ = np.sort(_scalar(sample))
        z, val, it = _solve_hmcr_sorted(xs_, p, c)
        f = lambda w: kernels.tail_objective(xs_, w, float(p), float(c))  # noqa: E731
        b = hmcr_bracket(xs_, c)
        return SolveResult(np.array([z]), float(val), it, flat_minimum(f, z, val, *b))

    def grad(z, eta):
        y = eta[0]
        return np.array([0.0 if y == 0 else (c / p) * y ** (1.0 / p - 1.0)])

    return OptimizedFunctional(
        lower=[lo],
        upper=[hi],
        outer=lambda z, eta: z[0] + c * eta[0] ** (1.0 / p),
        outer_grad=grad,
        inner=lambda z, xx: np.maximum(0.0, xx[:, :1] - z[0]) ** p,
        convex=True,
        tol=HMCR_TOL_REL * (1.0 + max(abs(lo), abs(hi))),
        solver=exact,
        name=f"hmcr(p={p:g}, c={c:g})",
    )


# ---------------------------------------------------------------- dispatch

def estimate(spec: MeasureSpec, s: SampleSet) -> RiskEstimate:
    spec = spec.resolved()
    if spec.kind == SEMIDEVIATION:
        return estimate_semideviation(s, spec.p, spec.kappa)
    if spec.kind == AVAR:
        return estimate_avar(s, spec.alpha)
    return estimate_higher_order(s, spec.p, spec.c)


@dataclass(frozen=True)
class CoherenceReport:
    translation: float
    homogeneity: float
    monotonicity: float
    convexity: float

    def max_abs(self) -> float:
        return max(abs(self.translation), abs(self.homogeneity), self.monotonicity, self.convexity)


def coherence_check(spec: MeasureSpec, s: SampleSet, a: float, lam: float) -> CoherenceReport:
    """Residuals of the four coherence axioms for the plug-in estimator.

    * translation:  rho(X + a) - rho(X) - a
    * homogeneity:  rho(lam X) - lam rho(X)
    * monotonicity: max(0, rho(Y) - rho(X)) for Y = X - |a| * w, w_i = i/n >= 0
    * convexity:    max(0, rho((X + X')/2) - (rho(X) + rho(X'))/2) with X' the
      reversed sample (a different coupling of the same marginal)
    """
    if not lam > 0:
        raise ParameterOutOfRange("lambda must be positive")
    _scalar(s)

    def rho(data):
        return estimate(spec, SampleSet(data, s.provenance)).value

    x = s.data
    base = rho(x)
    trans = rho(x + a) - base - a
    homog = rho(lam * x) - lam * base
    w = (np.arange(s.n, dtype=float) / s.n)[:, None]
    mono = max(0.0, rho(x - abs(a) * w) - base)
    other = x[::-1]
    conv = max(0.0, rho(0.5 * (x + other)) - 0.5 * (base + rho(other)))
    return CoherenceReport(float(trans), float(homog), float(mono), float(conv))


def require_nondegenerate(s: SampleSet):
    x = _scalar(s)
    if x.max() == x.min():
        raise DegenerateSample("sample is constant")


def warn_if_flat(xs_sorted, alpha):
    if avar_flat(xs_sorted, alpha):
        warnings.warn(
            "empirical CDF is flat at the AVaR quantile; the minimizer is not unique",
            FlatQuantileWarning,
            stacklevel=3,
        )
        return True
    return False


def optimized_semideviation(phi, lower, upper, p, kappa, obs_dim=1):
    """min over u in [lower, upper] of the mean-semideviation of phi(u, X).

    ``phi(u, x)`` maps the decision and the ``(n, m)`` observations to an
    ``(n,)`` array of outcomes.  Stages:

        f1(eta1, u, x) = kappa * eta1**(1/p) + phi(u, x)
        f2(eta2, u, x) = max(0, phi(u, x) - eta2)**p
        f3(u, x)       = phi(u, x)
    """
    from .optimizer import NestedOptimizedFunctional

    if not p > 1:
        raise ParameterOutOfRange("optimized semideviation needs p > 1")
    base = build_semideviation(p, kappa)

    def build(u):
        u = np.array(u, dtype=float)

        def lift(fn):
            return lambda eta, x: fn(eta, np.asarray(phi(u, x), dtype=float).reshape(-1, 1))

        s1, s2, _ = base.stages
        stages = (
            StageFunction(1, lift(s1.fn), 1, 1, lift(s1.jacobian), s1.name),
            StageFunction(2, lift(s2.fn), 1, 1, lift(s2.jacobian), s2.name),
            StageFunction(3, lambda x: np.asarray(phi(u, x), dtype=float).reshape(-1, 1), 1, name="phi(u, x)"),
        )
        return CompositeFunctional(stages, None, obs_dim=obs_dim, name=base.name)

    return NestedOptimizedFunctional(lower, upper, build, name=f"min_u {base.name}[phi(u, X)]")
