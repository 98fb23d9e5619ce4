"""Limit laws of sqrt(n) * (rho^(n) - rho).

Every population quantity (means, minimizers, moments) is replaced by its
empirical counterpart from the same sample, and covariances use the 1/n
normalization.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample, NonUniqueMinimizer, ParameterOutOfRange
from .functional import (
    CompositeFunctional,
    MeanChain,
    SampleSet,
    mean_chain,
    pairwise_mean,
    stage_jacobian_means,
)
from .measures import (
    RiskEstimate,
    _scalar,
    build_semideviation,
    estimate_avar,
    estimate_higher_order,
    warn_if_flat,
)
from .optimizer import NestedOptimizedFunctional, OptimizedFunctional, SolveResult, solve

PSD_TOL = 1e-10


@dataclass(frozen=True)
class CovarianceModel:
    """Covariance of the stacked limit variables (W_1, ..., W_k, W_{k+1}).

    W_j is evaluated at eta_j = mu_{j+1}.  ``blocks[j-1]`` is the slice of
    ``matrix`` rows/columns belonging to W_j.
    """

    matrix: np.ndarray
    blocks: tuple
    points: tuple
    n: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("covariance must be a square matrix")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def block(self, i: int, j: int) -> np.ndarray:
        """cov[W_i, W_j] (1-based indices)."""
        return self.matrix[self.blocks[i - 1], self.blocks[j - 1]]

    def is_psd(self, tol=PSD_TOL) -> bool:
        if not np.allclose(self.matrix, self.matrix.T, rtol=0, atol=1e-12 * (1 + np.abs(self.matrix).max())):
            return False
        if np.any(np.diag(self.matrix) < 0):
            return False
        eig = np.linalg.eigvalsh(self.matrix)
        return bool(eig.min() >= -tol * max(np.trace(self.matrix), 0.0))


def _outer_mean(r: np.ndarray) -> np.ndarray:
    """(1/n) sum_i r_i r_i^T with pairwise summation."""
    n = r.shape[0]
    prods = r[:, :, None] * r[:, None, :]
    return pairwise_mean(prods.reshape(n, -1)).reshape(r.shape[1], r.shape[1])


def stage_residuals(cf: CompositeFunctional, s: SampleSet, chain: MeanChain) -> np.ndarray:
    """Stacked centered stage values r_i = f(mu, X_i) - mean, shape (n, M)."""
    x = s.data
    cols = []
    for j in range(1, cf.k + 1):
        cf.check_box(j, chain[j + 1])
        v = cf.stages[j - 1].values(chain[j + 1], x)
        cols.append(v - pairwise_mean(v))
    v = cf.stages[cf.k].values(None, x)
    cols.append(v - chain[cf.k + 1])
    return np.concatenate(cols, axis=1)


def covariance_empirical(cf: CompositeFunctional, s: SampleSet, chain: MeanChain = None) -> CovarianceModel:
    """Plug-in covariance of (W_1(mu_2), ..., W_k(mu_{k+1}), W_{k+1})."""
    if chain is None:
        chain = mean_chain(cf, s)
    r = stage_residuals(cf, s, chain)
    blocks = []
    start = 0
    for st in cf.stages:
        blocks.append(slice(start, start + st.out_dim))
        start += st.out_dim
    points = tuple(np.asarray(chain[j + 1]) for j in range(1, cf.k + 1))
    return CovarianceModel(_outer_mean(r), tuple(blocks), points, s.n)


def xi_coefficients(cf: CompositeFunctional, s: SampleSet, chain: MeanChain) -> np.ndarray:
    """Row vector g with xi_1(W) = g . (W_1, ..., W_{k+1}).

    Unrolling the recursion gives g_j = J_1 J_2 ... J_{j-1} where J_j is
    the sample-averaged Jacobian of stage j at mu_{j+1}.
    """
    jbars = stage_jacobian_means(cf, chain, s)
    parts = []
    acc = np.ones((1, 1))
    for j in range(1, cf.k + 2):
        parts.append(acc)
        if j <= cf.k:
            acc = acc @ jbars[j - 1]
    return np.concatenate(parts, axis=1)[0]


def limit_sd_composite(cf: CompositeFunctional, s: SampleSet) -> float:
    """sd of xi_1(W) for a general composite functional."""
    chain = mean_chain(cf, s)
    cov = covariance_empirical(cf, s, chain)
    g = xi_coefficients(cf, s, chain)
    var = float(g @ cov.matrix @ g)
    return math.sqrt(max(var, 0.0))


def semideviation_coefficients(x: np.ndarray, p: float, kappa: float):
    """(mean, mu_2, a, b) with a = (kappa/p) mu_2^((1-p)/p), b = p E^[max(0, X - mean)^(p-1)]."""
    mu3 = pairwise_mean(x)
    dev = np.maximum(0.0, x - mu3)
    mu2 = pairwise_mean(dev ** p)
    if mu2 == 0:
        raise DegenerateSample("zero semideviation")
    a = (kappa / p) * mu2 ** ((1.0 - p) / p)
    b = p * pairwise_mean(np.where(dev > 0, dev, 0.0) ** (p - 1.0))
    return mu3, mu2, a, b


def limit_sd_semideviation(s: SampleSet, p, kappa) -> RiskEstimate:
    """sd of V1 + a (V2 - b V1) using the plug-in covariance of (V1, V2)."""
    if not p > 1:
        raise ParameterOutOfRange("the semideviation limit formula needs p > 1")
    x = _scalar(s)
    _, _, a, b = semideviation_coefficients(x, p, kappa)
    cf = build_semideviation(p, kappa, sample=s)
    chain = mean_chain(cf, s)
    cov = covariance_empirical(cf, s, chain)
    v1 = float(cov.block(3, 3)[0, 0])
    v2 = float(cov.block(2, 2)[0, 0])
    c12 = float(cov.block(2, 3)[0, 0])
    coef1 = 1.0 - a * b
    var = coef1 ** 2 * v1 + a ** 2 * v2 + 2.0 * coef1 * a * c12
    return RiskEstimate(chain.value, s.n, cf.name, sd=math.sqrt(max(var, 0.0)))


def limit_sd_avar(s: SampleSet, alpha) -> RiskEstimate:
    """(1/alpha) * sd(max(0, X - z)) at the returned AVaR minimizer z."""
    if not 0 < alpha <= 1:
        raise ParameterOutOfRange("alpha must lie in (0, 1]")
    est = estimate_avar(s, alpha)
    x = _scalar(s)
    warn_if_flat(np.sort(x), alpha)
    tail = np.maximum(0.0, x - est.minimizer)
    sd = math.sqrt(_pop_var(tail)) / alpha
    return est.with_sd(sd)


def limit_sd_higher_order(s: SampleSet, p, c) -> RiskEstimate:
    """(c/p) * M^((1-p)/p) * sd(max(0, X - z)^p) with M = E^[max(0, X - z)^p]."""
    x = _scalar(s)
    if x.max() == x.min():
        raise DegenerateSample("constant sample has no tail to linearize around")
    est = estimate_higher_order(s, p, c)
    d = np.maximum(0.0, x - est.minimizer) ** p
    m = pairwise_mean(d)
    if m == 0:
        raise DegenerateSample("tail moment vanishes at the minimizer")
    sd = (c / p) * m ** ((1.0 - p) / p) * math.sqrt(_pop_var(d))
    return est.with_sd(sd)


def _pop_var(v: np.ndarray) -> float:
    return float(pairwise_mean((v - pairwise_mean(v)) ** 2))


def limit_sd_optimized(problem, s: SampleSet, result: SolveResult = None) -> RiskEstimate:
    """Limit sd at the single minimizer of an optimized functional.

    For :class:`OptimizedFunctional`: sd of <grad_eta f1(z, E^[f2(z, X)]), f2(z, X)>.
    For :class:`NestedOptimizedFunctional`: the composite recursion applied to
    the stages frozen at the minimizer.  Emits :class:`NonUniqueMinimizer`
    when the solver reports a tie; the single-point formula is still returned.
    """
    if result is None:
        result = solve(problem, s)
    if result.tie:
        warnings.warn(
            "several near-optimal decisions found; the reported limit assumes a unique minimizer",
            NonUniqueMinimizer,
            stacklevel=2,
        )
    z = result.minimizer
    if isinstance(problem, OptimizedFunctional):
        vals = np.asarray(problem.inner(z, s.data), dtype=float).reshape(s.n, -1)
        eta = np.atleast_1d(pairwise_mean(vals))
        grad = np.atleast_1d(np.asarray(problem.outer_grad(z, eta), dtype=float))
        proj = vals @ grad
        sd = math.sqrt(_pop_var(proj))
        minimizer = float(z[0]) if z.size == 1 else None
        return RiskEstimate(result.value, s.n, problem.name, minimizer=minimizer, sd=sd)
    if isinstance(problem, NestedOptimizedFunctional):
        cf = problem.build(z)
        sd = limit_sd_composite(cf, s)
        minimizer = float(z[0]) if z.size == 1 else None
        return RiskEstimate(result.value, s.n, problem.name, minimizer=minimizer, sd=sd)
    raise TypeError(f"unsupported problem type {type(problem).__name__}")

