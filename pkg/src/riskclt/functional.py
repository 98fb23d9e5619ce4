"""Composite functionals E[f1(E[f2(...E[f_{k+1}(X)]...), X)], their plug-in
estimators, and the backward recursion for directional derivatives.

Stage functions are vectorized over observations: an evaluator receives
``eta`` of shape ``(m_j,)`` and the full ``(n, m)`` observation array and
returns an ``(n, m_{j-1})`` array.  Jacobians return ``(n, m_{j-1}, m_j)``.
The innermost stage receives only the observations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, DomainEscape, MissingJacobian, ParameterOutOfRange


def pairwise_mean(values):
    """Mean over axis 0 using pairwise summation along the observation axis.

    Values are shifted by the first observation before summing, so a
    constant input returns that constant exactly.
    """
    a = np.asarray(values, dtype=np.float64)
    if a.ndim == 1:
        a0 = a[0]
        return float(a0 + np.add.reduce(np.ascontiguousarray(a - a0)) / a.shape[0])
    n = a.shape[0]
    flat = a.reshape(n, -1)
    a0 = flat[0]
    # observation axis last and contiguous so numpy reduces it pairwise
    t = np.ascontiguousarray((flat - a0).T)
    return (a0 + np.add.reduce(t, axis=-1) / n).reshape(a.shape[1:])


@dataclass(frozen=True)
class SampleSet:
    """Immutable i.i.d. sample of ``n`` observations in R^m."""

    data: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, copy=True)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2:
            raise DimensionMismatch("sample data must be 1-D or 2-D")
        if a.shape[0] < 1:
            raise ParameterOutOfRange("a sample needs at least one observation")
        if not np.all(np.isfinite(a)):
            raise ValueError("sample contains non-finite values")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)
        object.__setattr__(self, "provenance", dict(self.provenance))

    @classmethod
    def from_values(cls, values, **provenance):
        return cls(np.asarray(values, dtype=np.float64), provenance)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def column(self, j: int = 0) -> np.ndarray:
        """A single coordinate as a 1-D read-only view."""
        return self.data[:, j]

    def transformed(self, fn, **provenance) -> "SampleSet":
        """New sample with ``fn`` applied to the data array."""
        prov = dict(self.provenance)
        prov.update(provenance)
        return SampleSet(fn(self.data), prov)

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class StageFunction:
    """One level f_j of a composite functional.

    ``in_dim`` is m_j (absent for the innermost stage), ``out_dim`` is
    m_{j-1}.  For the innermost stage ``fn`` maps the observations alone.
    """

    index: int
    fn: Callable
    out_dim: int
    in_dim: Optional[int] = None
    jacobian: Optional[Callable] = None
    name: str = ""

    @property
    def innermost(self) -> bool:
        return self.in_dim is None

    def values(self, eta, x):
        if self.innermost:
            out = self.fn(x)
        else:
            out = self.fn(np.atleast_1d(np.asarray(eta, dtype=np.float64)), x)
        out = np.asarray(out, dtype=np.float64)
        return out.reshape(x.shape[0], self.out_dim)

    def jac(self, eta, x):
        if self.jacobian is None:
            raise MissingJacobian(f"stage {self.index} has no Jacobian")
        out = self.jacobian(np.atleast_1d(np.asarray(eta, dtype=np.float64)), x)
        return np.asarray(out, dtype=np.float64).reshape(x.shape[0], self.out_dim, self.in_dim)


@dataclass(frozen=True)
class CompositeFunctional:
    """Stages f_1..f_{k+1} plus optional domain boxes I_1..I_k.

    ``boxes[j-1]`` is a ``(lower, upper)`` pair of arrays of length m_j; a
    ``None`` box is unbounded.
    """

    stages: tuple
    boxes: Optional[tuple] = None
    obs_dim: int = 1
    name: str = ""

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        k = len(stages) - 1
        if k < 1:
            raise ParameterOutOfRange("a composite functional needs k >= 1")
        if stages[0].out_dim != 1:
            raise DimensionMismatch("stage 1 must be scalar valued")
        if not stages[-1].innermost:
            raise DimensionMismatch("the last stage must map observations only")
        for j in range(k):
            if stages[j].innermost:
                raise DimensionMismatch(f"stage {j + 1} needs a mean input")
            if stages[j + 1].out_dim != stages[j].in_dim:
                raise DimensionMismatch(
                    f"stage {j + 2} output dim {stages[j + 1].out_dim} != "
                    f"stage {j + 1} input dim {stages[j].in_dim}"
                )
        if self.boxes is not None:
            boxes = []
            if len(self.boxes) != k:
                raise DimensionMismatch(f"expected {k} boxes, got {len(self.boxes)}")
            for j, box in enumerate(self.boxes):
                if box is None:
                    boxes.append(None)
                    continue
                lo = np.broadcast_to(np.asarray(box[0], dtype=float), (stages[j].in_dim,)).copy()
                hi = np.broadcast_to(np.asarray(box[1], dtype=float), (stages[j].in_dim,)).copy()
                if np.any(lo > hi):
                    raise ParameterOutOfRange(f"box I_{j + 1} is empty")
                boxes.append((lo, hi))
            object.__setattr__(self, "boxes", tuple(boxes))

    @property
    def k(self) -> int:
        return len(self.stages) - 1

    def with_boxes(self, boxes) -> "CompositeFunctional":
        return CompositeFunctional(self.stages, boxes, self.obs_dim, self.name)

    def check_box(self, j: int, eta) -> None:
        """Raise DomainEscape unless ``eta`` lies in I_j (1-based j)."""
        eta = np.atleast_1d(eta)
        if not np.all(np.isfinite(eta)):
            raise DomainEscape(j, eta, None)
        if self.boxes is None or self.boxes[j - 1] is None:
            return
        lo, hi = self.boxes[j - 1]
        if np.any(eta < lo) or np.any(eta > hi):
            raise DomainEscape(j, eta, (lo, hi))


@dataclass(frozen=True)
class MeanChain:
    """Means (mu_{k+1}, ..., mu_1); ``means[j]`` holds mu_j for j = 1..k+1."""

    means: dict

    def __getitem__(self, j):
        return self.means[j]

    @property
    def value(self) -> float:
        return float(self.means[1][0])


@dataclass(frozen=True)
class DirectionBundle:
    """A direction d = (d_1, ..., d_k, d_{k+1}).

    ``funcs[j-1]`` is a callable on I_j returning a vector in R^{m_{j-1}}
    (or ``None`` for the zero function); ``last`` is d_{k+1} in R^{m_k}.
    """

    funcs: tuple
    last: np.ndarray

    def d(self, j, eta, out_dim):
        fn = self.funcs[j - 1]
        if fn is None:
            return np.zeros(out_dim)
        return np.asarray(fn(np.atleast_1d(eta)), dtype=float).reshape(out_dim)

    @classmethod
    def zero(cls, cf: CompositeFunctional) -> "DirectionBundle":
        return cls(tuple(None for _ in range(cf.k)), np.zeros(cf.stages[-1].out_dim))

    @classmethod
    def constant(cls, values: Sequence, last) -> "DirectionBundle":
        """Bundle whose d_j are constant functions (``None`` means zero)."""
        funcs = tuple(None if v is None else _const(v) for v in values)
        return cls(funcs, np.atleast_1d(np.asarray(last, dtype=float)))

    def combine(self, alpha, other: "DirectionBundle", beta) -> "DirectionBundle":
        """The bundle alpha*self + beta*other."""
        funcs = []
        for f, g in zip(self.funcs, other.funcs):
            funcs.append(_lincomb(alpha, f, beta, g))
        return DirectionBundle(tuple(funcs), alpha * np.asarray(self.last) + beta * np.asarray(other.last))


def _const(v):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return lambda eta: v


def _lincomb(a, f, b, g):
    def h(eta):
        out = 0.0
        if f is not None:
            out = out + a * np.asarray(f(eta), dtype=float)
        if g is not None:
            out = out + b * np.asarray(g(eta), dtype=float)
        return np.atleast_1d(out)
    return h


def _check_dims(cf: CompositeFunctional, s: SampleSet):
    if s.dim != cf.obs_dim:
        raise DimensionMismatch(f"sample dimension {s.dim} != functional dimension {cf.obs_dim}")


def mean_chain(cf: CompositeFunctional, s: SampleSet) -> MeanChain:
    """Empirical means mu_{k+1}, mu_k, ..., mu_1 under the sample's measure."""
    _check_dims(cf, s)
    x = s.data
    k = cf.k
    means = {}
    mu = pairwise_mean(cf.stages[k].values(None, x))
    means[k + 1] = mu
    for j in range(k, 0, -1):
        cf.check_box(j, mu)
        mu = pairwise_mean(cf.stages[j - 1].values(mu, x))
        means[j] = mu
    return MeanChain(means)


def evaluate_plugin(cf: CompositeFunctional, s: SampleSet) -> float:
    """Plug-in estimate rho^(n): every expectation replaced by the sample mean."""
    return mean_chain(cf, s).value


def xi_recursion(cf: CompositeFunctional, chain: MeanChain, d: DirectionBundle, s: SampleSet) -> float:
    """xi_1(d) from xi_{k+1} = d_{k+1}, xi_j = E^[J_j(mu_{j+1}, X)] xi_{j+1} + d_j(mu_{j+1})."""
    _check_dims(cf, s)
    x = s.data
    k = cf.k
    xi = np.atleast_1d(np.asarray(d.last, dtype=float))
    if xi.shape != (cf.stages[k].out_dim,):
        raise DimensionMismatch("d_{k+1} has the wrong dimension")
    for j in range(k, 0, -1):
        st = cf.stages[j - 1]
        eta = chain[j + 1]
        cf.check_box(j, eta)
        jbar = pairwise_mean(st.jac(eta, x))
        xi = jbar @ xi + d.d(j, eta, st.out_dim)
    return float(xi[0])


def stage_jacobian_means(cf: CompositeFunctional, chain: MeanChain, s: SampleSet):
    """Averaged Jacobians E^[f_j'(mu_{j+1}, X)] for j = 1..k."""
    x = s.data
    return [pairwise_mean(cf.stages[j - 1].jac(chain[j + 1], x)) for j in range(1, cf.k + 1)]


def finite_diff_directional(cf: CompositeFunctional, s: SampleSet, d: DirectionBundle, t: float) -> float:
    """Forward difference [Psi(h + t d) - Psi(h)] / t of the nesting map.

    ``h`` is the tuple of empirical mean functions h_j(eta) = E^[f_j(eta, X)]
    and h_{k+1} = E^[f_{k+1}(X)].  Serves as an independent check on
    :func:`xi_recursion`.
    """
    if t <= 0:
        raise ParameterOutOfRange("t must be positive")
    _check_dims(cf, s)
    return (_psi(cf, s, d, t) - _psi(cf, s, d, 0.0)) / t


def _psi(cf, s, d, t):
    x = s.data
    k = cf.k
    v = pairwise_mean(cf.stages[k].values(None, x)) + t * np.asarray(d.last, dtype=float)
    for j in range(k, 0, -1):
        cf.check_box(j, v)
        st = cf.stages[j - 1]
        v = pairwise_mean(st.values(v, x)) + t * d.d(j, v, st.out_dim)
    return float(v[0])


def jacobian_check(stage: StageFunction, box, x, probes: int = 100, seed: int = 0, rel_step: float = 1e-6):
    """Largest relative discrepancy between a declared Jacobian and central
    differences of the evaluator at ``probes`` random points of ``box``."""
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    worst = 0.0
    for _ in range(probes):
        eta = lo + (hi - lo) * rng.random(stage.in_dim)
        jac = stage.jac(eta, x)
        num = np.empty_like(jac)
        for i in range(stage.in_dim):
            h = rel_step * max(1.0, abs(eta[i]))
            e = np.zeros(stage.in_dim)
            e[i] = h
            num[:, :, i] = (stage.values(eta + e, x) - stage.values(eta - e, x)) / (2 * h)
        scale = np.maximum(np.abs(num), 1.0)
        worst = max(worst, float(np.max(np.abs(jac - num) / scale)))
    return worst
