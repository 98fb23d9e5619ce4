"""Seeded samplers, CSV ingestion, and population oracles.

Random streams come from numpy's Philox counter-based generator keyed by a
``SeedSequence``; replicate substreams use ``spawn_key`` so they are
independent by construction and do not depend on execution order.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import integrate, optimize, stats

from .errors import IntegrationFailure, ParameterOutOfRange, ParseError
from .functional import SampleSet


# ---------------------------------------------------------------- families

@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise ParameterOutOfRange("normal sd must be positive")

    @property
    def name(self):
        return f"normal(mean={self.mean:g}, sd={self.sd:g})"

    def draw(self, gen: np.random.Generator, n: int) -> np.ndarray:
        return self.mean + self.sd * gen.standard_normal(n)

    def frozen(self):
        return stats.norm(loc=self.mean, scale=self.sd)

    def pdf(self, x: float) -> float:
        u = (x - self.mean) / self.sd
        return math.exp(-0.5 * u * u) / (self.sd * math.sqrt(2.0 * math.pi))

    def moment_finite(self, order: float) -> bool:
        return True


@dataclass(frozen=True)
class StudentT:
    """Student t with ``df`` degrees of freedom, shifted by ``shift``."""

    df: float
    shift: float = 0.0

    def __post_init__(self):
        if not self.df > 0:
            raise ParameterOutOfRange("degrees of freedom must be positive")

    @property
    def name(self):
        return f"t(df={self.df:g}, shift={self.shift:g})"

    def draw(self, gen, n):
        return self.shift + gen.standard_t(self.df, n)

    def frozen(self):
        return stats.t(self.df, loc=self.shift)

    def pdf(self, x: float) -> float:
        v = self.df
        logc = math.lgamma((v + 1) / 2) - math.lgamma(v / 2) - 0.5 * math.log(v * math.pi)
        u = x - self.shift
        return math.exp(logc - (v + 1) / 2 * math.log1p(u * u / v))

    def moment_finite(self, order: float) -> bool:
        return order < self.df


@dataclass(frozen=True)
class PointMass:
    value: float

    @property
    def name(self):
        return f"point({self.value:g})"

    def draw(self, gen, n):
        return np.full(n, float(self.value))

    def moment_finite(self, order: float) -> bool:
        return True


@dataclass(frozen=True)
class Empirical:
    """Observations read from a CSV file (resampled only if asked to)."""

    path: str

    @property
    def name(self):
        return f"empirical({self.path})"

    def load(self) -> np.ndarray:
        return read_csv(self.path)

    def draw(self, gen, n):
        data = self.load()
        idx = gen.integers(0, data.shape[0], n)
        return data[idx]

    def moment_finite(self, order: float) -> bool:
        return True


Family = Union[Normal, StudentT, PointMass, Empirical]


@dataclass(frozen=True)
class DistributionSpec:
    family: Family
    seed: int = 0
    n: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ParameterOutOfRange("n must be >= 1")


# ---------------------------------------------------------------- randomness

def generator(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for ``seed`` and an optional substream key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sample(spec: DistributionSpec, *key: int) -> SampleSet:
    """Draw ``spec.n`` i.i.d. observations (or echo the file for Empirical).

    ``key`` selects a substream of ``spec.seed``; identical arguments give
    bit-identical samples.
    """
    fam = spec.family
    if isinstance(fam, Empirical):
        data = fam.load()
        return SampleSet(data, {"source": str(fam.path), "rows": int(data.shape[0])})
    gen = generator(spec.seed, *key)
    data = fam.draw(gen, spec.n)
    prov = {"generator": "philox", "family": fam.name, "seed": int(spec.seed)}
    if key:
        prov["substream"] = tuple(int(k) for k in key)
    return SampleSet(data, prov)


def read_csv(path) -> np.ndarray:
    """One observation per row, columns are coordinates, optional header."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not cells or all(c == "" for c in cells):
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                if not rows and lineno == 1:
                    continue  # header
                raise ParseError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
    if not rows:
        raise ParseError(f"{path}: no observations")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ParseError(f"{path}: rows have differing numbers of columns")
    data = np.array(rows, dtype=float)
    if not np.all(np.isfinite(data)):
        raise ParseError(f"{path}: non-finite value")
    return data


# ---------------------------------------------------------------- oracles

@dataclass(frozen=True)
class OracleResult:
    """Population minimizer, risk value, and limit sd (inf when it does not exist)."""

    z: Optional[float]
    rho: float
    sigma: float

    @property
    def sigma_finite(self) -> bool:
        return math.isfinite(self.sigma)


def tail_moment(family, z: float, order: float) -> float:
    """E[max(0, X - z)**order] by adaptive quadrature."""
    if isinstance(family, PointMass):
        return max(0.0, family.value - z) ** order if family.value > z else 0.0
    if isinstance(family, Empirical):
        x = family.load()[:, 0]
        return float(np.mean(np.maximum(0.0, x - z) ** order))
    if not family.moment_finite(order):
        return math.inf
    if order == 0:
        return float(family.frozen().sf(z))
    pdf = family.pdf
    val, err = integrate.quad(
        lambda x: (x - z) ** order * pdf(x), z, np.inf, epsabs=1e-13, epsrel=1e-12, limit=500
    )
    if not math.isfinite(val) or err > 1e-7 * max(1.0, abs(val)):
        raise IntegrationFailure(f"tail moment of order {order} at z={z} did not converge (err={err:g})")
    return float(val)


def _support_grid(family, c, points):
    if isinstance(family, (PointMass,)):
        return None
    if isinstance(family, Empirical):
        x = family.load()[:, 0]
        lo, hi = x.min(), x.max()
        return np.linspace(lo - 1.0, hi, points)
    dist = family.frozen()
    return np.linspace(dist.ppf(1e-3), dist.ppf(1.0 - 1e-7), points)


def oracle_avar(family, alpha: float) -> OracleResult:
    """Population AVaR at level alpha with its delta-method sd."""
    if not 0 < alpha <= 1:
        raise ParameterOutOfRange("alpha must lie in (0, 1]")
    if isinstance(family, PointMass):
        return OracleResult(family.value, family.value, 0.0)
    if isinstance(family, Empirical):
        from .asymptotics import limit_sd_avar
        est = limit_sd_avar(SampleSet(family.load()), alpha)
        return OracleResult(est.minimizer, est.value, est.sd)
    z = float(family.frozen().ppf(1.0 - alpha))
    m1 = tail_moment(family, z, 1)
    m2 = tail_moment(family, z, 2)
    rho = z + m1 / alpha
    sigma = math.sqrt(max(m2 - m1 * m1, 0.0)) / alpha if math.isfinite(m2) else math.inf
    return OracleResult(z, rho, sigma)


def oracle_higher_order(family, p: float, c: float, grid: int = 121) -> OracleResult:
    """Population minimizer, value and limit sd of the higher-order measure.

    The objective z + c * E[max(0, X - z)**p]**(1/p) is scanned on a dense
    grid, refined by bounded Brent iterations around the best grid cell, and
    the sd is (c/p) * M**((1-p)/p) * sd(max(0, X - z*)**p).  When the
    2p-th tail moment is infinite the sd is reported as ``inf``.
    ``p == 1`` is evaluated as AVaR at level 1/c.
    """
    if not c > 1:
        raise ParameterOutOfRange("c must exceed 1")
    if p == 1:
        return oracle_avar(family, 1.0 / c)
    if not p > 1:
        raise ParameterOutOfRange("p must be >= 1")
    if isinstance(family, PointMass):
        return OracleResult(family.value, family.value, 0.0)
    if isinstance(family, Empirical):
        from .asymptotics import limit_sd_higher_order
        est = limit_sd_higher_order(SampleSet(family.load()), p, c)
        return OracleResult(est.minimizer, est.value, est.sd)
    if not family.moment_finite(p):
        raise IntegrationFailure(f"the order-{p:g} moment of {family.name} is infinite")

    def obj(z):
        return z + c * tail_moment(family, z, p) ** (1.0 / p)

    zs = _support_grid(family, c, grid)
    vals = np.array([obj(z) for z in zs])
    i = int(np.argmin(vals))
    lo = zs[max(i - 1, 0)]
    hi = zs[min(i + 1, len(zs) - 1)]
    res = optimize.minimize_scalar(obj, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    if not res.success:
        raise IntegrationFailure("refinement of the population minimizer failed")
    z = float(res.x)
    rho = float(res.fun)
    m = tail_moment(family, z, p)
    m2 = tail_moment(family, z, 2 * p)
    if not math.isfinite(m2):
        return OracleResult(z, rho, math.inf)
    sigma = (c / p) * m ** ((1.0 - p) / p) * math.sqrt(max(m2 - m * m, 0.0))
    return OracleResult(z, rho, sigma)


def oracle_semideviation(family, p: float, kappa: float) -> OracleResult:
    """Population mean-semideviation and its limit sd (p > 1)."""
    if not p > 1:
        raise ParameterOutOfRange("the semideviation limit needs p > 1")
    if isinstance(family, PointMass):
        return OracleResult(None, family.value, 0.0)
    if isinstance(family, Empirical):
        from .asymptotics import limit_sd_semideviation
        est = limit_sd_semideviation(SampleSet(family.load()), p, kappa)
        return OracleResult(None, est.value, est.sd)
    dist = family.frozen()
    mu = float(dist.mean())
    var = float(dist.var())
    mp = tail_moment(family, mu, p)
    mp1 = tail_moment(family, mu, p - 1)
    m2p = tail_moment(family, mu, 2 * p)
    mp_plus = tail_moment(family, mu, p + 1)
    rho = mu + kappa * mp ** (1.0 / p)
    if not (math.isfinite(m2p) and math.isfinite(var)):
        return OracleResult(None, rho, math.inf)
    a = (kappa / p) * mp ** ((1.0 - p) / p)
    b = p * mp1
    # V1 = X - mu, V2 = D - E[D] with D = max(0, X - mu)^p; cov(V1, V2) = E[(X - mu)_+^(p+1)]
    coef1 = 1.0 - a * b
    var_xi = coef1 ** 2 * var + a ** 2 * (m2p - mp * mp) + 2 * coef1 * a * mp_plus
    return OracleResult(None, rho, math.sqrt(max(var_xi, 0.0)))


def oracle(spec, family) -> OracleResult:
    """Population oracle for a :class:`~riskclt.measures.MeasureSpec`."""
    from .measures import AVAR, HIGHER_ORDER

    spec = spec.resolved()
    if spec.kind == AVAR:
        return oracle_avar(family, spec.alpha)
    if spec.kind == HIGHER_ORDER:
        return oracle_higher_order(family, spec.p, spec.c)
    return oracle_semideviation(family, spec.p, spec.kappa)
