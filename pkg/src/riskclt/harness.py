"""Monte Carlo check of the normal approximation.

For every sample size ``n`` the harness draws ``m`` independent samples,
computes the plug-in estimate on each, and compares the standardized
replicates with the standard normal law through a density histogram and
the Kolmogorov distance.

Replicate ``r`` at size ``n`` always uses the Philox substream keyed by
``(master seed, n, r)`` and results are stored by index, so a report does
not depend on how many worker threads were used.
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import ndtr

from . import distributions as dist
from .errors import DegenerateInput, ParameterOutOfRange, RiskCLTError
from .measures import AVAR, HIGHER_ORDER, SEMIDEVIATION, MeasureSpec, estimate

ORACLE = "oracle"
PLUGIN = "plugin"
REPORT_HEADER = "# riskclt simulation report v1"


@dataclass(frozen=True)
class ExperimentConfig:
    family: object
    measure: MeasureSpec
    sizes: tuple
    m: int
    seed: int = 20150417
    standardize: str = ORACLE
    bins: str = "sqrt"

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        if self.m < 2:
            raise ParameterOutOfRange("replication count m must be >= 2")
        if not self.sizes or any(n < 2 for n in self.sizes):
            raise ParameterOutOfRange("every sample size must be >= 2")
        if self.standardize not in (ORACLE, PLUGIN):
            raise ParameterOutOfRange(f"unknown standardization {self.standardize!r}")
        if self.bins != "sqrt":
            raise ParameterOutOfRange("only the 'sqrt' histogram rule is supported")


@dataclass
class SizeResult:
    n: int
    estimates: np.ndarray
    failures: int
    bin_edges: np.ndarray
    densities: np.ndarray
    overlay_mean: float
    overlay_sd: float
    ks: float
    degenerate: bool = False
    plugin_sds: Optional[np.ndarray] = None


@dataclass
class SimulationReport:
    config: ExperimentConfig
    rho: float
    sigma: float
    minimizer: Optional[float]
    sigma_source: str
    results: list
    elapsed: float = field(default=0.0, compare=False)

    def by_n(self, n: int) -> SizeResult:
        for r in self.results:
            if r.n == n:
                return r
        raise KeyError(n)

    def ks(self) -> dict:
        return {r.n: r.ks for r in self.results}


# ---------------------------------------------------------------- statistics

def ks_distance(values, mu: float, sigma: float) -> float:
    """sup |F_m(x) - Phi((x - mu)/sigma)| evaluated at the jump points of F_m."""
    if not sigma > 0:
        raise DegenerateInput("sigma must be positive")
    v = np.sort(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(v)):
        raise DegenerateInput("values must be finite")
    m = v.shape[0]
    cdf = ndtr((v - mu) / sigma)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


def histogram(values, m: int):
    """Equal-width density histogram with round(sqrt(m)) bins over [min, max]."""
    bins = max(int(round(math.sqrt(m))), 1)
    heights, edges = np.histogram(values, bins=bins, density=True)
    return edges, heights


def bias_summary(report: SimulationReport) -> dict:
    """mean(replicates) - rho for every sample size."""
    out = {}
    for r in report.results:
        ok = r.estimates[np.isfinite(r.estimates)]
        out[r.n] = float(np.mean(ok) - report.rho) if ok.size else math.nan
    return out


# ---------------------------------------------------------------- runner

def default_threads() -> int:
    env = os.environ.get("RISKCLT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterOutOfRange(f"RISKCLT_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _replicate(cfg: ExperimentConfig, n: int, r: int, want_sd: bool):
    """(estimate, plug-in sd, failed); a failed sd keeps the estimate."""
    s = dist.sample(dist.DistributionSpec(cfg.family, cfg.seed, n), n, r)
    est = estimate(cfg.measure, s)
    if not want_sd:
        return est.value, math.nan, False
    try:
        return est.value, _plugin_sd(cfg.measure, s), False
    except (RiskCLTError, ArithmeticError, ValueError):
        return est.value, math.nan, True


def _plugin_sd(spec: MeasureSpec, s) -> float:
    from .asymptotics import limit_sd_avar, limit_sd_higher_order, limit_sd_semideviation

    spec = spec.resolved()
    if spec.kind == AVAR:
        return limit_sd_avar(s, spec.alpha).sd
    if spec.kind == HIGHER_ORDER:
        return limit_sd_higher_order(s, spec.p, spec.c).sd
    return limit_sd_semideviation(s, spec.p, spec.kappa).sd


def _run_chunk(cfg, n, indices, want_sd):
    vals = np.full(len(indices), math.nan)
    sds = np.full(len(indices), math.nan)
    fails = 0
    for k, r in enumerate(indices):
        try:
            vals[k], sds[k], failed = _replicate(cfg, n, r, want_sd)
        except (RiskCLTError, ArithmeticError, ValueError):
            failed = True
        fails += failed
    return indices, vals, sds, fails


def population_parameters(cfg: ExperimentConfig):
    """(rho, sigma, minimizer, source) for the overlay normal."""
    try:
        orc = dist.oracle(cfg.measure, cfg.family)
    except RiskCLTError:
        return math.nan, math.inf, None, "unavailable"
    return orc.rho, orc.sigma, orc.z, "oracle"


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None) -> SimulationReport:
    """Replicate the estimator ``cfg.m`` times at every size in ``cfg.sizes``.

    With ``standardize='oracle'`` replicates are standardized by the
    population oracle (rho, sigma / sqrt(n)); with ``'plugin'`` each
    replicate uses its own plug-in limit sd.  Oracle mode falls back to
    plug-in standardization when the population sd is infinite.  Replicate failures are counted
    and excluded instead of aborting the run.
    """
    t0 = time.perf_counter()
    threads = default_threads() if threads is None else max(1, int(threads))
    rho, sigma, zstar, source = population_parameters(cfg)
    want_sd = cfg.standardize == PLUGIN
    if not want_sd and not math.isfinite(sigma) and math.isfinite(rho):
        # no population limit sd exists (e.g. infinite 2p-th moment):
        # standardize each replicate by its own plug-in sd instead
        want_sd = True
        source = "plugin (oracle sigma infinite)"
    results = []
    for n in cfg.sizes:
        vals = np.full(cfg.m, math.nan)
        sds = np.full(cfg.m, math.nan)
        chunks = np.array_split(np.arange(cfg.m), min(threads * 4, cfg.m))
        failures = 0
        if threads == 1:
            outs = [_run_chunk(cfg, n, c, want_sd) for c in chunks]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outs = list(pool.map(lambda c: _run_chunk(cfg, n, c, want_sd), chunks))
        for idx, v, sd, f in outs:
            vals[idx] = v
            sds[idx] = sd
            failures += f
        results.append(_summarize(cfg, n, vals, sds if want_sd else None, failures, rho, sigma))
    return SimulationReport(cfg, rho, sigma, zstar, source, results, time.perf_counter() - t0)


def _summarize(cfg, n, vals, sds, failures, rho, sigma) -> SizeResult:
    ok = np.isfinite(vals)
    good = vals[ok]
    se = sigma / math.sqrt(n) if math.isfinite(sigma) else math.nan
    if good.size == 0:
        return SizeResult(n, vals, failures, np.array([]), np.array([]), rho, se, 1.0, True, sds)
    edges, heights = histogram(good, good.size)
    degenerate = bool(np.ptp(good) == 0)
    if sds is not None:
        ok_sd = ok & np.isfinite(sds) & (sds > 0)
        if degenerate or not np.any(ok_sd):
            ks = 1.0
            degenerate = True
        else:
            zs = (vals[ok_sd] - rho) / (sds[ok_sd] / math.sqrt(n))
            ks = ks_distance(zs, 0.0, 1.0)
    elif degenerate or not (math.isfinite(se) and se > 0 and math.isfinite(rho)):
        # point-mass convention: no normal overlay applies
        ks = 1.0
        degenerate = True
    else:
        ks = ks_distance((good - rho) / se, 0.0, 1.0)
    return SizeResult(n, vals, failures, edges, heights, rho, se, ks, degenerate, sds)


# ---------------------------------------------------------------- I/O

def _fmt(x) -> str:
    return format(float(x), ".17g")


def _fmt_array(a) -> str:
    return " ".join(_fmt(v) for v in a)


def format_report(report: SimulationReport) -> str:
    """Structured text: ``key = value`` lines, arrays space-separated,
    one ``[n = ...]`` section per sample size.  Numbers use 17 significant
    digits.  Wall-clock time is not written so output stays reproducible."""
    cfg = report.config
    lines = [
        REPORT_HEADER,
        f"measure = {cfg.measure.label}",
        f"family = {getattr(cfg.family, 'name', cfg.family)}",
        f"m = {cfg.m}",
        f"seed = {cfg.seed}",
        f"standardize = {cfg.standardize}",
        f"sizes = {' '.join(str(n) for n in cfg.sizes)}",
        f"rho = {_fmt(report.rho)}",
        f"sigma = {_fmt(report.sigma)}",
        f"minimizer = {'none' if report.minimizer is None else _fmt(report.minimizer)}",
        f"sigma_source = {report.sigma_source}",
    ]
    bias = bias_summary(report)
    for r in report.results:
        lines += [
            "",
            f"[n = {r.n}]",
            f"ks = {_fmt(r.ks)}",
            f"bias = {_fmt(bias[r.n])}",
            f"failures = {r.failures}",
            f"degenerate = {str(r.degenerate).lower()}",
            f"overlay_mean = {_fmt(r.overlay_mean)}",
            f"overlay_sd = {_fmt(r.overlay_sd)}",
            f"bins = {len(r.densities)}",
            f"bin_edges = {_fmt_array(r.bin_edges)}",
            f"densities = {_fmt_array(r.densities)}",
            f"estimates = {_fmt_array(r.estimates)}",
        ]
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    """Inverse of :func:`format_report` into nested dicts (arrays as numpy)."""
    top, sections, cur = {}, {}, None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            n = int(line[1:-1].split("=")[1])
            cur = sections.setdefault(n, {})
            continue
        key, _, val = line.partition(" = ")
        target = top if cur is None else cur
        if key in ("bin_edges", "densities", "estimates"):
            target[key] = np.array([float(v) for v in val.split()]) if val else np.array([])
        else:
            target[key] = val
    top["sections"] = sections
    return top


def write_report(report: SimulationReport, path) -> None:
    Path(path).write_text(format_report(report))


def format_table(report: SimulationReport) -> str:
    """Flat CSV of (n, replicate, estimate) rows for external plotting."""
    rows = ["n,replicate,estimate"]
    for r in report.results:
        for j, v in enumerate(r.estimates):
            rows.append(f"{r.n},{j},{_fmt(v)}")
    return "\n".join(rows) + "\n"


def write_table(report: SimulationReport, path) -> None:
    Path(path).write_text(format_table(report))


# ---------------------------------------------------------------- configs

def family_from_dict(d: dict):
    kind = d.get("family", "normal")
    if kind == "normal":
        return dist.Normal(float(d.get("mean", 0.0)), float(d["sd"]) if "sd" in d else math.sqrt(float(d.get("variance", 1.0))))
    if kind == "t":
        return dist.StudentT(float(d["df"]), float(d.get("shift", 0.0)))
    if kind == "point":
        return dist.PointMass(float(d["value"]))
    if kind == "empirical":
        return dist.Empirical(str(d["path"]))
    raise ParameterOutOfRange(f"unknown family {kind!r}")


def measure_from_dict(d: dict) -> MeasureSpec:
    kind = d.get("measure", HIGHER_ORDER)
    if kind == AVAR:
        return MeasureSpec(AVAR, p=1.0, alpha=float(d["alpha"]))
    if kind == SEMIDEVIATION:
        return MeasureSpec(SEMIDEVIATION, p=float(d.get("p", 2.0)), kappa=float(d.get("kappa", 0.5)))
    if kind == HIGHER_ORDER:
        return MeasureSpec(HIGHER_ORDER, p=float(d.get("p", 2.0)), c=float(d.get("c", 20.0)))
    raise ParameterOutOfRange(f"unknown measure {kind!r}")


def load_config(path) -> ExperimentConfig:
    """Read an experiment config (JSON with ``distribution``, ``measure``,
    ``sizes``, ``m``, ``seed``, optional ``standardize``)."""
    d = json.loads(Path(path).read_text())
    return ExperimentConfig(
        family=family_from_dict(d["distribution"]),
        measure=measure_from_dict(d["measure"]),
        sizes=tuple(d["sizes"]),
        m=int(d["m"]),
        seed=int(d.get("seed", ExperimentConfig.seed)),
        standardize=d.get("standardize", ORACLE),
    )


def experiment_path(name: str) -> Path:
    """Path of a bundled experiment config, e.g. ``'normal_hmcr'``."""
    p = Path(__file__).with_name("experiments") / (name if name.endswith(".json") else name + ".json")
    if not p.is_file():
        raise FileNotFoundError(p)
    return p
