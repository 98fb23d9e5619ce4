"""Acceptance checks, one test per criterion, each recording a PASS/FAIL line."""
import math
import time
import warnings
import zlib

import numpy as np

from riskclt.asymptotics import (
    covariance_empirical,
    limit_sd_avar,
    limit_sd_higher_order,
    limit_sd_optimized,
)
from riskclt.distributions import DistributionSpec, Normal, oracle_higher_order, sample
from riskclt.errors import FlatQuantileWarning, NonUniqueMinimizer
from riskclt.functional import DirectionBundle, SampleSet, finite_diff_directional, mean_chain, xi_recursion
from riskclt.harness import experiment_path, format_report, load_config, run_experiment
from riskclt.measures import (
    MeasureSpec,
    avar_problem,
    build_semideviation,
    coherence_check,
    estimate_avar,
    estimate_higher_order,
    higher_order_problem,
    hmcr_objective,
)
from riskclt.optimizer import OptimizedFunctional, solve_low_dim

RESOLVED = Normal(10.0, math.sqrt(3.0))
Z_STAR, RHO, SIGMA = 14.5048, 15.5163, 16.032


def fmt(d):
    return ", ".join(f"{k}={v:.4g}" for k, v in d.items())


def run_config(name):
    return run_experiment(load_config(experiment_path(name)))


def test_criterion_1_ground_truth(criterion):
    assert load_config(experiment_path("normal_hmcr")).family == RESOLVED
    t0 = time.perf_counter()
    r = oracle_higher_order(RESOLVED, 2.0, 20.0)
    dt = time.perf_counter() - t0
    ok = abs(r.z - Z_STAR) <= 0.01 and abs(r.rho - RHO) <= 0.01 and abs(r.sigma - SIGMA) <= 0.05 and dt < 10
    criterion(1, ok, f"z*={r.z:.6f} rho={r.rho:.6f} sigma={r.sigma:.5f} time={dt:.2f}s")
    assert ok


def test_criterion_2_plugin_convergence(criterion):
    t0 = time.perf_counter()
    s = sample(DistributionSpec(RESOLVED, 1, 1_000_000))
    e = estimate_higher_order(s, 2.0, 20.0)
    dt = time.perf_counter() - t0
    ok = abs(e.value - RHO) <= 0.05 and abs(e.minimizer - Z_STAR) <= 0.05 and dt < 30
    criterion(2, ok, f"rho_n={e.value:.5f} z_n={e.minimizer:.5f} time={dt:.2f}s")
    assert ok


def test_criterion_3_clt_figure1(criterion):
    t0 = time.perf_counter()
    rep = run_config("normal_hmcr")
    dt = time.perf_counter() - t0
    ks = rep.ks()
    vals = [ks[n] for n in (1000, 2000, 4000, 8000)]
    decreasing = all(a > b for a, b in zip(vals, vals[1:]))
    ok = vals[-1] < 0.05 and decreasing and dt < 600
    criterion(3, ok, f"KS {fmt(ks)}; strictly decreasing={decreasing}; time={dt:.1f}s")
    assert ok


def test_criterion_4_delta_vs_monte_carlo(criterion):
    parts, ok = [], True
    for name in ("normal_avar", "normal_semideviation"):
        rep = run_config(name)
        n = rep.config.sizes[0]
        spread = float(np.std(math.sqrt(n) * (rep.results[0].estimates - rep.rho)))
        rel = abs(spread - rep.sigma) / rep.sigma
        ok &= rel <= 0.10
        parts.append(f"{rep.config.measure.label}: MC sd={spread:.4f} oracle={rep.sigma:.4f} rel={rel:.3f}")
    criterion(4, ok, "; ".join(parts))
    assert ok


def test_criterion_5_heavy_tails(criterion):
    ks = {df: run_config(f"t{df}_hmcr").results[0].ks for df in (60, 8, 6, 4)}
    ok = ks[60] < ks[8] < ks[6] and ks[4] >= 2 * ks[6]
    criterion(5, ok, f"KS t60={ks[60]:.4f} t8={ks[8]:.4f} t6={ks[6]:.4f} t4={ks[4]:.4f} t4/t6={ks[4] / ks[6]:.2f}")
    assert ok


def test_criterion_6_p_sweep(criterion):
    names = {1.0: "normal_p1_0", 1.5: "normal_p1_5", 2.0: "normal_p2_0", 2.5: "normal_p2_5"}
    reps = {p: run_config(n) for p, n in names.items()}
    assert reps[1.0].config.measure.resolved().kind == "avar"
    ks = [reps[p].results[0].ks for p in sorted(reps)]
    ok = all(a <= b for a, b in zip(ks, ks[1:]))
    criterion(6, ok, "KS " + ", ".join(f"p={p:g}: {k:.4f}" for p, k in zip(sorted(reps), ks)))
    assert ok


def _coherence_worst():
    specs = [MeasureSpec("semideviation", p=2.0, kappa=0.5), MeasureSpec("avar", alpha=0.1),
             MeasureSpec("hmcr", p=2.0, c=5.0)]
    worst = 0.0
    for spec in specs:
        rng = np.random.default_rng(zlib.crc32(spec.label.encode()) + 1)
        for _ in range(200):
            xs = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 3), size=int(rng.integers(2, 80)))
            r = coherence_check(spec, SampleSet.from_values(xs), float(rng.uniform(-10, 10)), float(rng.uniform(0.1, 10)))
            worst = max(worst, r.max_abs())
    return worst


def _xi_worst():
    cf = build_semideviation(2, 0.5)
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        s = SampleSet.from_values(rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 2), 300))
        c1, c2, last = rng.normal(size=3)
        d = DirectionBundle((lambda e, c1=c1: np.array([c1 * e[0]]), lambda e, c2=c2: np.array([c2 + e[0]])),
                            np.array([last]))
        xi = xi_recursion(cf, mean_chain(cf, s), d, s)
        worst = max(worst, abs(xi - finite_diff_directional(cf, s, d, 1e-6)) / abs(xi))
    return worst


def _psd_all():
    rng = np.random.default_rng(5)
    for _ in range(100):
        s = SampleSet.from_values(rng.standard_t(5, size=int(rng.integers(2, 500))))
        p = float(rng.uniform(1.2, 3))
        if not covariance_empirical(build_semideviation(p, float(rng.uniform()), sample=s), s).is_psd():
            return False
    return True


def _certificates():
    rng = np.random.default_rng(11)
    for i in range(100):
        xs = rng.normal(rng.uniform(-5, 5), rng.uniform(0.2, 3), size=int(rng.integers(20, 400)))
        s = SampleSet.from_values(xs)
        p, c = float(rng.uniform(1.1, 3.0)), float(rng.uniform(1.5, 10))
        e = estimate_higher_order(s, p, c)
        f = hmcr_objective(s, p, c)
        h, slack = 1e-7, 1e-6 * c * (1 + abs(e.minimizer))
        if (f(e.minimizer) - f(e.minimizer - h)) / h > slack or (f(e.minimizer + h) - f(e.minimizer)) / h < -slack:
            return False
        d = int(rng.integers(1, 3))
        u0 = rng.uniform(-1.5, 1.5, size=d)
        prob = OptimizedFunctional([-1.0] * d, [1.0] * d, lambda z, eta, u0=u0: float(np.sum((z - u0) ** 2 + np.cos(2 * z))),
                                   lambda z, eta: np.array([0.0]), lambda z, x: np.zeros((x.shape[0], 1)))
        if not solve_low_dim(prob, s, seed=i).certified:
            return False
    return True


def _determinism():
    cfg = load_config(experiment_path("normal_hmcr"))
    from dataclasses import replace
    cfg = replace(cfg, sizes=(500, 1000), m=200)
    return len({format_report(run_experiment(cfg, threads=t)) for t in (1, 2, 5)}) == 1


def test_criterion_7_property_suites(criterion):
    coh = _coherence_worst()
    xi = _xi_worst()
    psd = _psd_all()
    cert = _certificates()
    det = _determinism()
    ok = coh <= 1e-8 and xi <= 1e-4 and psd and cert and det
    criterion(7, ok, f"coherence max={coh:.2e}; xi vs FD rel={xi:.2e}; PSD={psd}; certificates={cert}; "
                     f"thread determinism={det}")
    assert ok


def test_criterion_8_cross_path(criterion):
    rng = np.random.default_rng(2015)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(50, 3000))
        s = SampleSet.from_values(rng.normal(rng.uniform(-10, 10), rng.uniform(0.1, 5), size=n))
        alpha = float(rng.uniform(0.01, 0.9))
        p = float(rng.uniform(1.1, 3.5))
        c = float(rng.uniform(1.5, min(30.0, 0.9 * n ** (1 / p))))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FlatQuantileWarning)
            warnings.simplefilter("ignore", NonUniqueMinimizer)
            pairs = [(limit_sd_avar(s, alpha), limit_sd_optimized(avar_problem(s, alpha), s)),
                     (limit_sd_higher_order(s, p, c), limit_sd_optimized(higher_order_problem(s, p, c), s))]
        for a, b in pairs:
            worst = max(worst, abs(a.sd - b.sd) / a.sd)
    ok = worst <= 1e-9
    criterion(8, ok, f"max relative sd difference={worst:.2e} over 50 samples")
    assert ok
