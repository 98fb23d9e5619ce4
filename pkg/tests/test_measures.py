import math
import warnings
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from riskclt.errors import FlatQuantileWarning, ParameterOutOfRange
from riskclt.functional import SampleSet, evaluate_plugin
from riskclt.measures import (
    MeasureSpec,
    avar_tail_average,
    build_semideviation,
    coherence_check,
    estimate,
    estimate_avar,
    estimate_higher_order,
    estimate_semideviation,
    hmcr_objective,
)

SPECS = [
    MeasureSpec("semideviation", p=2.0, kappa=0.5),
    MeasureSpec("semideviation", p=1.5, kappa=1.0),
    MeasureSpec("avar", alpha=0.1),
    MeasureSpec("hmcr", p=2.0, c=5.0),
    MeasureSpec("hmcr", p=3.0, c=2.0),
]


def S(xs):
    return SampleSet.from_values(xs)


def brute_avar(xs, alpha, step=1e-4):
    xs = np.asarray(xs, float)
    zs = np.arange(xs.min() - 1, xs.max() + 1 + step, step)
    vals = zs + np.maximum(0.0, xs[None, :] - zs[:, None]).mean(axis=1) / alpha
    return vals.min()


def brute_hmcr(xs, p, c, lo, hi, step=1e-5):
    """Independent dense-grid minimization with its own moment code."""
    xs = np.asarray(xs, float)
    best = math.inf
    for z0 in np.arange(lo, hi, 0.5):
        zs = np.arange(z0, min(z0 + 0.5, hi) + step / 2, step)
        m = np.zeros_like(zs)
        for x in xs:
            m += np.maximum(x - zs, 0.0) ** p
        best = min(best, float(np.min(zs + c * (m / len(xs)) ** (1.0 / p))))
    return best


# ---------------------------------------------------------------- spec validation

@pytest.mark.parametrize("kw", [
    dict(kind="avar", alpha=0.0), dict(kind="avar", alpha=1.5), dict(kind="hmcr", p=0.5, c=2.0),
    dict(kind="hmcr", p=2.0, c=1.0), dict(kind="semideviation", p=2.0, kappa=1.5), dict(kind="bogus"),
])
def test_spec_ranges(kw):
    with pytest.raises(ParameterOutOfRange):
        MeasureSpec(**kw)


def test_hmcr_p1_redirects_to_avar():
    r = MeasureSpec("hmcr", p=1.0, c=20.0).resolved()
    assert r.kind == "avar" and r.alpha == pytest.approx(0.05)


# ---------------------------------------------------------------- semideviation

def test_semideviation_values():
    assert_allclose(estimate_semideviation(S([-1, 1]), 2, 0.5).value, 0.35355339059327373, rtol=1e-15)
    xs = np.random.default_rng(0).normal(size=50)
    assert estimate_semideviation(S(xs), 2, 0.0).value == evaluate_plugin(build_semideviation(2, 0.0), S(xs))
    assert_allclose(estimate_semideviation(S(xs), 2, 0.0).value, xs.mean(), rtol=1e-13)
    assert estimate_semideviation(S([3.25] * 9), 1.7, 0.8).value == 3.25


def test_semideviation_direct_formula():
    xs = np.random.default_rng(1).standard_t(5, size=400)
    p, k = 3.0, 0.6
    direct = xs.mean() + k * np.mean(np.maximum(0, xs - xs.mean()) ** p) ** (1 / p)
    assert_allclose(estimate_semideviation(S(xs), p, k).value, direct, rtol=1e-12)


# ---------------------------------------------------------------- AVaR

def test_avar_examples():
    e = estimate_avar(S([1, 2, 3, 4]), 0.5)
    assert e.value == 3.5 and e.minimizer == 2.0
    assert estimate_avar(S([7.5]), 0.3).value == 7.5
    assert estimate_avar(S([0, 1]), 1.0).value == 0.5


@pytest.mark.parametrize("seed", range(8))
def test_avar_grid_brute_force(seed):
    rng = np.random.default_rng(seed)
    xs = rng.normal(size=rng.integers(3, 30))
    alpha = float(rng.uniform(0.05, 1.0))
    assert_allclose(estimate_avar(S(xs), alpha).value, brute_avar(xs, alpha), atol=1e-4)


def test_avar_equals_tail_average_on_1000_samples():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        xs = rng.normal(size=n) if rng.random() < 0.7 else rng.integers(0, 4, size=n).astype(float)
        alpha = float(rng.choice([0.05, 0.1, 0.25, 0.5, 1.0, rng.uniform(0.01, 1)]))
        a = estimate_avar(S(xs), alpha).value
        b = avar_tail_average(S(xs), alpha)
        assert abs(a - b) <= 1e-12 * (1 + abs(b)), (xs, alpha)


def test_avar_minimizer_is_left_endpoint():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        e = estimate_avar(S([4, 1, 3, 2]), 0.5)
    assert e.minimizer == 2.0


# ---------------------------------------------------------------- higher order

def test_hmcr_constant_sample():
    e = estimate_higher_order(S([2.5] * 10), 2, 20)
    assert_allclose(e.value, 2.5, rtol=1e-12)
    assert_allclose(e.minimizer, 2.5, atol=1e-7)


def test_hmcr_three_points_grid_oracle():
    v = estimate_higher_order(S([0, 1, 2]), 2, 2).value
    assert abs(v - brute_hmcr([0, 1, 2], 2.0, 2.0, -1.0, 3.0)) <= 1e-4


@pytest.mark.parametrize("seed", range(4))
def test_hmcr_random_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    xs = rng.normal(size=12)
    p, c = float(rng.uniform(1.2, 3)), float(rng.uniform(1.5, 6))
    v = estimate_higher_order(S(xs), p, c).value
    assert abs(v - brute_hmcr(xs, p, c, xs.min() - 1, xs.max() + 0.5)) <= 1e-4


@pytest.mark.parametrize("seed", range(10))
def test_hmcr_first_order_condition(seed):
    rng = np.random.default_rng(seed)
    xs = rng.normal(10, 2, size=int(rng.integers(5, 500)))
    p, c = float(rng.uniform(1.1, 3)), float(rng.uniform(1.5, 25))
    e = estimate_higher_order(S(xs), p, c)
    f = hmcr_objective(S(xs), p, c)
    h = 1e-7
    left = (f(e.minimizer) - f(e.minimizer - h)) / h
    right = (f(e.minimizer + h) - f(e.minimizer)) / h
    slack = 1e-6 * (1 + abs(e.minimizer)) * max(1.0, c)
    assert left <= slack and right >= -slack


def test_p_to_one_continuity():
    xs = np.random.default_rng(7).normal(size=2000)
    for alpha in (0.05, 0.2, 0.5):
        h = estimate_higher_order(S(xs), 1 + 1e-3, 1 / alpha).value
        a = estimate_avar(S(xs), alpha).value
        assert abs(h - a) <= 1e-2 * abs(a)


def test_hmcr_at_least_mean_and_avar():
    xs = np.random.default_rng(8).normal(size=300)
    h = estimate_higher_order(S(xs), 2, 10).value
    assert h >= estimate_avar(S(xs), 0.1).value - 1e-12 >= xs.mean() - 1e-12


# ---------------------------------------------------------------- coherence

def test_coherence_examples():
    xs = np.random.default_rng(3).normal(size=100)
    r = coherence_check(MeasureSpec("semideviation", p=2, kappa=0.5), S(xs), 5.0, 2.0)
    assert abs(r.translation) <= 1e-12
    r = coherence_check(MeasureSpec("avar", alpha=0.2), S(xs), 1.0, 3.0)
    assert abs(r.homogeneity) <= 1e-9
    s = S([0, 1, 2, 3])
    assert estimate(MeasureSpec("hmcr", p=2, c=4), S([-1, 0, 1, 2])).value <= estimate(MeasureSpec("hmcr", p=2, c=4), s).value


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
def test_coherence_residuals_randomized(spec):
    rng = np.random.default_rng(zlib.crc32(spec.label.encode()))
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 80))
        xs = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 3), size=n)
        a = float(rng.uniform(-10, 10))
        lam = float(rng.uniform(0.1, 10))
        r = coherence_check(spec, S(xs), a, lam)
        worst = max(worst, r.max_abs())
    assert worst <= 1e-8


def test_coherence_rejects_bad_lambda():
    with pytest.raises(ParameterOutOfRange):
        coherence_check(SPECS[0], S([1, 2]), 0.0, -1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30), st.floats(0.01, 1.0))
def test_avar_between_mean_and_max(xs, alpha):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FlatQuantileWarning)
        v = estimate_avar(S(xs), alpha).value
    tol = 1e-9 * (1 + max(abs(x) for x in xs))
    assert np.mean(xs) - tol <= v <= max(xs) + tol
