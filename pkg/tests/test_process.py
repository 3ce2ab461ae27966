from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from embasket.default_curve import estimate_default_curve
from embasket.errors import DomainError, MissingBarrierError
from embasket.process import (
    PathConfig,
    ProcessParams,
    conditional_default_probabilities,
    diffusion_first_passage_cdf,
    martingale_drift,
    simulate_crossings,
    simulate_pair_crossings,
)


@pytest.mark.parametrize(
    "sigma, lam, xi, expected",
    [(0.0, 0.0, 0.25, 0.0), (0.2, 0.5, 0.25, 0.08), (0.32, 0.5, 0.25, 0.0488)],
)
def test_martingale_drift_examples(sigma, lam, xi, expected):
    assert martingale_drift(sigma, lam, xi) == pytest.approx(expected, abs=1e-15)


def test_martingale_drift_rejects_bad_jump_size():
    with pytest.raises(DomainError):
        martingale_drift(0.2, 0.5, 0.0)
    # xi is irrelevant without jumps
    assert martingale_drift(0.2, 0.0, 0.0) == pytest.approx(-0.02)


@pytest.mark.parametrize("kwargs", [dict(sigma=0.0, lam=0.5, xi=0.2), dict(sigma=2.1, lam=0.5, xi=0.2),
                                    dict(sigma=0.2, lam=4.5, xi=0.2), dict(sigma=0.2, lam=0.5, xi=0.0),
                                    dict(sigma=0.2, lam=-0.1, xi=0.2)])
def test_params_box(kwargs):
    with pytest.raises(DomainError):
        ProcessParams(**kwargs)


def test_params_drift_is_derived():
    p = ProcessParams(0.32, 0.5, 0.25)
    assert p.mu == martingale_drift(0.32, 0.5, 0.25)
    assert p.replace(sigma=0.2).mu == pytest.approx(0.08)


def test_path_config_validation():
    with pytest.raises(DomainError):
        PathConfig(horizon=1.0, dt=0.3)
    with pytest.raises(DomainError):
        PathConfig(n_paths=0)
    assert PathConfig(horizon=10, dt=1 / 250).n_steps == 2500


def test_cdf_examples():
    assert diffusion_first_passage_cdf(0.2, 0.08, 1.0, 0.0) == 0.0
    assert diffusion_first_passage_cdf(0.2, 0.0, 1.0, 25.0) == pytest.approx(2 * norm.cdf(-1), abs=1e-12)
    # integral of the first-passage density over [0, 5]
    assert diffusion_first_passage_cdf(0.2, 0.08, 1.0, 5.0) == pytest.approx(0.00251833392976308, rel=1e-10)


def test_cdf_errors_and_shape():
    with pytest.raises(DomainError):
        diffusion_first_passage_cdf(0.0, 0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        diffusion_first_passage_cdf(0.2, 0.0, 0.0, 1.0)
    out = diffusion_first_passage_cdf(0.2, -0.02, 1.0, np.array([0.0, 1.0, 5.0, 10.0]))
    assert out.shape == (4,)
    assert np.all(np.diff(out) > 0)


@settings(max_examples=30, deadline=None)
@given(sigma=st.floats(0.05, 1.0), mu=st.floats(-0.3, 0.3), level=st.floats(0.1, 2.0),
       t=st.floats(0.01, 30.0))
def test_cdf_is_a_probability_and_monotone_in_level(sigma, mu, level, t):
    p = diffusion_first_passage_cdf(sigma, mu, level, t)
    deeper = diffusion_first_passage_cdf(sigma, mu, level * 1.5, t)
    assert 0.0 <= deeper <= p + 1e-12 <= 1.0 + 1e-12


def test_tiny_volatility_never_crosses():
    rec = simulate_crossings(ProcessParams(0.01, 0.0, 0.25), [1.0], PathConfig(horizon=5, n_paths=2000, seed=1))
    assert np.all(np.isinf(rec.times[:, 0]))


def test_diffusion_oracle():
    p = ProcessParams(0.2, 0.0, 0.25)
    cfg = PathConfig(horizon=25, dt=0.05, n_paths=40_000, seed=3)
    rec = simulate_crossings(p, [1.0], cfg)
    for t in (1.0, 5.0, 10.0, 25.0):
        emp = np.mean(rec.times[:, 0] <= t)
        th = diffusion_first_passage_cdf(p.sigma, p.mu, 1.0, t)
        se = math.sqrt(th * (1 - th) / cfg.n_paths)
        assert abs(emp - th) <= max(3.5 * se, 0.01 * th)


def test_crossing_law_does_not_depend_on_grid():
    # the bridge minimum is exact in law, so even one step per year is unbiased
    p = ProcessParams(0.25, 0.0, 0.25)
    rec = simulate_crossings(p, [0.8], PathConfig(horizon=4, dt=1.0, n_paths=100_000, seed=5))
    th = diffusion_first_passage_cdf(p.sigma, p.mu, 0.8, 4.0)
    se = math.sqrt(th * (1 - th) / 100_000)
    assert abs(np.mean(np.isfinite(rec.times[:, 0])) - th) < 3.5 * se


def test_martingale_and_jump_rate():
    p = ProcessParams(0.32, 0.5, 0.25)
    cfg = PathConfig(horizon=5, dt=0.02, n_paths=40_000, seed=9)
    rec = simulate_crossings(p, [1.0], cfg, observe=(1.0, 5.0), full=True)
    for t in (1.0, 5.0):
        v = np.exp(rec.values_at(t))
        assert abs(v.mean() - 1) < 3.5 * v.std(ddof=1) / math.sqrt(v.size)
    rate = rec.jumps / cfg.horizon
    assert abs(rate.mean() - p.lam) < 3.5 * rate.std(ddof=1) / math.sqrt(rate.size)


def test_injected_drift_breaks_martingale():
    p = ProcessParams(0.2, 0.25, 0.25)
    cfg = PathConfig(horizon=10, dt=0.1, n_paths=40_000, seed=2)
    v = np.exp(simulate_crossings(p, [1.0], cfg, observe=(10.0,), mu_shift=0.01).values_at(10.0))
    assert (v.mean() - 1) / (v.std(ddof=1) / math.sqrt(v.size)) > 3


def test_barrier_monotonicity_every_path():
    p = ProcessParams(0.3, 1.0, 0.3)
    bars = [0.5, 0.85, 1.0, 1.2, 1.45]
    rec = simulate_crossings(p, bars, PathConfig(horizon=10, dt=0.02, n_paths=20_000, seed=4))
    assert np.all(rec.times[:, :-1] <= rec.times[:, 1:])
    assert np.all(rec.times[np.isfinite(rec.times)] <= 10.0)


def test_infinite_barrier_is_never_crossed():
    rec = simulate_crossings(ProcessParams(0.3, 1.0, 0.3), [1.0, math.inf],
                             PathConfig(horizon=5, dt=0.05, n_paths=2000, seed=4))
    assert np.all(np.isinf(rec.times_for(math.inf)))


def test_barrier_validation():
    p = ProcessParams(0.2, 0.0, 0.25)
    cfg = PathConfig(horizon=1, dt=0.1, n_paths=10)
    for bad in ([], [0.0], [1.0, 1.0], [1.2, 1.0]):
        with pytest.raises(DomainError):
            simulate_crossings(p, bad, cfg)
    rec = simulate_crossings(p, [1.0], cfg)
    with pytest.raises(MissingBarrierError):
        rec.times_for(1.2)


def test_determinism_and_worker_independence():
    p = ProcessParams(0.3, 0.5, 0.25)
    cfg = PathConfig(horizon=5, dt=0.02, n_paths=3001, seed=17)
    base = simulate_crossings(p, [1.0, 1.2], cfg, observe=(5.0,), full=True)
    assert base.same_as(simulate_crossings(p, [1.0, 1.2], cfg, observe=(5.0,), full=True))
    for workers in (2, 3, 7):
        assert base.same_as(simulate_crossings(p, [1.0, 1.2], cfg, observe=(5.0,), full=True, workers=workers))
    other = simulate_crossings(p, [1.0, 1.2], cfg.replace(seed=18), observe=(5.0,), full=True)
    assert not base.same_as(other)


def test_path_prefix_is_stable():
    # paths are keyed by index, so growing the sample keeps existing paths
    p = ProcessParams(0.3, 0.5, 0.25)
    small = simulate_crossings(p, [1.0], PathConfig(horizon=5, dt=0.02, n_paths=500, seed=1))
    big = simulate_crossings(p, [1.0], PathConfig(horizon=5, dt=0.02, n_paths=1500, seed=1))
    np.testing.assert_array_equal(small.times, big.times[:500])


def test_pair_rho_one_identical():
    p = ProcessParams(0.25, 0.0, 0.25)
    cfg = PathConfig(horizon=5, dt=0.02, n_paths=5000, seed=8)
    pair = simulate_pair_crossings(p, p, 1.0, [1.0, 1.2], [1.0, 1.2], cfg, observe=(5.0,))
    np.testing.assert_array_equal(pair.corporate.times, pair.country.times)
    np.testing.assert_array_equal(pair.corporate.values, pair.country.values)


def test_country_leg_invariant_in_rho_and_matches_single():
    pa = ProcessParams(0.18, 0.125, 0.27)
    pc = ProcessParams(0.32, 0.5, 0.25)
    cfg = PathConfig(horizon=5, dt=0.02, n_paths=3000, seed=8)
    legs = [simulate_pair_crossings(pa, pc, rho, [1.0], [1.0, 1.2], cfg).country for rho in (-0.5, 0.0, 0.8)]
    assert legs[0].same_as(legs[1]) and legs[1].same_as(legs[2])
    assert legs[0].same_as(simulate_crossings(pc, [1.0, 1.2], cfg))


@pytest.mark.parametrize("rho", [0.0, 0.8])
def test_pair_correlation(rho):
    pa = ProcessParams(0.18, 0.0, 0.27)
    pc = ProcessParams(0.32, 0.0, 0.25)
    cfg = PathConfig(horizon=1, dt=0.05, n_paths=20_000, seed=12)
    pair = simulate_pair_crossings(pa, pc, rho, [5.0], [5.0], cfg, observe=(1.0,))
    r = np.corrcoef(pair.corporate.values_at(1.0), pair.country.values_at(1.0))[0, 1]
    se = (1 - rho * rho) / math.sqrt(cfg.n_paths)
    assert abs(r - rho) < 3.5 * max(se, 1e-3)


def test_pair_rejects_bad_rho():
    p = ProcessParams(0.2, 0.0, 0.25)
    with pytest.raises(DomainError):
        simulate_pair_crossings(p, p, 1.01, [1.0], [1.0], PathConfig(horizon=1, dt=0.1, n_paths=10))


GRID = np.array([0.5, 1.0, 2.0, 5.0, 10.0])


def test_conditional_estimator_matches_closed_form():
    p = ProcessParams(0.2, 0.0, 0.5)
    cfg = PathConfig(horizon=10, dt=1 / 12, n_paths=40_000, seed=21)
    est, se = conditional_default_probabilities(p, 1.0, cfg, GRID)
    exact = diffusion_first_passage_cdf(0.2, p.mu, 1.0, GRID)
    assert np.all(np.abs(est - exact) <= np.maximum(4 * se, 2e-4))


def test_conditional_estimator_matches_crossings_with_jumps():
    p = ProcessParams(0.25, 0.5, 0.3)
    cfg = PathConfig(horizon=10, dt=1 / 12, n_paths=20_000, seed=4)
    est, se = conditional_default_probabilities(p, 1.0, cfg, GRID)
    rec = simulate_crossings(p, [1.0], cfg.replace(seed=5))
    cross = estimate_default_curve(rec.times[:, 0], GRID)
    assert np.all(np.abs(est - cross.p) <= 4 * np.hypot(se, cross.se))
    # conditioning never increases variance
    assert np.all(se <= cross.se * 1.05)


def test_conditional_estimator_determinism_and_continuity():
    p = ProcessParams(0.3, 0.5, 0.25)
    cfg = PathConfig(horizon=10, dt=1 / 12, n_paths=3000, seed=8)
    a, _ = conditional_default_probabilities(p, 1.0, cfg, GRID)
    b, _ = conditional_default_probabilities(p, 1.0, cfg, GRID, workers=3)
    assert a.tobytes() == b.tobytes()
    c, _ = conditional_default_probabilities(p.replace(xi=0.25 + 1e-7), 1.0, cfg, GRID)
    assert np.all(np.abs(c - a) < 1e-5)
    assert np.all(c >= a)
    assert np.all(np.diff(a) >= 0)


def test_conditional_estimator_validation():
    p = ProcessParams(0.3, 0.5, 0.25)
    cfg = PathConfig(horizon=5, dt=1 / 12, n_paths=10)
    with pytest.raises(DomainError):
        conditional_default_probabilities(p, 0.0, cfg, GRID[:3])
    with pytest.raises(DomainError):
        conditional_default_probabilities(p, 1.0, cfg, GRID)
    with pytest.raises(DomainError):
        conditional_default_probabilities(p, 1.0, cfg, [2.0, 1.0])
