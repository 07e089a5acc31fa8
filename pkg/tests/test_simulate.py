import math

import numba
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from stickybm import kernel as K
from stickybm.errors import ConfigError, ModelError
from stickybm.experiments import randomized_pit
from stickybm.path_model import ModelKind, ObservationGrid, SamplePath, StickyModel, validate_path
from stickybm.simulate import (
    SimConfig,
    SimMethod,
    reflect_at_first_hit,
    sample_path,
    sample_sticky_bm_exact,
    sample_sticky_bm_timechange,
    sample_sticky_ito,
    sample_sticky_reflected,
    stream_generators,
)
from stickybm import _engine


def exact_cfg(rho=1.0, x0=0.0, n=1000, T=1.0, seed=0):
    return SimConfig(StickyModel(rho, x0), ObservationGrid(n, T), seed=seed)


def one_step_draws(x0, h, rho, size, seed):
    """Independent single-step draws of the exact sampler."""

    @numba.njit
    def draw(x0, h, rho, size, a, b, c):
        out = np.empty(size)
        hit = np.empty(size, dtype=np.bool_)
        for i in range(size):
            y, f, _ = _engine.exact_step(x0, h, rho, a, b, c)
            out[i] = y
            hit[i] = f
        return out, hit

    return draw(x0, h, rho, size, *stream_generators(seed, 0))


# --- contracts -------------------------------------------------------------------


def test_determinism_bit_for_bit():
    a = sample_sticky_bm_exact(exact_cfg(seed=42), 3)
    b = sample_sticky_bm_exact(exact_cfg(seed=42), 3)
    assert a == b
    assert not np.array_equal(a.values, sample_sticky_bm_exact(exact_cfg(seed=42), 4).values)
    assert a.seed == 42 and a.replica == 3


def test_timechange_determinism():
    cfg = SimConfig(StickyModel(1.0), ObservationGrid(50), SimMethod.TIME_CHANGE, refine=16, seed=9)
    assert sample_sticky_bm_timechange(cfg, 1) == sample_sticky_bm_timechange(cfg, 1)


def test_exact_paths_start_at_x0_and_are_valid():
    p = sample_sticky_bm_exact(exact_cfg(x0=0.25, n=500), 0)
    assert p.values[0] == 0.25
    assert len(p.values) == 501 and validate_path(p) == []


@pytest.mark.parametrize("rho", [0.5, 2.0])
def test_timechange_paths_valid_on_grid(rho):
    cfg = SimConfig(StickyModel(rho, 0.1), ObservationGrid(200, 0.5), SimMethod.TIME_CHANGE, refine=10, seed=1)
    for r in range(20):
        p = sample_sticky_bm_timechange(cfg, r)
        assert p.values[0] == 0.1 and len(p.values) == 101
        assert validate_path(p) == []


def test_config_invariants():
    with pytest.raises(ConfigError):
        SimConfig(StickyModel(1.0), ObservationGrid(10), refine=0)
    with pytest.raises(ConfigError):
        SimConfig(StickyModel(1.0, kind=ModelKind.STICKY_ITO), ObservationGrid(10), SimMethod.KERNEL_EXACT)
    with pytest.raises(ConfigError):
        sample_sticky_bm_exact(SimConfig(StickyModel(1.0), ObservationGrid(10), SimMethod.TIME_CHANGE))
    with pytest.raises(ConfigError):
        sample_sticky_reflected(exact_cfg())
    assert SimConfig(StickyModel(1.0), ObservationGrid(10), seed=-1).seed == 2**64 - 1


# --- exact sampler law ------------------------------------------------------------


@pytest.mark.parametrize("x0", [0.0, 0.02, -0.05])
def test_one_step_marginal_ks_against_kernel_cdf(x0):
    n, rho = 1000, 1.0
    ys, _ = one_step_draws(x0, 1.0 / n, rho, 100_000, seed=5)
    u = randomized_pit(ys, lambda y: K.sticky_cdf(1 / n, x0, rho, y),
                       lambda y: K.sticky_cdf(1 / n, x0, rho, y, left=True), np.random.default_rng(0))
    assert stats.kstest(u, "uniform").pvalue > 0.01


def test_one_step_hit_frequency_matches_kernel_given_endpoint():
    x0, h, rho = 0.04, 1e-3, 1.0
    ys, hits = one_step_draws(x0, h, rho, 400_000, seed=8)
    same = (ys * x0 > 0)
    p = K.hit_probability(h, x0, ys[same], rho)
    bins = np.quantile(p, np.linspace(0, 1, 11))
    idx = np.clip(np.searchsorted(bins, p, side="right") - 1, 0, 9)
    for b in range(10):
        sel = idx == b
        mean_p = p[sel].mean()
        se = math.sqrt(max(mean_p * (1 - mean_p), 1e-12) / sel.sum())
        assert abs(hits[same][sel].mean() - mean_p) < 3.5 * se + 1e-12
    assert np.all(hits[~same])


def test_atom_frequency_binned_over_start_value():
    n, rho = 1000, 1.0
    cfg = exact_cfg(rho, 0.0, n)
    prev, nxt = [], []
    for r in range(200):
        v = sample_sticky_bm_exact(cfg, r).values
        prev.append(v[:-1])
        nxt.append(v[1:])
    prev, nxt = np.concatenate(prev), np.concatenate(nxt)
    at_zero = nxt == 0.0
    edges = [0.0, 1e-300, 0.005, 0.01, 0.02, 0.04, 0.08]
    a = np.abs(prev)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (a >= lo) & (a < hi)
        if sel.sum() < 500:
            continue
        expected = K.sticky_atom_mass(1 / n, prev[sel], rho)
        var = np.sum(expected * (1 - expected))
        assert abs(at_zero[sel].sum() - expected.sum()) < 3 * math.sqrt(var) + 1


def test_occupation_at_zero_tracks_local_time():
    """(1/n) sum 1{X = 0} is the time spent at 0; its mean equals E int_0^1 P_0(X_s = 0) ds."""
    n = 100_000
    cfg = exact_cfg(1.0, 0.0, n, seed=3)
    occ = np.array([np.count_nonzero(sample_sticky_bm_exact(cfg, r).values[:-1] == 0.0) / n for r in range(100)])
    s = np.linspace(0, 1, 20001)[1:]
    ref = np.trapezoid(np.concatenate([[1.0], K.sticky_atom_mass(s, 0.0, 1.0)]), np.linspace(0, 1, 20001))
    assert abs(occ.mean() - ref) < 4 * occ.std() / 10


# --- time-change sampler ------------------------------------------------------------


def test_timechange_small_rho_is_brownian():
    cfg = SimConfig(StickyModel(1e-12), ObservationGrid(10), SimMethod.TIME_CHANGE, refine=10, seed=2)
    x = np.array([sample_sticky_bm_timechange(cfg, r).values[-1] for r in range(5000)])
    assert stats.kstest(x, "norm").pvalue > 0.01


def test_timechange_matches_exact_marginal_at_one():
    grid = ObservationGrid(20)
    exact = SimConfig(StickyModel(1.0), grid, seed=4)
    tc = SimConfig(StickyModel(1.0), grid, SimMethod.TIME_CHANGE, refine=64, seed=5)
    a = [sample_sticky_bm_exact(exact, r).values[-1] for r in range(10_000)]
    b = [sample_sticky_bm_timechange(tc, r).values[-1] for r in range(10_000)]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_timechange_grid_times_exact():
    cfg = SimConfig(StickyModel(3.0), ObservationGrid(7, 1.0), SimMethod.TIME_CHANGE, refine=3)
    p = sample_sticky_bm_timechange(cfg)
    assert np.array_equal(p.times(), np.arange(8) / 7)


# --- reflected ----------------------------------------------------------------------


def test_reflected_nonnegative_and_folded_cdf():
    n, rho, x0 = 50, 1.0, 0.2
    cfg = SimConfig(StickyModel(rho, x0, ModelKind.STICKY_REFLECTED_BM), ObservationGrid(n), seed=6)
    x = np.array([sample_sticky_reflected(cfg, r).values[-1] for r in range(20_000)])
    assert np.all(x >= 0)

    def folded(y, left=False):
        y = np.asarray(y)
        if left:
            return np.where(y > 0, K.sticky_cdf(1.0, x0, rho, y, left=True) - K.sticky_cdf(1.0, x0, rho, -y), 0.0)
        return K.sticky_cdf(1.0, x0, rho, y) - K.sticky_cdf(1.0, x0, rho, -y, left=True)

    u = randomized_pit(x, folded, lambda y: folded(y, True), np.random.default_rng(1))
    assert stats.kstest(u, "uniform").pvalue > 0.01


def test_reflected_inherits_flags_and_occupation():
    base = SimConfig(StickyModel(1.0, 0.3), ObservationGrid(300), seed=8)
    refl = SimConfig(StickyModel(1.0, 0.3, ModelKind.STICKY_REFLECTED_BM), ObservationGrid(300), seed=8)
    y, x = sample_path(base, 2), sample_path(refl, 2)
    assert np.array_equal(np.abs(y.values), x.values)
    assert np.array_equal(y.hit_flags, x.hit_flags)


def test_reflected_local_time_is_twice_that_of_the_signed_path():
    """Same occupation at 0 but local time doubles: D1/sqrt(n) of |Y| relative to rho L^{|Y|}/2."""
    n = 100_000
    refl = SimConfig(StickyModel(1.0, 0.0, ModelKind.STICKY_REFLECTED_BM), ObservationGrid(n), seed=9)
    ratios = []
    for r in range(60):
        v = sample_sticky_reflected(refl, r).values
        occ = np.count_nonzero(v[:-1] == 0.0) / n
        lt = 2 * occ / 1.0
        d1 = np.count_nonzero((v[:-1] == 0.0) != (v[1:] == 0.0))
        ratios.append(d1 / math.sqrt(n) / (2 * math.sqrt(2 / math.pi) * lt))
    assert np.mean(ratios) == pytest.approx(1.0, abs=0.1)


# --- Ito -----------------------------------------------------------------------------


def ito_cfg(rho, sigma, mu=0.0, n=50, refine=32, seed=0, x0=0.0):
    return SimConfig(StickyModel(rho, x0, ModelKind.STICKY_ITO, mu, sigma), ObservationGrid(n), SimMethod.TIME_CHANGE,
                     refine, seed)


def test_ito_unit_sigma_matches_exact():
    a = [sample_sticky_ito(ito_cfg(1.0, 1.0, seed=1), r).values[-1] for r in range(10_000)]
    b = [sample_sticky_bm_exact(exact_cfg(1.0, 0.0, 50, seed=2), r).values[-1] for r in range(10_000)]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_ito_constant_sigma_is_scaled_sticky_bm():
    c = 2.0
    a = [sample_sticky_ito(ito_cfg(1.0, c, seed=3), r).values[-1] for r in range(10_000)]
    b = [c * sample_sticky_bm_exact(exact_cfg(c * 1.0, 0.0, 50, seed=4), r).values[-1] for r in range(10_000)]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_ito_occupation_increases_with_rho():
    means = []
    sigma = numba.njit(lambda x: 1.0 + 0.5 * math.tanh(x))
    mu = numba.njit(lambda x: -0.5 * x)
    for rho in (0.5, 1.0, 2.0):
        cfg = ito_cfg(rho, sigma, mu=mu, n=100, refine=8, seed=11)
        occ = [np.mean(sample_sticky_ito(cfg, r).values[:-1] == 0.0) for r in range(10_000)]
        means.append(np.mean(occ))
    assert means[0] < means[1] < means[2]


def test_ito_nonpositive_sigma_raises_model_error():
    cfg = ito_cfg(1.0, lambda x: 1.0 if x < 0.05 else -1.0, n=100, refine=4, x0=0.0)
    with pytest.raises(ModelError):
        for r in range(50):
            sample_sticky_ito(cfg, r)


# --- reflection at first hit -----------------------------------------------------------


def test_reflection_without_hit_is_identity():
    p = SamplePath.from_arrays([1.0, 2.0, 1.5], [False, False])
    assert reflect_at_first_hit(p) == p


def test_reflection_negates_from_first_flagged_interval():
    p = SamplePath.from_arrays([1.0, 2.0, 1.5, -0.5, 0.0, 3.0], [False, True, True, True, True])
    q = reflect_at_first_hit(p)
    assert list(q.values) == [1.0, 2.0, -1.5, 0.5, 0.0, -3.0]
    assert np.array_equal(q.hit_flags, p.hit_flags)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32), x0=st.floats(-0.3, 0.3), rho=st.floats(0.1, 5.0))
def test_reflection_is_an_involution_preserving_magnitudes(seed, x0, rho):
    p = sample_sticky_bm_exact(exact_cfg(rho, x0, 200, seed=seed))
    q = reflect_at_first_hit(p)
    assert reflect_at_first_hit(q) == p
    assert np.array_equal(np.abs(q.values), np.abs(p.values))
    assert validate_path(q) == []


def test_reflected_paths_have_fresh_marginal_law():
    cfg = exact_cfg(1.0, 0.5, 200, seed=21)
    a = [reflect_at_first_hit(sample_sticky_bm_exact(cfg, r)).values[-1] for r in range(10_000)]
    b = [sample_sticky_bm_exact(cfg, 10_000 + r).values[-1] for r in range(10_000)]
    assert stats.ks_2samp(a, b).pvalue > 0.01
