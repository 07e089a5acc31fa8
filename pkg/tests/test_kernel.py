import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from stickybm import kernel as K
from stickybm.errors import DomainError, NumericError

mp.mp.dps = 40


def mp_speed_kernel(t, x, y, rho):
    """Independent extended-precision evaluation of the raw closed form."""
    t, x, y, rho = (mp.mpf(v) for v in (t, x, y, rho))
    s = abs(x) + abs(y)
    phi = lambda z: mp.exp(-z * z / (2 * t)) / mp.sqrt(2 * mp.pi * t)
    absorbed = phi(x - y) - phi(s) if x * y > 0 else mp.mpf(0)
    sticky = mp.exp(2 * s / rho + 2 * t / rho**2) * mp.erfc(s / mp.sqrt(2 * t) + mp.sqrt(2 * t) / rho) / rho
    return absorbed + sticky


# --- oracles -----------------------------------------------------------------


def test_absorbed_density_oracle():
    t, x, y = 1.0, 1.0, 1.0
    ref = (mp.exp(-(x - y) ** 2 / 2) - mp.exp(-mp.mpf(2) ** 2 / 2)) / mp.sqrt(2 * mp.pi)
    assert K.absorbed_density(t, x, y) == pytest.approx(float(ref), rel=1e-14)


@pytest.mark.parametrize("x,y", [(1.0, -1.0), (0.0, 1.0), (1.0, 0.0), (-2.0, 3.0)])
def test_absorbed_density_vanishes_across_or_on_barrier(x, y):
    assert K.absorbed_density(1.0, x, y) == 0.0


@pytest.mark.parametrize(
    "t,x,y,rho", [(1.0, 0.0, 0.5, 1.0), (0.3, 0.7, -0.3, 2.0), (2.0, -1.5, -0.2, 0.5), (1e-3, 0.01, 0.02, 0.1)]
)
def test_sticky_density_matches_extended_precision(t, x, y, rho):
    assert K.sticky_density(t, x, y, rho) == pytest.approx(float(mp_speed_kernel(t, x, y, rho)), rel=1e-12)


def test_atom_mass_oracle():
    ref = mp.e**2 * mp.erfc(mp.sqrt(2))
    assert K.sticky_atom_mass(1.0, 0.0, 1.0) == pytest.approx(float(ref), rel=1e-14)
    assert float(ref) == pytest.approx(0.336, abs=5e-4)


def test_density_at_half_plus_half_reproduced_by_chapman_kolmogorov():
    rho = 1.0

    def f(z):
        return K.speed_kernel(0.5, 0.0, z, rho) * K.speed_kernel(0.5, z, 0.5, rho)

    lhs = sum(quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=400)[0] for a, b in
              ((-np.inf, 0.0), (0.0, 0.5), (0.5, np.inf)))
    lhs += rho * f(0.0)
    assert lhs == pytest.approx(K.sticky_density(1.0, 0.0, 0.5, rho), abs=1e-8)


def test_no_overflow_for_large_arguments():
    v = K.sticky_density(1e-6, 50.0, 40.0, 1e-4)
    assert np.isfinite(v) and v >= 0
    assert K.sticky_atom_mass(1e-8, 3.0, 1e6) == 0.0
    assert 0 < K.sticky_atom_mass(1.0, 0.0, 1e-8) < 1e-7


def test_domain_errors():
    with pytest.raises(DomainError):
        K.sticky_density(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        K.sticky_density(0.0, 0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        K.sticky_atom_mass(1.0, 0.0, -1.0)
    with pytest.raises(DomainError):
        K.absorbed_density(-1.0, 1.0, 1.0)


# --- atom and limits ----------------------------------------------------------


def test_atom_mass_small_time_limits():
    assert K.sticky_atom_mass(1e-12, 0.0, 1.0) == pytest.approx(1.0, abs=1e-5)
    assert K.sticky_atom_mass(1e-6, 0.5, 1.0) < 1e-100


def test_cdf_total_mass_and_jump():
    assert K.sticky_cdf(1.0, 0.0, 1.0, 1e3) == 1.0
    assert K.sticky_cdf(1.0, 0.3, 1.0, -1e3) == 0.0
    jump = K.sticky_cdf(1.0, 0.0, 1.0, 0.0) - K.sticky_cdf(1.0, 0.0, 1.0, 0.0, left=True)
    assert jump == pytest.approx(K.sticky_atom_mass(1.0, 0.0, 1.0), rel=1e-13)
    assert jump == pytest.approx(0.336, abs=5e-4)


def test_cdf_left_of_zero_is_half_continuous_mass_from_origin():
    atom = K.sticky_atom_mass(1.0, 0.0, 1.0)
    assert K.sticky_cdf(1.0, 0.0, 1.0, 0.0, left=True) == pytest.approx((1 - atom) / 2, rel=1e-13)


@pytest.mark.parametrize("x", [-1.3, -0.2, 0.0, 0.4, 2.0])
@pytest.mark.parametrize("y", [-2.0, -0.5, -1e-3, 1e-3, 0.6, 3.0])
def test_cdf_matches_quadrature_of_density(x, y):
    t, rho = 0.7, 0.8
    pts = sorted({p for p in (0.0, x) if p < y})
    cuts = [-np.inf] + pts + [y]
    val = sum(quad(lambda u: K.sticky_density(t, x, u, rho), a, b, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
              for a, b in zip(cuts[:-1], cuts[1:]))
    if y >= 0:
        val += K.sticky_atom_mass(t, x, rho)
    assert K.sticky_cdf(t, x, rho, y) == pytest.approx(val, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(
    t=st.floats(1e-3, 10.0),
    x=st.floats(-5.0, 5.0),
    rho=st.floats(0.05, 20.0),
    ys=st.lists(st.floats(-8.0, 8.0), min_size=2, max_size=20),
)
def test_cdf_monotone_with_single_jump_at_zero(t, x, rho, ys):
    ys = np.sort(np.array(ys))
    c = K.sticky_cdf(t, x, rho, ys)
    assert np.all(np.diff(c) >= -1e-15)
    jump = K.sticky_cdf(t, x, rho, 0.0) - K.sticky_cdf(t, x, rho, 0.0, left=True)
    assert jump == pytest.approx(K.sticky_atom_mass(t, x, rho), abs=1e-14)
    for y in ys[ys != 0]:
        assert K.sticky_cdf(t, x, rho, y) == K.sticky_cdf(t, x, rho, y, left=True)


# --- invariants ---------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(t=st.floats(1e-4, 10.0), x=st.floats(-5.0, 5.0), y=st.floats(-5.0, 5.0), rho=st.floats(1e-2, 1e2))
def test_density_symmetry(t, x, y, rho):
    if y == 0:
        y = 0.1
    assert K.sticky_density(t, x, y, rho) == K.sticky_density(t, -x, -y, rho)


@pytest.mark.parametrize("t", [0.1, 1.0, 3.0])
@pytest.mark.parametrize("x", [-1.0, 0.0, 0.5])
@pytest.mark.parametrize("rho", [0.3, 1.0, 4.0])
def test_normalization_against_speed_measure(t, x, rho):
    pts = sorted({0.0, x})
    cuts = [-np.inf] + pts + [np.inf]
    mass = sum(quad(lambda y: K.speed_kernel(t, x, y, rho), a, b, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
               for a, b in zip(cuts[:-1], cuts[1:]))
    mass += rho * K.speed_kernel(t, x, 0.0, rho)
    assert mass == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("s,t,x,y,rho", [(0.3, 0.7, 0.4, -0.2, 0.5), (1.0, 2.0, -1.0, 1.5, 2.0), (0.2, 0.2, 0.1, 0.0, 1.0)])
def test_chapman_kolmogorov(s, t, x, y, rho):
    def f(z):
        return K.speed_kernel(s, x, z, rho) * K.speed_kernel(t, z, y, rho)

    pts = sorted({0.0, x, y})
    cuts = [-np.inf] + pts + [np.inf]
    lhs = sum(quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=400)[0] for a, b in zip(cuts[:-1], cuts[1:]))
    lhs += rho * f(0.0)
    assert lhs == pytest.approx(K.speed_kernel(s + t, x, y, rho), abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(
    t=st.floats(1e-3, 5.0), x=st.floats(-3.0, 3.0), y=st.floats(-3.0, 3.0), rho=st.floats(0.05, 20.0),
    c=st.floats(0.01, 100.0),
)
def test_space_time_scaling_identity(t, x, y, rho, c):
    rc = math.sqrt(c)
    lhs = K.speed_kernel(t, x / rc, y / rc, rho / rc)
    rhs = rc * K.speed_kernel(c * t, x, y, rho)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)
    assert K.sticky_atom_mass(t, x / rc, rho / rc) == pytest.approx(K.sticky_atom_mass(c * t, x, rho), rel=1e-12,
                                                                    abs=1e-300)


@settings(max_examples=300, deadline=None)
@given(t=st.floats(1e-4, 10.0), x=st.floats(-5.0, 5.0), y=st.floats(-5.0, 5.0), rho=st.floats(1e-2, 1e2))
def test_absorbed_below_sticky_and_hit_probability_in_unit_interval(t, x, y, rho):
    assert 0.0 <= K.absorbed_density(t, x, y) <= K.speed_kernel(t, x, y, rho)
    assert 0.0 <= K.hit_probability(t, x, y, rho) <= 1.0


def test_hit_probability_forced_cases():
    assert K.hit_probability(1.0, 1.0, -1.0, 1.0) == 1.0
    assert K.hit_probability(1.0, 0.0, 1.0, 1.0) == 1.0
    assert K.hit_probability(1.0, 1.0, 0.0, 1.0) == 1.0


def test_hit_probability_equals_one_minus_density_ratio():
    t, x, y, rho = 1.0, 2.0, 2.0, 1.0
    ratio = K.absorbed_density(t, x, y) / K.sticky_density(t, x, y, rho)
    assert K.hit_probability(t, x, y, rho) == pytest.approx(1.0 - ratio, rel=1e-12)
    assert 0 < K.hit_probability(t, x, y, rho) < 1


def test_hit_probability_against_fine_grid_simulation():
    """Bridge-hit frequency of time-change paths ending near (2, 2) vs. the kernel value."""
    from stickybm.path_model import ObservationGrid, StickyModel
    from stickybm.simulate import SimConfig, SimMethod, sample_sticky_bm_timechange

    cfg = SimConfig(StickyModel(1.0, 2.0), ObservationGrid(1, 1.0), SimMethod.TIME_CHANGE, refine=200, seed=12)
    ends, hits = [], []
    for r in range(100_000):
        p = sample_sticky_bm_timechange(cfg, r)
        ends.append(p.values[1])
        hits.append(p.hit_flags[0])
    ends, hits = np.array(ends), np.array(hits)
    sel = np.abs(ends - 2.0) < 0.1
    freq = hits[sel].mean()
    ref = np.mean(K.hit_probability(1.0, 2.0, ends[sel], 1.0))
    se = math.sqrt(ref * (1 - ref) / sel.sum())
    assert sel.sum() > 5000
    assert abs(freq - ref) < 4 * se + 0.01


# --- asymptotic functions -------------------------------------------------------


def test_k_vanishes_at_zero():
    for n in (1, 10, 10**6):
        assert K.asymptotic_fn("k", n, 0.0, 1.0) == 0.0


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0])
def test_sqrt_n_one_minus_f_limit(rho):
    lim = 2 * math.sqrt(2) / (rho * math.sqrt(math.pi))
    assert lim == pytest.approx(1.596 / rho, abs=1e-3)
    errs = [abs(math.sqrt(n) * (1 - K.asymptotic_fn("f", n, 0.0, rho)) - lim) for n in (10**2, 10**4, 10**6)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] / lim < 0.01


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 10**6), x=st.floats(-10.0, 10.0), rho=st.floats(0.05, 20.0))
def test_f_g_ranges(n, x, rho):
    assert 0.0 <= K.asymptotic_fn("f", n, x, rho) <= 1.0
    g = K.asymptotic_fn("g", n, x, rho)
    assert 0.0 <= g <= 0.5


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0])
def test_m_functional_limits(rho):
    n = 10**6
    mk = K.m_functional(lambda x: K.asymptotic_fn("k", n, x, rho), n, rho)
    mh = K.m_functional(lambda x: K.asymptotic_fn("h", n, x, rho), n, rho)
    assert 2 * math.sqrt(2 / math.pi) == pytest.approx(1.5958, abs=1e-4)
    assert abs(mk.value - 2 * math.sqrt(2 / math.pi)) / (2 * math.sqrt(2 / math.pi)) < 0.01
    assert abs(mh.value - 1 / rho) * rho < 0.01
    assert mk.error < 1e-6


def test_m_functional_of_zero_and_atom_term():
    assert K.m_functional(lambda x: np.zeros_like(x), 100, 1.0).value == 0.0
    # the atom term weighs g(0) by sqrt(n) rho
    bump = K.m_functional(lambda x: np.where(np.asarray(x) == 0.0, 1.0, 0.0), 100, 2.0).value
    assert bump == pytest.approx(20.0)


# --- limit law of the crossing count ---------------------------------------------


def test_portenko_transform_oracle():
    a1 = 1 + math.sqrt(2)
    assert K.portenko_transform(1.0, 0, 1.0) == pytest.approx(a1 / (2 + math.sqrt(2)), rel=1e-14)
    assert K.portenko_transform(1.0, 0, 1.0) == pytest.approx(0.7071, abs=1e-4)


@settings(max_examples=100, deadline=None)
@given(lam=st.floats(1e-3, 1e3), rho=st.floats(0.05, 20.0))
def test_portenko_transform_sums_to_one(lam, rho):
    ratio = (1 / rho**2) / (1 / rho**2 + lam**0.5 * (lam**0.5 + 2**0.5 / rho))
    kmax = int(math.ceil(-40 / math.log(ratio))) + 1 if ratio > 0 else 1
    values = K.portenko_transform(lam, np.arange(kmax), rho)
    assert np.all((values > 0) & (values < 1))
    assert values.sum() == pytest.approx(1.0, abs=1e-12)


def test_portenko_transform_large_lambda():
    assert K.portenko_transform(1e12, 0, 1.0) == pytest.approx(1.0, abs=1e-5)


def test_portenko_pmf_sums_to_one_and_nonnegative():
    vals = [K.portenko_pmf(1.0, k, 1.0) for k in range(31)]
    assert min(vals) >= 0
    assert sum(vals) == pytest.approx(1.0, abs=1e-3)


def test_stehfest_inverts_known_transform():
    # L[exp(-t)](lam) = 1 / (lam + 1)
    assert K.stehfest_invert(lambda s: 1.0 / (s + 1.0), 1.0, 14) == pytest.approx(math.exp(-1), rel=1e-5)


def test_portenko_pmf_rejects_bad_orders_and_reports_instability():
    with pytest.raises(DomainError):
        K.portenko_pmf(1.0, 0, 1.0, inversion_order=7)
    with pytest.raises(DomainError):
        K.portenko_pmf(1.0, 0, 1.0, inversion_order=20)
    with pytest.raises(NumericError) as exc:
        K.portenko_pmf(1.0, 0, 1.0, inversion_order=8, check_order=18, tol=1e-14)
    assert exc.value.values is not None and len(exc.value.values) == 2
